"""Dense finite-window storage for fields over Z^m (m <= 3).

Lattice directions are 1-based to match the usual subscript notation where a
lower index means a unit shift in that direction.  Fields track which cells
have been populated so evolution solvers can assert full coverage; after a
solver finishes, a field is frozen and becomes read-only.
"""

from __future__ import annotations

import numpy as np

from .errors import SolverError

__all__ = ["Window", "ScalarField", "VectorField", "FaceField", "shift", "axis_slice"]


class Window:
    """Axis-aligned integer box, bounds inclusive."""

    def __init__(self, bounds):
        bounds = [(int(lo), int(hi)) for lo, hi in bounds]
        for lo, hi in bounds:
            if hi < lo:
                raise ValueError(f"empty window bound ({lo}, {hi})")
        self.bounds = tuple(bounds)

    @staticmethod
    def from_shape(*shape) -> "Window":
        return Window([(0, n - 1) for n in shape])

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def shape(self):
        return tuple(hi - lo + 1 for lo, hi in self.bounds)

    @property
    def origin(self):
        return tuple(lo for lo, _ in self.bounds)

    def contains(self, idx) -> bool:
        return len(idx) == self.dim and all(
            lo <= int(i) <= hi for i, (lo, hi) in zip(idx, self.bounds)
        )

    def offset(self, idx):
        if not self.contains(idx):
            raise IndexError(f"index {tuple(idx)} outside window {self.bounds}")
        return tuple(int(i) - lo for i, (lo, _) in zip(idx, self.bounds))

    def indices(self):
        """All indices in deterministic lexicographic order."""
        for off in np.ndindex(*self.shape):
            yield tuple(o + lo for o, (lo, _) in zip(off, self.bounds))

    def shrink(self, deltas) -> "Window":
        """Window with the upper bound reduced by deltas[k] along axis k."""
        return Window([(lo, hi - d) for (lo, hi), d in zip(self.bounds, deltas)])

    def __eq__(self, other):
        return isinstance(other, Window) and self.bounds == other.bounds

    def __repr__(self):
        return f"Window({list(self.bounds)})"


def shift(idx, direction: int, k: int = 1):
    """Index shifted by k steps along a 1-based lattice direction."""
    idx = tuple(int(i) for i in idx)
    if not 1 <= direction <= len(idx):
        raise IndexError(f"direction {direction} out of range for index {idx}")
    out = list(idx)
    out[direction - 1] += k
    return tuple(out)


class _Field:
    """Shared storage logic; value_shape is () for scalars, (3,) for vectors."""

    value_shape = ()

    def __init__(self, window: Window, values=None):
        self.window = window
        full_shape = window.shape + self.value_shape
        if values is None:
            self.values = np.zeros(full_shape)
            self._set = np.zeros(window.shape, dtype=bool)
        else:
            values = np.asarray(values, dtype=float).reshape(full_shape)
            self.values = values.copy()
            self._set = np.ones(window.shape, dtype=bool)
        self._frozen = False

    def get(self, idx):
        off = self.window.offset(idx)
        if not self._set[off]:
            raise SolverError(f"read of unset cell {tuple(idx)}")
        return self.values[off]

    def set(self, idx, value):
        if self._frozen:
            raise SolverError("field is frozen")
        off = self.window.offset(idx)
        self.values[off] = value
        self._set[off] = True

    def is_set(self, idx) -> bool:
        return bool(self._set[self.window.offset(idx)])

    def all_set(self) -> bool:
        return bool(self._set.all())

    def freeze(self):
        if not self.all_set():
            missing = np.argwhere(~self._set)[0]
            cell = tuple(int(m) + lo for m, (lo, _) in zip(missing, self.window.bounds))
            raise SolverError(f"cannot freeze field with unset cell {cell}")
        self._frozen = True
        self.values.setflags(write=False)
        return self

    def copy(self):
        out = type(self)(self.window)
        out.values = self.values.copy()
        out._set = self._set.copy()
        return out

    def to_json(self):
        if not self.all_set():
            raise SolverError("cannot serialize a partially populated field")
        return {
            "window": [list(b) for b in self.window.bounds],
            "values": self.values.ravel().tolist(),
        }

    @classmethod
    def from_json(cls, obj):
        window = Window(obj["window"])
        field = cls(window, values=obj["values"])
        return field


class ScalarField(_Field):
    value_shape = ()

    @staticmethod
    def full(window: Window, fill: float) -> "ScalarField":
        return ScalarField(window, np.full(window.shape, float(fill)))


class VectorField(_Field):
    value_shape = (3,)

    @staticmethod
    def full(window: Window, fill) -> "VectorField":
        arr = np.broadcast_to(np.asarray(fill, dtype=float), window.shape + (3,))
        return VectorField(window, arr)


class FaceField(_Field):
    """One real per elementary quadrilateral of an (i, j)-coordinate plane.

    Values are anchored at the quadrilateral's lowest corner, so the storage
    window shrinks by one along directions i and j relative to the vertex
    window it decorates.
    """

    value_shape = ()

    def __init__(self, vertex_window: Window, plane_pair, values=None):
        i, j = plane_pair
        if not (1 <= i < j <= vertex_window.dim):
            raise ValueError(f"bad plane pair {plane_pair}")
        deltas = [0] * vertex_window.dim
        deltas[i - 1] = 1
        deltas[j - 1] = 1
        self.plane_pair = (i, j)
        self.vertex_window = vertex_window
        super().__init__(vertex_window.shrink(deltas), values)

    def copy(self):
        out = FaceField(self.vertex_window, self.plane_pair)
        out.values = self.values.copy()
        out._set = self._set.copy()
        return out

    def to_json(self):
        obj = super().to_json()
        obj["plane_pair"] = list(self.plane_pair)
        return obj

    @classmethod
    def from_json(cls, obj, vertex_window: Window):
        field = cls(vertex_window, tuple(obj["plane_pair"]))
        values = np.asarray(obj["values"], dtype=float).reshape(field.window.shape)
        field.values = values
        field._set = np.ones(field.window.shape, dtype=bool)
        return field


def axis_slice(field, axes):
    """Restriction of a field to the coordinate subspace spanned by the axes.

    The subspace passes through the window origin; axes are 1-based.  The
    result is a new field over the reduced window (all other coordinates are
    pinned at the window origin).  An empty axis set yields the single origin
    value as a 0-dimensional window.
    """
    if isinstance(field, FaceField):
        raise TypeError("axis_slice applies to vertex fields, not face fields")
    axes = sorted(set(int(a) for a in axes))
    for a in axes:
        if not 1 <= a <= field.window.dim:
            raise IndexError(f"axis {a} out of range")
    origin = field.window.origin
    keep = [a - 1 for a in axes]
    bounds = [field.window.bounds[k] for k in keep]
    out_window = Window(bounds) if bounds else Window([(0, 0)])
    out = type(field).__new__(type(field))
    selector = tuple(
        slice(None) if k in keep else 0 for k in range(field.window.dim)
    )
    values = field.values[selector]
    sub_set = field._set[selector]
    if not bounds:
        values = values.reshape((1,) + field.value_shape)
        sub_set = sub_set.reshape((1,))
    out.window = out_window
    out.values = np.array(values)
    out._set = np.array(sub_set)
    out._frozen = False
    return out
