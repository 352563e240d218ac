"""JSON artifact files for nets, extended nets and transform stacks.

Every artifact is a single self-describing JSON object with a "kind"
discriminator and a format version.  Field arrays are flat row-major lists;
floats round-trip through the shortest-repr encoding of the json module.
Keys are sorted on output so repeated runs produce identical bytes.
"""

from __future__ import annotations

import json

import numpy as np

from .anet import ANet
from .errors import ConfigError
from .hypnet import HyperbolicNet
from .lattice import FaceField, ScalarField, VectorField, Window
from .weingarten import WeingartenPair

__all__ = ["save_artifact", "load_artifact", "net_to_obj", "net_from_obj"]

_VERSION = 1


def _vertices_to_list(field: VectorField):
    return field.values.ravel().tolist()


def net_to_obj(net: ANet) -> dict:
    obj = {
        "dim": net.dim,
        "window": [list(b) for b in net.window.bounds],
        "vertices": _vertices_to_list(net.vertices),
    }
    if net.normals is not None:
        obj["normals"] = _vertices_to_list(net.normals)
    if net.moutard:
        obj["moutard"] = {
            f"{i}{j}": f.values.ravel().tolist() for (i, j), f in net.moutard.items()
        }
    return obj


def net_from_obj(obj: dict) -> ANet:
    window = Window(obj["window"])
    verts = VectorField(window, np.asarray(obj["vertices"], dtype=float))
    verts.freeze()
    normals = None
    if obj.get("normals") is not None:
        normals = VectorField(window, np.asarray(obj["normals"], dtype=float))
        normals.freeze()
    moutard = {}
    for key, vals in (obj.get("moutard") or {}).items():
        if len(key) != 2:
            raise ConfigError(f"bad plane-pair key {key!r}")
        pair = (int(key[0]), int(key[1]))
        f = FaceField(window, pair)
        f.values = np.asarray(vals, dtype=float).reshape(f.window.shape)
        f._set[...] = True
        moutard[pair] = f.freeze()
    return ANet(verts, normals, moutard)


def save_artifact(obj, path, seed=None, extra=None):
    """Write a net-like object to a JSON artifact file.

    Accepts an ANet, HyperbolicNet or WeingartenPair; the seed used to
    produce the artifact is always recorded when given.
    """
    if isinstance(obj, ANet):
        data = {"kind": "anet", **net_to_obj(obj)}
    elif isinstance(obj, HyperbolicNet):
        data = {
            "kind": "hypnet",
            **net_to_obj(obj.surface),
            "rho": obj.rho.values.ravel().tolist(),
            "status": obj.status,
        }
    elif isinstance(obj, WeingartenPair):
        data = {
            "kind": "stack",
            **net_to_obj(obj.net),
            "rho": obj.rho.values.ravel().tolist(),
            "status": obj.status,
        }
        if obj.lambda_ is not None:
            data["lambda"] = obj.lambda_
    else:
        raise ConfigError(f"cannot serialize object of type {type(obj).__name__}")
    data["version"] = _VERSION
    if seed is not None:
        data["seed"] = int(seed)
    if extra:
        data.update(extra)
    with open(path, "w") as fh:
        json.dump(data, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_artifact(path):
    """Read an artifact file back into the matching object."""
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"not a JSON artifact: {exc}") from exc
    kind = data.get("kind")
    if data.get("version") != _VERSION:
        raise ConfigError(f"unsupported artifact version {data.get('version')!r}")
    if kind == "anet":
        return net_from_obj(data)
    if kind == "hypnet":
        net = net_from_obj(data)
        rho = ScalarField(net.window, np.asarray(data["rho"], dtype=float)).freeze()
        return HyperbolicNet(net, rho, data.get("status", "invalid"), [])
    if kind == "stack":
        net = net_from_obj(data)
        rho = ScalarField(net.window, np.asarray(data["rho"], dtype=float)).freeze()
        return WeingartenPair(net, rho, data.get("lambda"), data.get("status", "pre_hyperbolic"))
    raise ConfigError(f"unknown artifact kind {kind!r}")
