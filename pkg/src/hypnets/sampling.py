"""Seeded random instance generators used by the CLI and the test-suite.

Randomness comes from numpy's default 64-bit generator (PCG64 behind
``numpy.random.default_rng``); every draw is a pure function of the given
seed.  Purely random data occasionally produces a near-degenerate
quadrilateral, so the generators redraw with a derived sub-seed until the
genericity check passes (the attempt counter is mixed into the seed, which
keeps results reproducible).
"""

from __future__ import annotations

import numpy as np

from .anet import ANet, solve_layered_cauchy, solve_surface_cauchy
from .errors import GenericityError, SolverError
from .geometry import Tolerances

__all__ = [
    "rng_for",
    "random_surface",
    "random_layered_net",
    "random_positive_rho_seeds",
]

_MAX_ATTEMPTS = 64


def rng_for(seed: int, *stream) -> np.random.Generator:
    """Generator for a seed plus an arbitrary tuple naming the substream."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, stream)])


def _axis_normals(rng, n1, n2, n3=None):
    a = rng.normal(size=(n1, 3))
    b = rng.normal(size=(n2, 3))
    b[0] = a[0]
    if n3 is None:
        return a, b
    c = rng.normal(size=(n3, 3))
    c[0] = a[0]
    return a, b, c


def random_surface(seed: int, shape=(8, 8), coefficient_range=(0.5, 1.5),
                   signed: bool = False, tol: Tolerances = Tolerances()) -> ANet:
    """Generic random A-surface with coefficients drawn from the given range.

    With signed=True the coefficient signs are flipped independently per
    quadrilateral, which generally destroys extendability by internal
    crosses.
    """
    w1, w2 = shape
    lo, hi = coefficient_range
    for attempt in range(_MAX_ATTEMPTS):
        rng = rng_for(seed, 1, attempt)
        n1, n2 = _axis_normals(rng, w1, w2)
        a12 = rng.uniform(lo, hi, size=(w1 - 1, w2 - 1))
        if signed:
            a12 *= rng.choice([-1.0, 1.0], size=a12.shape)
        try:
            return solve_surface_cauchy(n1, n2, a12, tol=tol)
        except (GenericityError, SolverError):
            continue
    raise GenericityError(f"no generic surface found for seed {seed}")


def random_layered_net(seed: int, shape=(8, 8, 2), coefficient_range=(0.5, 1.5),
                       weingarten_sign: bool = True,
                       tol: Tolerances = Tolerances()) -> ANet:
    """Generic random 3D A-net from positive coefficient seeds.

    With weingarten_sign=True the seeds are positive in the (a21, a23, a31)
    orientation, the natural family for layer-to-layer transformations; the
    stored (1,2)- and (1,3)-coefficients are then negative.
    """
    w1, w2, w3 = shape
    lo, hi = coefficient_range
    s12 = -1.0 if weingarten_sign else 1.0
    s13 = -1.0 if weingarten_sign else 1.0
    for attempt in range(_MAX_ATTEMPTS):
        rng = rng_for(seed, 3, attempt)
        n1, n2, n3 = _axis_normals(rng, w1, w2, w3)
        a12 = s12 * rng.uniform(lo, hi, size=(w1 - 1, w2 - 1))
        a13 = s13 * rng.uniform(lo, hi, size=(w1 - 1, w3 - 1))
        a23 = rng.uniform(lo, hi, size=(w2 - 1, w3 - 1))
        try:
            return solve_layered_cauchy(n1, n2, n3, a12, a13, a23, tol=tol)
        except (GenericityError, SolverError):
            continue
    raise GenericityError(f"no generic layered net found for seed {seed}")


def random_positive_rho_seeds(seed: int, shape, value_range=(0.5, 1.5)):
    """Positive scalar Cauchy data (two axis arrays plus the unit-cell value)."""
    rng = rng_for(seed, 5)
    lo, hi = value_range
    r1 = rng.uniform(lo, hi, size=shape[0])
    r2 = rng.uniform(lo, hi, size=shape[1])
    r2[0] = r1[0]
    corner = float(rng.uniform(lo, hi))
    return r1, r2, corner
