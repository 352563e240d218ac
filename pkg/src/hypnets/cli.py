"""Command-line surface: synth, extend, transform, verify, export.

Every command is deterministic given its configuration and seed; the seed is
recorded in each artifact written.  Randomness uses numpy's default_rng
(PCG64).  Exit codes: 0 success, 1 verification failure, 2 configuration
error, 3 solver/genericity error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .anet import ANet, solve_layered_cauchy
from .errors import ConfigError, GenericityError, GeometryError, SolverError
from .geometry import Tolerances
from .hypnet import HyperbolicNet, solve_rho_cauchy
from .lattice import ScalarField
from .meshout import tessellate, write_obj
from .netio import load_artifact, save_artifact
from .sampling import random_positive_rho_seeds, random_surface, rng_for
from .verify import verify_object
from .weingarten import (
    WeingartenPair,
    backlund_transform,
    combine_pair,
    generate_equitwisted_pair,
    iterate_weingarten,
    normalize_lambda,
    weingarten_transform,
)

__all__ = ["main"]

_SYNTH_KEYS = {"shape", "coefficients", "x0", "equi_twisted", "seed"}


def _parse_shape(text):
    try:
        parts = [int(p) for p in str(text).lower().split("x")]
    except ValueError as exc:
        raise ConfigError(f"bad shape {text!r}") from exc
    if len(parts) not in (2, 3) or any(p < 2 for p in parts):
        raise ConfigError(f"shape must be W1xW2 or W1xW2xW3 with extents >= 2, got {text!r}")
    return tuple(parts)


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - _SYNTH_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _tolerances(args) -> Tolerances:
    return Tolerances(incidence_rel=args.tol_incidence,
                      genericity_rel=args.tol_genericity)


def cmd_synth(args) -> int:
    cfg = _load_config(args.config)
    shape = _parse_shape(args.shape or cfg.get("shape") or "8x8")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    tol = _tolerances(args)
    coefficients = args.coefficients or cfg.get("coefficients", "random-positive")
    equi = args.equi_twisted or bool(cfg.get("equi_twisted", False))
    if equi:
        if len(shape) != 2:
            raise ConfigError("the equi-twisted construction takes a 2D shape")
        data = generate_equitwisted_pair(seed, shape, tol=tol)
        net = data.net
    elif len(shape) == 2:
        if coefficients == "random-positive":
            net = random_surface(seed, shape, signed=False, tol=tol)
        elif coefficients == "random-signed":
            net = random_surface(seed, shape, signed=True, tol=tol)
        elif isinstance(coefficients, dict) and "constant" in coefficients:
            rng = rng_for(seed, 1, 0)
            n1 = rng.normal(size=(shape[0], 3))
            n2 = rng.normal(size=(shape[1], 3))
            n2[0] = n1[0]
            a12 = np.full((shape[0] - 1, shape[1] - 1), float(coefficients["constant"]))
            from .anet import solve_surface_cauchy

            net = solve_surface_cauchy(n1, n2, a12, tol=tol)
        else:
            raise ConfigError(f"unknown coefficient mode {coefficients!r}")
    else:
        from .sampling import random_layered_net

        net = random_layered_net(seed, shape, tol=tol)
    x0 = cfg.get("x0")
    if x0 is not None:
        offset = np.asarray(x0, dtype=float) - net.vertices.values[(0,) * net.dim]
        shifted = net.vertices.copy()
        shifted.values = net.vertices.values + offset
        net = ANet(shifted.freeze(), net.normals, net.moutard)
    save_artifact(net, args.out, seed=seed)
    print(f"wrote {args.out} (kind anet, dim {net.dim}, window {net.window.shape})")
    return 0


def cmd_extend(args) -> int:
    obj = load_artifact(args.net)
    if not isinstance(obj, ANet) or obj.dim != 2:
        raise ConfigError("extend needs a 2D net artifact")
    tol = _tolerances(args)
    seed = args.seed if args.seed is not None else 0
    shape = obj.window.shape
    if args.rho_seeds == "ones":
        r1, r2, corner = np.ones(shape[0]), np.ones(shape[1]), 1.0
    elif args.rho_seeds == "random-positive":
        r1, r2, corner = random_positive_rho_seeds(seed, shape)
    else:
        try:
            with open(args.rho_seeds) as fh:
                seeds = json.load(fh)
            r1 = np.asarray(seeds["axis1"], dtype=float)
            r2 = np.asarray(seeds["axis2"], dtype=float)
            corner = float(seeds["corner"])
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"bad scalar seed source {args.rho_seeds!r}: {exc}") from exc
        if r1.shape != (shape[0],) or r2.shape != (shape[1],):
            raise ConfigError(
                f"seed file needs axis1 of length {shape[0]} and axis2 of length {shape[1]}"
            )
    hyp = solve_rho_cauchy(obj, r1, r2, corner, tol=tol)
    save_artifact(hyp, args.out, seed=seed)
    print(f"wrote {args.out} (kind hypnet, status {hyp.status})")
    if hyp.offending:
        print(f"offending cells: {hyp.offending[:5]}")
    return 0


def _stack_from_layers(hyp: HyperbolicNet, k_layers: int, seed: int,
                       tol: Tolerances) -> ANet:
    """Extend the supporting surface vertically by seeded positive data."""
    net = hyp.surface
    if net.normals is None:
        raise ConfigError("the net artifact carries no normals; cannot build layers")
    if (1, 2) not in net.moutard:
        raise ConfigError("the net artifact carries no coefficients")
    w1, w2 = net.window.shape
    n1 = net.normals.values[:, 0]
    n2 = net.normals.values[0, :]
    a12 = net.moutard[(1, 2)].values
    x0 = net.vertices.values[0, 0]
    for attempt in range(64):
        rng = rng_for(seed, 11, attempt)
        n3 = rng.normal(size=(k_layers + 1, 3))
        n3[0] = n1[0]
        a13 = -rng.uniform(0.5, 1.5, size=(w1 - 1, k_layers))
        a23 = rng.uniform(0.5, 1.5, size=(w2 - 1, k_layers))
        try:
            return solve_layered_cauchy(n1, n2, n3, a12, a13, a23, x0=x0, tol=tol)
        except (GenericityError, SolverError):
            continue
    raise SolverError("no generic vertical extension found")


def cmd_transform(args) -> int:
    obj = load_artifact(args.hypnet)
    if not isinstance(obj, HyperbolicNet):
        raise ConfigError("transform needs an extended (hypnet) artifact")
    tol = _tolerances(args)
    seed = args.seed if args.seed is not None else 0
    if args.layer is not None:
        layer = load_artifact(args.layer)
        if not isinstance(layer, ANet) or layer.dim not in (2, 3):
            raise ConfigError("layer file must hold a net artifact")
        stack = layer
        k_layers = 1 if layer.dim == 2 else layer.window.shape[2] - 1
    else:
        k_layers = args.layers
        stack = _stack_from_layers(obj, k_layers, seed, tol)
    if args.backlund:
        if k_layers != 1:
            raise ConfigError("the weaker transform extends exactly one layer")
        if args.seeds == "random":
            rng = rng_for(seed, 13)
            seeds = rng.uniform(0.5, 1.5, size=4)
        else:
            try:
                seeds = np.asarray([float(v) for v in args.seeds.split(",")])
            except (AttributeError, ValueError) as exc:
                raise ConfigError("--seeds needs four comma-separated values or 'random'") from exc
            if seeds.shape != (4,):
                raise ConfigError("--seeds needs exactly four values")
        if isinstance(stack, ANet) and stack.dim == 3:
            net3 = stack
        else:
            from .weingarten import combine_layers

            net3 = combine_layers(obj.surface, stack, tol)
        tilde = backlund_transform(obj, net3, seeds, tol)
        pair = combine_pair(net3, obj.rho, tilde.rho.values)
        result = pair
    elif k_layers == 1:
        pair = weingarten_transform(obj, stack, tol=tol)
        result = normalize_lambda(pair)
    else:
        rho3, rep = iterate_weingarten(obj, stack, tol)
        result = combine_pair(stack, obj.rho, rho3.values[:, :, 1:])
        result.status = "hyperbolic" if rep["one_sign"] and obj.status == "hyperbolic" \
            else "pre_hyperbolic"
        result = normalize_lambda(result)
        print(f"dbkp residual: {rep['dbkp_max']:.3e}; "
              f"weingarten equations: {rep['weingarten_equations_max']:.3e}")
    extra = None
    if args.verify:
        report = verify_object(result, tol)
        extra = {"verification": report.to_json()}
        print(report.summary())
    save_artifact(result, args.out, seed=seed, extra=extra)
    lam = getattr(result, "lambda_", None)
    lam_text = "none" if lam is None else f"{lam:+.0f}"
    print(f"wrote {args.out} (kind stack, status {result.status}, lambda {lam_text})")
    return 0


def cmd_verify(args) -> int:
    obj = load_artifact(args.artifact)
    tol = _tolerances(args)
    report = verify_object(obj, tol)
    print(report.summary())
    if args.report:
        with open(args.report, "w") as fh:
            json.dump(report.to_json(), fh, sort_keys=True, indent=1)
            fh.write("\n")
        print(f"wrote {args.report}")
    return 0 if report.all_passed() else 1


def cmd_export(args) -> int:
    obj = load_artifact(args.hypnet)
    if isinstance(obj, WeingartenPair):
        raise ConfigError("export a single extended net, not a stack")
    if not isinstance(obj, HyperbolicNet):
        raise ConfigError("export needs an extended (hypnet) artifact")
    if obj.status != "hyperbolic":
        raise ConfigError(f"refusing to export a net with status {obj.status!r}")
    mesh = tessellate(obj, args.resolution)
    write_obj(mesh, args.out)
    print(f"wrote {args.out}: {len(mesh.vertices)} vertices, "
          f"{len(mesh.triangles)} triangles, {len(mesh.groups)} patches")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypnets",
        description="Construct, extend, transform, verify and export discrete"
                    " nets with adapted doubly ruled patches.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--seed", type=int, default=None, help="64-bit run seed")
        p.add_argument("--tol-incidence", type=float, default=1e-9)
        p.add_argument("--tol-genericity", type=float, default=1e-7)
        if needs_out:
            p.add_argument("--out", required=True, help="output path")

    p = sub.add_parser("synth", help="build a net from Cauchy data")
    common(p)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--shape", help="window shape, e.g. 12x12 or 8x8x2")
    p.add_argument("--coefficients", help="random-positive | random-signed")
    p.add_argument("--equi-twisted", action="store_true",
                   help="use the positive-potential two-layer construction")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extend", help="attach cross scalars to a net")
    common(p)
    p.add_argument("--net", required=True, help="input net artifact")
    p.add_argument("--rho-seeds", default="random-positive",
                   help="ones | random-positive | seed-file.json")
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("transform", help="apply a layer transformation")
    common(p)
    p.add_argument("--hypnet", required=True, help="input extended-net artifact")
    p.add_argument("--layer", help="net artifact holding the new layer(s)")
    p.add_argument("--layers", type=int, default=1,
                   help="number of synthesized layers when no file is given")
    p.add_argument("--backlund", action="store_true",
                   help="weaker transform with free initial data")
    p.add_argument("--seeds", default="random",
                   help="four comma-separated values or 'random' (with --backlund)")
    p.add_argument("--verify", action="store_true",
                   help="embed a verification report in the artifact")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("verify", help="run every applicable residual sweep")
    common(p, needs_out=False)
    p.add_argument("artifact", help="artifact file to verify")
    p.add_argument("--report", help="also write the report as JSON")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export", help="tessellate and write an OBJ mesh")
    common(p)
    p.add_argument("--hypnet", required=True, help="input extended-net artifact")
    p.add_argument("--resolution", type=int, default=8)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, GenericityError, GeometryError, ValueError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
