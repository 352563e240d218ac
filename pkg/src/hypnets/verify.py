"""Aggregated verification sweeps over artifact objects.

Every theorem-level property of an artifact is evaluated as a residual sweep
and tallied into one record per check: name, number of instances, worst
residual and a pass flag.  Checks that do not apply to the artifact (missing
normals, wrong dimension, no scalars) are reported as skipped rather than
silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .anet import (
    ANet,
    dbkp_residual,
    lelieuvre_residual_max,
    min_quad_volume,
    moutard_residual_max,
    star_coplanarity_max,
)
from .errors import SolverError
from .geometry import Tolerances, coplanarity_residual, menelaus_multiratio
from .hypnet import HyperbolicNet, c1_sweep, quad_at
from .lattice import ScalarField
from .weingarten import (
    ACube,
    WeingartenPair,
    blaschke_center,
    cube_closure_residual,
    equi_twist_sweep,
    normalize_lambda,
    verify_rho_equals_tau,
    weingarten_cube_equations,
)

__all__ = ["CheckResult", "VerificationReport", "verify_object"]


@dataclass
class CheckResult:
    check: str
    count: int
    max_residual: float | None
    passed: bool | None
    note: str = ""

    def to_json(self):
        return {
            "check": self.check,
            "count": self.count,
            "max_residual": self.max_residual,
            "pass": self.passed,
            "note": self.note,
        }


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)

    def add(self, check, count, max_residual, passed, note=""):
        self.checks.append(CheckResult(
            check, int(count),
            None if max_residual is None else float(max_residual),
            None if passed is None else bool(passed), note,
        ))

    def skip(self, check, note):
        self.checks.append(CheckResult(check, 0, None, None, note))

    @property
    def failures(self):
        return [c for c in self.checks if c.passed is False]

    def all_passed(self) -> bool:
        return not self.failures

    def to_json(self):
        return {
            "checks": [c.to_json() for c in self.checks],
            "pass": self.all_passed(),
        }

    def summary(self) -> str:
        lines = []
        for c in self.checks:
            if c.passed is None:
                lines.append(f"  skip {c.check}: {c.note}")
            else:
                verdict = "ok  " if c.passed else "FAIL"
                res = "-" if c.max_residual is None else f"{c.max_residual:.3e}"
                lines.append(f"  {verdict} {c.check}: {c.count} instances, worst {res}")
        verdict = "PASS" if self.all_passed() else "FAIL"
        return "\n".join(lines + [f"verification: {verdict}"])


def _count_faces(net: ANet) -> int:
    return sum(int(np.prod(f.window.shape)) for f in net.moutard.values())


def _net_checks(report: VerificationReport, net: ANet, tol: Tolerances):
    n_vertices = int(np.prod(net.window.shape))
    star = star_coplanarity_max(net)
    report.add("star_planarity", n_vertices, star, star <= tol.incidence_rel)
    vol = min_quad_volume(net)
    report.add("quad_skewness", n_vertices, vol, vol >= tol.genericity_rel,
               note="residual is the smallest normalized volume")
    if net.normals is not None:
        r = lelieuvre_residual_max(net)
        report.add("lelieuvre_edges", n_vertices, r, r <= 1e-10)
    else:
        report.skip("lelieuvre_edges", "no normal field")
    if net.normals is not None and net.moutard:
        r = moutard_residual_max(net)
        report.add("moutard_faces", _count_faces(net), r, r <= 1e-10)
    else:
        report.skip("moutard_faces", "needs normals and coefficients")
    if net.dim == 3:
        w1, w2, w3 = net.window.shape
        worst = 0.0
        count = 0
        for z3 in range(w3 - 1):
            for z2 in range(w2 - 1):
                for z1 in range(w1 - 1):
                    cube = ACube.from_net(net, (z1, z2, z3))
                    worst = max(worst, cube_closure_residual(cube))
                    count += 1
        report.add("cube_closure", count, worst, worst <= 10 * tol.incidence_rel)


def _cross_checks(report: VerificationReport, net: ANet, rho: ScalarField,
                  tol: Tolerances):
    """Cross-level identities on a 2D extended net."""
    n1, n2 = net.window.shape
    worst_cop = 0.0
    worst_men = 0.0
    count = 0
    for z1 in range(n1 - 1):
        for z2 in range(n2 - 1):
            quad = quad_at(net, rho, (z1, z2))
            verts = np.array([quad.edge_vertex(k) for k in range(4)])
            worst_cop = max(worst_cop, coplanarity_residual(verts))
            m = menelaus_multiratio(list(quad.corners), list(verts))
            worst_men = max(worst_men, abs(m - 1.0))
            count += 1
    report.add("cross_coplanarity", count, worst_cop, worst_cop <= tol.incidence_rel)
    report.add("cross_menelaus", count, worst_men, worst_men <= 1e-9,
               note="multiratio against its closed-polygon value")


def _hypnet_checks(report: VerificationReport, hyp: HyperbolicNet, tol: Tolerances):
    net = hyp.surface
    if (1, 2) not in net.moutard:
        report.skip("c1_conditions", "no coefficients on the net")
        return
    sweep = c1_sweep(net, hyp.rho, tol)
    n_pairs = (net.window.shape[0] - 1) * (net.window.shape[1] - 2) + \
              (net.window.shape[0] - 2) * (net.window.shape[1] - 1)
    report.add("c1_geometric", n_pairs, sweep["max_geometric"],
               sweep["max_geometric"] <= tol.incidence_rel)
    report.add("c1_algebraic", n_pairs, sweep["max_algebraic"],
               sweep["max_algebraic"] <= 1e-9)
    report.add("c1_agreement", n_pairs, float(len(sweep["disagreements"])),
               not sweep["disagreements"],
               note="geometric and algebraic verdicts must coincide")
    signs = np.sign(hyp.rho.values)
    one_sign = bool(np.all(signs == signs.flat[0]))
    expected = "hyperbolic" if (one_sign and not sweep["offending"]) else (
        "pre_hyperbolic" if not sweep["offending"] else "invalid")
    report.add("status_consistency", 1, 0.0, hyp.status == expected,
               note=f"declared {hyp.status!r}, recomputed {expected!r}")
    _cross_checks(report, net, hyp.rho, tol)


def _vertical_c1_residual(net: ANet, rho: ScalarField) -> float:
    """Tangency evolution residual on all vertical coordinate planes."""
    w1, w2, w3 = net.window.shape
    r = rho.values
    a13 = net.moutard[(1, 3)].values
    a23 = net.moutard[(2, 3)].values
    worst = 0.0
    for k in range(w3 - 1):
        for z2 in range(w2):
            for z1 in range(w1 - 2):
                prod = a13[z1, z2, k] * a13[z1 + 1, z2, k]
                want = r[z1 + 2, z2, k] * r[z1, z2, k + 1] / (r[z1, z2, k] * prod)
                got = r[z1 + 2, z2, k + 1]
                worst = max(worst, abs(want - got) / max(abs(want), abs(got)))
        for z1 in range(w1):
            for z2 in range(w2 - 2):
                prod = a23[z1, z2, k] * a23[z1, z2 + 1, k]
                want = r[z1, z2 + 2, k] * r[z1, z2, k + 1] / (r[z1, z2, k] * prod)
                got = r[z1, z2 + 2, k + 1]
                worst = max(worst, abs(want - got) / max(abs(want), abs(got)))
    return worst


def _stack_checks(report: VerificationReport, pair: WeingartenPair, tol: Tolerances):
    net = pair.net
    w1, w2, w3 = net.window.shape
    if not net.moutard:
        report.skip("vertical_c1", "no coefficients on the stack")
        return
    v = _vertical_c1_residual(net, pair.rho)
    report.add("vertical_c1", (w3 - 1) * (w1 + w2), v, v <= 1e-9)
    # per-layer tangency sweeps
    worst_geo = worst_alg = 0.0
    for k in range(w3):
        layer = net.layer(k)
        rho_k = ScalarField(layer.window, pair.rho.values[:, :, k]).freeze()
        sweep = c1_sweep(layer, rho_k, tol)
        worst_geo = max(worst_geo, sweep["max_geometric"])
        worst_alg = max(worst_alg, sweep["max_algebraic"])
    report.add("layer_c1_geometric", w3, worst_geo, worst_geo <= tol.incidence_rel)
    report.add("layer_c1_algebraic", w3, worst_alg, worst_alg <= 1e-9)
    # concurrency of centre-joining lines on every cube
    worst_bl = 0.0
    n_cubes = (w1 - 1) * (w2 - 1) * (w3 - 1)
    for z3 in range(w3 - 1):
        for z2 in range(w2 - 1):
            for z1 in range(w1 - 1):
                cube = ACube.from_net(net, (z1, z2, z3))
                block = pair.rho.values[z1:z1 + 2, z2:z2 + 2, z3:z3 + 2]
                _, resid = blaschke_center(cube, block)
                worst_bl = max(worst_bl, resid)
    report.add("blaschke_concurrency", n_cubes, worst_bl, worst_bl <= 1e-9)
    if pair.lambda_ is not None:
        worst_w = 0.0
        for z3 in range(w3 - 1):
            for z2 in range(w2 - 1):
                for z1 in range(w1 - 1):
                    worst_w = max(worst_w, weingarten_cube_equations(
                        net, pair.rho, (z1, z2, z3)))
        report.add("weingarten_equations", n_cubes, worst_w, worst_w <= 1e-9)
        db = dbkp_residual(pair.rho, signs="weingarten")
        report.add("dbkp", int(db.size), float(db.max()), float(db.max()) <= 1e-9)
        try:
            normalized = normalize_lambda(pair)
            rt = verify_rho_equals_tau(normalized)
            report.add("rho_tau_family", _count_faces(net), rt["max_residual"],
                       rt["max_residual"] <= 1e-9, note=f"family {rt['family']}")
        except SolverError as exc:
            report.add("rho_tau_family", _count_faces(net), float("inf"), False,
                       note=str(exc))
    else:
        report.skip("weingarten_equations", "no family factor recorded (weaker transform)")
        report.skip("dbkp", "no family factor recorded (weaker transform)")
        report.skip("rho_tau_family", "no family factor recorded (weaker transform)")
    ok, failing = equi_twist_sweep(net)
    signs = np.sign(pair.rho.values)
    one_sign = bool(np.all(signs == signs.flat[0]))
    if pair.status == "hyperbolic":
        report.add("equi_twist", n_cubes, float(len(failing)), ok and one_sign,
                   note="hyperbolic stacks need equi-twisted cubes and one-sign scalars")
    else:
        report.add("equi_twist", n_cubes, float(len(failing)), True,
                   note=f"informational; {len(failing)} cubes fail the twist check")


def verify_object(obj, tol: Tolerances = Tolerances()) -> VerificationReport:
    """Run every applicable sweep for the artifact object."""
    report = VerificationReport()
    if isinstance(obj, ANet):
        _net_checks(report, obj, tol)
        report.skip("c1_conditions", "plain net carries no cross scalars")
    elif isinstance(obj, HyperbolicNet):
        _net_checks(report, obj.surface, tol)
        _hypnet_checks(report, obj, tol)
    elif isinstance(obj, WeingartenPair):
        _net_checks(report, obj.net, tol)
        _stack_checks(report, obj, tol)
    else:
        raise TypeError(f"cannot verify object of type {type(obj).__name__}")
    return report
