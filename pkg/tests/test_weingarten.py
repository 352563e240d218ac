import numpy as np
import pytest

from hypnets.anet import dbkp_residual, solve_layered_cauchy
from hypnets.errors import GeometryError, SolverError
from hypnets.geometry import Line3
from hypnets.hypnet import CrisscrossedQuad, c1_residual_geometric, cross_from_rho, solve_rho_cauchy
from hypnets.lattice import ScalarField
from hypnets.sampling import random_layered_net, random_positive_rho_seeds, rng_for
from hypnets.weingarten import (
    ACube,
    WeingartenPair,
    _face_centre,
    backlund_transform,
    blaschke_center,
    combine_layers,
    combine_pair,
    complete_blaschke_cube,
    cube_closure_residual,
    equi_twist_cube_check,
    equi_twist_sweep,
    generate_equitwisted_pair,
    horizontal_loop_conditions,
    is_weingarten_cube,
    iterate_weingarten,
    normalize_lambda,
    verify_rho_equals_tau,
    weingarten_centre_residual,
    weingarten_cube_equations,
    weingarten_propagate_algebraic,
    weingarten_propagate_geometric,
    weingarten_transform,
)


def constant_stack(seed, shape, value=1.0, layers=2):
    """Layered net whose (a21, a23, a31) family is constant and positive."""
    from hypnets.errors import GenericityError

    w1, w2 = shape
    for attempt in range(64):
        rng = rng_for(seed, 77, attempt)
        n1 = rng.normal(size=(w1, 3))
        n2 = rng.normal(size=(w2, 3))
        n2[0] = n1[0]
        n3 = rng.normal(size=(layers, 3))
        n3[0] = n1[0]
        try:
            return solve_layered_cauchy(
                n1, n2, n3,
                -value * np.ones((w1 - 1, w2 - 1)),
                -value * np.ones((w1 - 1, layers - 1)),
                value * np.ones((w2 - 1, layers - 1)),
            )
        except GenericityError:
            continue
    raise RuntimeError("no generic constant stack")


def pair_with_rho(seed, shape=(6, 5)):
    net3 = random_layered_net(seed, (shape[0], shape[1], 2))
    bottom = net3.layer(0)
    r1, r2, corner = random_positive_rho_seeds(seed, shape)
    f0 = solve_rho_cauchy(bottom, r1, r2, corner)
    return net3, f0


class TestCompleteBlaschke:
    def test_unit_scalars(self):
        cube = ACube.from_net(constant_stack(1, (2, 2)), (0, 0, 0))
        known = {off: 1.0 for off in np.ndindex(2, 2, 2) if off != (1, 1, 1)}
        midpoint = 0.5 * (cube.corners[0, 1, 1] + cube.corners[1, 1, 1])
        rho = complete_blaschke_cube(cube, known, midpoint)
        assert rho[1, 1, 1] == pytest.approx(1.0)

    def test_homogeneous_scaling(self):
        cube = ACube.from_net(constant_stack(2, (2, 2)), (0, 0, 0))
        rng = rng_for(2, 1)
        base = {off: rng.uniform(0.5, 1.5) for off in np.ndindex(2, 2, 2)
                if off != (1, 1, 1)}
        t = 0.4
        point = (1 - t) * cube.corners[1, 1, 0] + t * cube.corners[1, 1, 1]
        rho_a = complete_blaschke_cube(cube, base, point)
        rho_b = complete_blaschke_cube(
            cube, {k: 3.0 * v for k, v in base.items()}, point
        )
        assert np.allclose(rho_b, 3.0 * rho_a, rtol=1e-12)

    def test_sixth_face_closes_geometrically(self):
        # five faces worth of cross vertices determine the sixth; its four
        # vertices must come out coplanar and match the scalar formula
        from hypnets.geometry import coplanarity_residual

        net = random_layered_net(5, (2, 2, 2))
        cube = ACube.from_net(net, (0, 0, 0))
        rng = rng_for(5, 2)
        rho = rng.uniform(0.5, 1.5, size=(2, 2, 2))
        offs = cube.face_offsets(3, 1)  # top face, covered by the side faces
        verts = []
        for k in range(4):
            a, b = offs[k], offs[(k + 1) % 4]
            verts.append(
                (rho[a] * cube.corners[a] + rho[b] * cube.corners[b])
                / (rho[a] + rho[b])
            )
        assert coplanarity_residual(np.array(verts)) < 1e-10

    def test_point_off_edges_rejected(self):
        cube = ACube.from_net(constant_stack(1, (2, 2)), (0, 0, 0))
        known = {off: 1.0 for off in np.ndindex(2, 2, 2) if off != (1, 1, 1)}
        with pytest.raises(GeometryError):
            complete_blaschke_cube(cube, known, cube.corners.mean(axis=(0, 1, 2)))


class TestBlaschkeCenter:
    def test_unit_scalars_give_centroid(self):
        net = random_layered_net(7, (2, 2, 2))
        cube = ACube.from_net(net, (0, 0, 0))
        p, resid = blaschke_center(cube, np.ones((2, 2, 2)))
        assert np.allclose(p, cube.corners.mean(axis=(0, 1, 2)))
        assert resid < 1e-12

    def test_seeded_concurrency(self):
        rng = rng_for(7, 1)
        for _ in range(50):
            cube = ACube(rng.normal(size=(2, 2, 2, 3)))
            rho = rng.uniform(0.3, 2.0, size=(2, 2, 2))
            _, resid = blaschke_center(cube, rho)
            assert resid < 1e-9

    def test_broken_face_breaks_concurrency(self):
        rng = rng_for(7, 2)
        cube = ACube(rng.normal(size=(2, 2, 2, 3)))
        rho = rng.uniform(0.5, 1.5, size=(2, 2, 2))
        p, _ = blaschke_center(cube, rho)
        # recompute one face centre from scalars that no other face shares
        broken = rho.copy()
        broken[0, 0, 0] *= 1.7
        c0 = _face_centre(cube, broken, 3, 0)
        c1 = _face_centre(cube, rho, 3, 1)
        assert Line3.through(c0, c1).distance_to(p) / cube.scale() > 1e-3


class TestAlgebraicPropagation:
    def test_all_ones(self):
        out = weingarten_propagate_algebraic(1, 1, 1, 1, 1, 1, 1, 1, 1, 1)
        assert out == (1.0, 1.0, 1.0, 0.0)

    def test_consistency_on_evolved_cubes(self):
        rng = rng_for(8, 1)
        for _ in range(100):
            a21, a23, a31 = rng.uniform(0.2, 2.0, size=3)
            denom = a21 * (a23 + a31) - a23 * a31
            if abs(denom) < 1e-3:
                continue
            a23_1 = a23 / denom
            a31_2 = a31 / denom
            rho, rho1, rho2, rho12, gauge = rng.uniform(0.3, 2.0, size=5)
            *_, resid = weingarten_propagate_algebraic(
                rho, rho1, rho2, rho12, gauge, a21, a23, a31, a23_1, a31_2
            )
            assert resid < 1e-12

    def test_gauge_scaling(self):
        rng = rng_for(8, 2)
        args = rng.uniform(0.5, 1.5, size=10)
        r13, r23, r123, _ = weingarten_propagate_algebraic(*args)
        scaled = args.copy()
        scaled[4] *= 2.0
        s13, s23, s123, _ = weingarten_propagate_algebraic(*scaled)
        assert (s13, s23, s123) == pytest.approx((2 * r13, 2 * r23, 2 * r123))


class TestGeometricPropagation:
    def test_equal_coefficients_carry_midpoints_to_midpoints(self):
        net = constant_stack(9, (2, 2), value=0.8)
        cube = ACube.from_net(net, (0, 0, 0))
        bottom = cross_from_rho(CrisscrossedQuad(cube.bottom(), np.ones(4)))
        top = weingarten_propagate_geometric(cube, bottom)
        mids = 0.5 * (cube.top() + np.roll(cube.top(), -1, axis=0))
        assert np.allclose(top.vertices, mids, atol=1e-10 * cube.scale())

    def test_agreement_with_algebraic_path(self):
        for seed in range(5):
            net3, f0 = pair_with_rho(30 + seed, (4, 4))
            pair = weingarten_transform(f0, net3)
            cube = ACube.from_net(net3, (0, 0, 0))
            rv = pair.rho.values
            bottom = cross_from_rho(CrisscrossedQuad(
                cube.bottom(), [rv[0, 0, 0], rv[1, 0, 0], rv[1, 1, 0], rv[0, 1, 0]]
            ))
            top_alg = cross_from_rho(CrisscrossedQuad(
                cube.top(), [rv[0, 0, 1], rv[1, 0, 1], rv[1, 1, 1], rv[0, 1, 1]]
            ))
            top_geo = weingarten_propagate_geometric(cube, bottom)
            dist = np.abs(top_geo.vertices - top_alg.vertices).max()
            assert dist < 1e-9 * cube.scale()
            assert is_weingarten_cube(cube, bottom, top_geo) < 1e-9
            assert weingarten_centre_residual(cube, bottom, top_geo) < 1e-9

    def test_unrelated_cross_fails(self):
        net3, f0 = pair_with_rho(40, (4, 4))
        cube = ACube.from_net(net3, (0, 0, 0))
        rv = f0.rho.values
        bottom = cross_from_rho(CrisscrossedQuad(
            cube.bottom(), [rv[0, 0], rv[1, 0], rv[1, 1], rv[0, 1]]
        ))
        rng = rng_for(40, 3)
        stray = cross_from_rho(CrisscrossedQuad(cube.top(), rng.uniform(0.5, 1.5, 4)))
        assert is_weingarten_cube(cube, bottom, stray) > 1e-3


class TestCubeClosure:
    def test_solved_cubes_close(self):
        net = random_layered_net(10, (3, 3, 2))
        for anchor in ((0, 0, 0), (1, 1, 0)):
            assert cube_closure_residual(ACube.from_net(net, anchor)) < 1e-10

    def test_perturbed_corner_detected(self):
        net = random_layered_net(10, (2, 2, 2))
        cube = ACube.from_net(net, (0, 0, 0))
        corners = cube.corners.copy()
        corners[1, 1, 1] += 0.05 * cube.scale()
        assert cube_closure_residual(ACube(corners)) > 1e-3


class TestBacklund:
    def test_constant_fixed_point(self):
        net = constant_stack(11, (5, 5))
        bottom = net.layer(0)
        f0 = solve_rho_cauchy(bottom, np.ones(5), np.ones(5), 1.0)
        tilde = backlund_transform(f0, net, np.ones(4))
        assert np.allclose(tilde.rho.values, 1.0)
        assert tilde.status == "hyperbolic"

    def test_seed_scaling(self):
        net3, f0 = pair_with_rho(12, (5, 5))
        rng = rng_for(12, 4)
        seeds = rng.uniform(0.5, 1.5, size=4)
        a = backlund_transform(f0, net3, seeds)
        b = backlund_transform(f0, net3, 2.0 * seeds)
        assert np.allclose(b.rho.values, 2.0 * a.rho.values, rtol=1e-12)

    def test_new_layer_satisfies_own_plane_tangency(self):
        for seed in range(3):
            net3, f0 = pair_with_rho(60 + seed, (6, 5))
            rng = rng_for(seed, 5)
            tilde = backlund_transform(f0, net3, rng.uniform(0.5, 1.5, size=4))
            assert tilde.status in ("hyperbolic", "pre_hyperbolic")
            assert not tilde.offending


class TestWeingartenTransform:
    def test_constant_pair_is_fixed_point(self):
        net = constant_stack(13, (5, 4))
        bottom = net.layer(0)
        f0 = solve_rho_cauchy(bottom, np.ones(5), np.ones(4), 1.0)
        pair = weingarten_transform(f0, net)
        assert np.allclose(pair.rho.values[:, :, 1], f0.rho.values, rtol=1e-12)
        norm = normalize_lambda(pair)
        assert norm.lambda_ == 1.0
        assert verify_rho_equals_tau(norm)["max_residual"] < 1e-12

    def test_every_cube_passes(self):
        net3, f0 = pair_with_rho(14, (6, 5))
        pair = weingarten_transform(f0, net3)
        assert pair.status in ("hyperbolic", "pre_hyperbolic")
        w1, w2, _ = net3.window.shape
        for z1 in range(w1 - 1):
            for z2 in range(w2 - 1):
                assert weingarten_cube_equations(net3, pair.rho, (z1, z2, 0)) < 1e-9

    def test_matches_backlund_with_copied_seeds(self):
        net3, f0 = pair_with_rho(15, (6, 5))
        pair = weingarten_transform(f0, net3)
        rv = pair.rho.values
        seeds = [rv[0, 0, 1], rv[1, 0, 1], rv[0, 1, 1], rv[1, 1, 1]]
        tilde = backlund_transform(f0, net3, seeds)
        assert np.allclose(tilde.rho.values, rv[:, :, 1], rtol=1e-12)

    def test_initial_cube_choice_is_irrelevant(self):
        net3, f0 = pair_with_rho(16, (6, 5))
        a = weingarten_transform(f0, net3, initial_cell=(0, 0))
        b = weingarten_transform(f0, net3, initial_cell=(2, 1))
        ra, rb = a.rho.values[:, :, 1], b.rho.values[:, :, 1]
        scale = ra[0, 0] / rb[0, 0]
        assert np.allclose(ra, scale * rb, rtol=1e-10)


class TestNormalizeLambda:
    def test_prescaled_normals_same_lambda(self):
        net3, f0 = pair_with_rho(17, (5, 4))
        pair = weingarten_transform(f0, net3)
        lam = normalize_lambda(pair).lambda_
        from hypnets.anet import ANet, bw_rescale, recompute_moutard

        rescaled = bw_rescale(net3.normals, 2.0)
        net_scaled = ANet(net3.vertices, rescaled, recompute_moutard(rescaled))
        pair_scaled = WeingartenPair(net_scaled, pair.rho, None, pair.status)
        assert normalize_lambda(pair_scaled).lambda_ == lam

    def test_seeded_residual_small(self):
        for seed in range(3):
            net3, f0 = pair_with_rho(70 + seed, (5, 5))
            pair = weingarten_transform(f0, net3)
            norm = normalize_lambda(pair)
            assert norm.lambda_ in (1.0, -1.0)
            assert verify_rho_equals_tau(norm)["max_residual"] < 1e-9

    def test_backlund_pair_detected(self):
        net3, f0 = pair_with_rho(18, (5, 4))
        rng = rng_for(18, 6)
        tilde = backlund_transform(f0, net3, rng.uniform(0.5, 1.5, 4))
        bpair = combine_pair(net3, f0.rho, tilde.rho.values)
        with pytest.raises(SolverError):
            normalize_lambda(bpair)
        loose = normalize_lambda(bpair, check=False)
        assert verify_rho_equals_tau(loose)["max_residual"] > 1e-3


class TestEquiTwist:
    def test_trivial_cases(self):
        assert equi_twist_cube_check(1, 1, 1, 1, 1)
        assert not equi_twist_cube_check(1, -1, 1, 1, 1)
        with pytest.raises(ValueError):
            equi_twist_cube_check(0, 1, 1, 1, 1)

    def test_no_third_loop_on_sampled_tuples(self):
        rng = rng_for(19, 1)
        passed = 0
        while passed < 2000:
            a21, a23, a31 = rng.uniform(0.1, 2.0, size=3) * rng.choice([-1, 1], 3)
            denom = a21 * (a23 + a31) - a23 * a31
            if abs(denom) < 1e-6:
                continue
            a23_1, a31_2 = a23 / denom, a31 / denom
            if not equi_twist_cube_check(a21, a23, a31, a23_1, a31_2):
                continue
            passed += 1
            assert not horizontal_loop_conditions(a23, a31, a23_1)

    def test_vertical_face_crosses_fail_tangency(self):
        # crosses on the four vertical faces of a transform cube never close
        # a third tangency loop
        net3, f0 = pair_with_rho(20, (4, 4))
        pair = weingarten_transform(f0, net3)
        rv = pair.rho.values
        cube = ACube.from_net(net3, (1, 1, 0))

        def face_quad(axis, side):
            offs = cube.face_offsets(axis, side)
            corners = cube.face(axis, side)
            rho = [rv[1 + o[0], 1 + o[1], o[2]] for o in offs]
            return CrisscrossedQuad(corners, rho)

        front = face_quad(2, 0)
        right = face_quad(1, 1)
        assert c1_residual_geometric(front, right) > 1e-4


class TestGenerateEquiTwisted:
    def test_constant_potential(self):
        data = generate_equitwisted_pair(
            21, (5, 5), phi_axis1=np.ones(5), phi_axis2=np.ones(5),
            a_policy=lambda cell, bound: 1.0,
        )
        assert np.allclose(data.phi.phi, 1.0)
        assert np.allclose(data.a, 1.0)
        assert np.allclose(data.a3, 1.0)
        assert np.allclose(data.a23, 1.0)
        assert np.allclose(data.a31, 1.0)
        ok, _ = equi_twist_sweep(data.net)
        assert ok

    def test_boundary_policy_rejected(self):
        with pytest.raises(ValueError):
            generate_equitwisted_pair(
                22, (4, 4), a_policy=lambda cell, bound: bound
            )

    def test_seeded_windows_all_positive(self):
        data = generate_equitwisted_pair(23, (8, 8))
        assert (data.phi.phi > 0).all()
        assert (data.a > 0).all() and (data.a3 > 0).all()
        assert (data.a23 > 0).all() and (data.a31 > 0).all()
        ok, failing = equi_twist_sweep(data.net)
        assert ok and not failing


class TestIterate:
    def test_constant_stack(self):
        net = constant_stack(24, (4, 4), layers=4)
        bottom = net.layer(0)
        f0 = solve_rho_cauchy(bottom, np.ones(4), np.ones(4), 1.0)
        rho3, report = iterate_weingarten(f0, net)
        assert np.allclose(rho3.values, 1.0)
        assert report["dbkp_max"] < 1e-14
        assert report["one_sign"]

    def test_jittered_equitwisted_stack_stays_positive(self):
        rng = rng_for(25, 1)
        w = 5
        n1 = rng.normal(size=(w, 3))
        n2 = rng.normal(size=(w, 3))
        n2[0] = n1[0]
        n3 = rng.normal(size=(3, 3))
        n3[0] = n1[0]
        jitter = lambda shape: 1.0 + 0.05 * rng.uniform(-1, 1, size=shape)
        net = solve_layered_cauchy(
            n1, n2, n3, -jitter((w - 1, w - 1)), -jitter((w - 1, 2)), jitter((w - 1, 2))
        )
        ok, _ = equi_twist_sweep(net)
        assert ok
        r1, r2, corner = random_positive_rho_seeds(25, (w, w))
        f0 = solve_rho_cauchy(net.layer(0), r1, r2, corner)
        rho3, report = iterate_weingarten(f0, net)
        assert report["dbkp_max"] < 1e-9
        assert report["one_sign"]
        assert (rho3.values > 0).all()

    def test_generic_stack_mixed_signs_but_dbkp_holds(self):
        net = random_layered_net(26, (6, 6, 3))
        r1, r2, corner = random_positive_rho_seeds(26, (6, 6))
        f0 = solve_rho_cauchy(net.layer(0), r1, r2, corner)
        rho3, report = iterate_weingarten(f0, net)
        assert report["dbkp_max"] < 1e-9
        assert not report["one_sign"]


class TestTransitivity:
    def test_three_quads_sharing_an_edge(self):
        # two coplanar-layer quads plus the vertical quad between them all
        # share the edge from (1,0) to (1,1) in the bottom layer
        net3, f0 = pair_with_rho(27, (4, 4))
        pair = weingarten_transform(f0, net3)
        rv = pair.rho.values
        xv = net3.vertices.values

        def bottom_quad(c1, c2):
            corners = [xv[c1, c2, 0], xv[c1 + 1, c2, 0],
                       xv[c1 + 1, c2 + 1, 0], xv[c1, c2 + 1, 0]]
            rho = [rv[c1, c2, 0], rv[c1 + 1, c2, 0],
                   rv[c1 + 1, c2 + 1, 0], rv[c1, c2 + 1, 0]]
            return CrisscrossedQuad(np.array(corners), rho)

        vert_corners = [xv[1, 0, 0], xv[1, 1, 0], xv[1, 1, 1], xv[1, 0, 1]]
        vert_rho = [rv[1, 0, 0], rv[1, 1, 0], rv[1, 1, 1], rv[1, 0, 1]]
        q1 = bottom_quad(0, 0)
        q2 = CrisscrossedQuad(np.array(vert_corners), vert_rho)
        q3 = bottom_quad(1, 0)
        assert c1_residual_geometric(q1, q2) < 1e-9
        assert c1_residual_geometric(q2, q3) < 1e-9
        assert c1_residual_geometric(q1, q3) < 1e-9


class TestCombineLayers:
    def test_roundtrip_from_solved_stack(self):
        net3 = random_layered_net(28, (5, 4, 2))
        base = net3.layer(0)
        tilde = net3.layer(1)
        rebuilt = combine_layers(base, tilde)
        assert rebuilt.window.shape == (5, 4, 2)
        # coefficients agree with the original stack up to the normal gauge:
        # compare the gauge-invariant vertical products
        a13o = net3.moutard[(1, 3)].values
        a13r = rebuilt.moutard[(1, 3)].values
        po = a13o[:-1, :, 0] * a13o[1:, :, 0]
        pr = a13r[:-1, :, 0] * a13r[1:, :, 0]
        assert np.allclose(po, pr, rtol=1e-8)

    def test_unrelated_layer_rejected(self):
        net3 = random_layered_net(29, (4, 4, 2))
        base = net3.layer(0)
        other = random_layered_net(30, (4, 4, 2)).layer(1)
        with pytest.raises((SolverError, GeometryError)):
            combine_layers(base, other)
