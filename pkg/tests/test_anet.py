import numpy as np
import pytest

from hypnets.anet import (
    ANet,
    bw_rescale,
    dbkp_residual,
    evolve_cube_lex,
    evolve_moutard_cube,
    lelieuvre_integrate,
    lelieuvre_residual_max,
    min_quad_volume,
    moutard_coefficient_variant,
    moutard_residual_max,
    moutard_step,
    parallel_invariants,
    recompute_moutard,
    solve_layered_cauchy,
    solve_surface_cauchy,
    solve_two_layer_cauchy,
    star_coplanarity_max,
    tau_defining_residual,
    tau_potential,
)
from hypnets.errors import GenericityError, SolverError
from hypnets.lattice import VectorField, Window
from hypnets.sampling import random_layered_net, random_surface, rng_for


class TestMoutardStep:
    def test_direct_substitution(self):
        out = moutard_step((1, 0, 0), (0, 1, 0), (0, 0, 1), 2.0)
        assert np.allclose(out, (1, -2, 2))

    def test_zero_coefficient(self):
        n = np.array([0.3, -0.1, 2.0])
        assert np.allclose(moutard_step(n, (1, 1, 1), (2, 2, 2), 0.0), n)

    def test_equal_neighbours(self):
        n = np.array([1.0, 2.0, 3.0])
        nb = np.array([0.5, 0.5, 0.5])
        assert np.allclose(moutard_step(n, nb, nb, 17.3), n)


def test_coefficient_variants():
    assert moutard_coefficient_variant(2.0, "canonical") == 2.0
    assert moutard_coefficient_variant(2.0, "sign-flipped") == -2.0
    assert moutard_coefficient_variant(2.0, "reciprocal") == 0.5
    assert moutard_coefficient_variant(2.0, "sign-flipped-reciprocal") == -0.5


class TestLelieuvre:
    def test_single_edge_cross_product(self):
        w = Window.from_shape(2, 1)
        normals = VectorField(w, [[0, 0, 1], [1, 0, 0]])
        verts = lelieuvre_integrate(normals.freeze(), (0, 0, 0))
        assert np.allclose(verts.get((1, 0)), (0, -1, 0))

    def test_constant_normals_degenerate(self):
        w = Window.from_shape(3, 3)
        normals = VectorField.full(w, (0, 0, 1.0)).freeze()
        with pytest.raises(GenericityError):
            lelieuvre_integrate(normals, (0, 0, 0))

    def test_non_moutard_normals_fail_closure(self):
        rng = rng_for(5, 99)
        w = Window.from_shape(3, 3)
        normals = VectorField(w, rng.normal(size=(3, 3, 3))).freeze()
        with pytest.raises(SolverError):
            lelieuvre_integrate(normals, (0, 0, 0))

    def test_path_independence_on_solved_net(self):
        net = random_surface(11, (7, 6))
        # integrating the transposed field walks the lattice in the other
        # order; closure makes the result the transposed vertex field
        normals_t = VectorField(
            Window.from_shape(6, 7), net.normals.values.transpose(1, 0, 2)
        ).freeze()
        verts_t = lelieuvre_integrate(normals_t, (0, 0, 0))
        flipped = verts_t.values.transpose(1, 0, 2)
        direct = net.vertices.values - net.vertices.values[0:1, 0:1]
        assert np.allclose(flipped, direct, atol=1e-12 * max(1, np.abs(direct).max()))


class TestSurfaceCauchy:
    def test_residuals_near_machine_eps(self, surface_6x5):
        assert star_coplanarity_max(surface_6x5) < 1e-12
        assert lelieuvre_residual_max(surface_6x5) < 1e-12
        assert moutard_residual_max(surface_6x5) < 1e-12

    def test_single_quad_matches_step(self):
        rng = rng_for(1, 2)
        n1 = rng.normal(size=(2, 3))
        n2 = rng.normal(size=(2, 3))
        n2[0] = n1[0]
        a = rng.uniform(0.5, 1.5, size=(1, 1))
        net = solve_surface_cauchy(n1, n2, a)
        want = moutard_step(n1[0], n1[1], n2[1], a[0, 0])
        assert np.allclose(net.normals.get((1, 1)), want)

    def test_zero_coefficient_rejected(self):
        rng = rng_for(1, 3)
        n1 = rng.normal(size=(3, 3))
        n2 = rng.normal(size=(3, 3))
        n2[0] = n1[0]
        a = rng.uniform(0.5, 1.5, size=(2, 2))
        a[1, 1] = 0.0
        with pytest.raises(GenericityError):
            solve_surface_cauchy(n1, n2, a)

    def test_axis_mismatch_rejected(self):
        rng = rng_for(1, 4)
        n1 = rng.normal(size=(3, 3))
        n2 = rng.normal(size=(3, 3))
        with pytest.raises(ValueError):
            solve_surface_cauchy(n1, n2, np.ones((2, 2)))


class TestBwRescale:
    def test_identity(self, surface_6x5):
        out = bw_rescale(surface_6x5.normals, 1.0)
        assert np.array_equal(out.values, surface_6x5.normals.values)

    def test_inverse_composition(self, surface_6x5):
        out = bw_rescale(bw_rescale(surface_6x5.normals, 2.0), 0.5)
        assert np.allclose(out.values, surface_6x5.normals.values, rtol=1e-15)

    def test_vertices_unchanged(self, surface_6x5):
        for alpha in (2.0, -0.7, 13.0):
            rescaled = bw_rescale(surface_6x5.normals, alpha)
            verts = lelieuvre_integrate(rescaled, (0, 0, 0))
            base = surface_6x5.vertices.values - surface_6x5.vertices.values[0:1, 0:1]
            scale = np.abs(base).max()
            assert np.allclose(verts.values, base, atol=1e-12 * scale)

    def test_zero_alpha_rejected(self, surface_6x5):
        with pytest.raises(ValueError):
            bw_rescale(surface_6x5.normals, 0.0)


class TestParallelInvariants:
    def test_constant_coefficients(self):
        rng = rng_for(2, 1)
        n1 = rng.normal(size=(4, 3))
        n2 = rng.normal(size=(4, 3))
        n2[0] = n1[0]
        net = solve_surface_cauchy(n1, n2, np.full((3, 3), 0.8))
        inv = parallel_invariants(net)
        assert np.allclose(inv[1], 0.64)
        assert np.allclose(inv[2], 0.64)

    def test_invariant_under_rescale(self, surface_6x5):
        inv = parallel_invariants(surface_6x5)
        for alpha in (2.3, -1.7, 0.2):
            rescaled = bw_rescale(surface_6x5.normals, alpha)
            net2 = ANet(surface_6x5.vertices, rescaled, recompute_moutard(rescaled))
            inv2 = parallel_invariants(net2)
            for d in (1, 2):
                assert np.allclose(inv[d], inv2[d], rtol=1e-12)

    def test_matches_geometric_ratio_product(self, surface_6x5):
        from hypnets.hypnet import geometric_parallel_invariant

        inv = parallel_invariants(surface_6x5)
        for cell in ((0, 0), (1, 2), (3, 1)):
            assert geometric_parallel_invariant(surface_6x5, cell, 1) == pytest.approx(
                inv[1][cell], rel=1e-10
            )
            assert geometric_parallel_invariant(surface_6x5, cell, 2) == pytest.approx(
                inv[2][cell], rel=1e-10
            )


class TestCubeEvolution:
    def test_all_ones_cyclic_family(self):
        a12_3, a23_1, a31_2, denom = evolve_moutard_cube(1.0, 1.0, 1.0)
        assert denom == pytest.approx(-3.0)
        assert a12_3 == pytest.approx(-1.0 / 3.0)
        assert a23_1 == pytest.approx(-1.0 / 3.0)
        assert a31_2 == pytest.approx(-1.0 / 3.0)

    def test_all_ones_weingarten_orientation(self):
        # a21 = a23 = a31 = 1 means cyclic input (-1, 1, 1)
        a12_3, a23_1, a31_2, denom = evolve_moutard_cube(-1.0, 1.0, 1.0)
        assert denom == pytest.approx(1.0)
        assert (-a12_3, a23_1, a31_2) == (1.0, 1.0, 1.0)

    def test_equal_opposite_ratios(self):
        rng = rng_for(3, 1)
        for _ in range(100):
            a12, a23, a31 = rng.uniform(0.1, 2.0, size=3) * rng.choice([-1, 1], size=3)
            try:
                s12, s23, s31, denom = evolve_moutard_cube(a12, a23, a31)
            except SolverError:
                continue
            r = a12 / s12
            assert a23 / s23 == pytest.approx(r, rel=1e-12)
            assert a31 / s31 == pytest.approx(r, rel=1e-12)
            assert r == pytest.approx(denom, rel=1e-12)

    def test_lex_and_cyclic_agree(self):
        rng = rng_for(3, 2)
        a12, a13, a23 = rng.uniform(0.2, 1.5, size=3)
        lex = evolve_cube_lex(a12, a13, a23)
        cyc = evolve_moutard_cube(a12, a23, -a13)
        assert lex[0] == pytest.approx(cyc[0])  # a12_3
        assert lex[1] == pytest.approx(-cyc[2])  # a13_2 = -a31_2
        assert lex[2] == pytest.approx(cyc[1])  # a23_1

    def test_singular_cube(self):
        with pytest.raises(SolverError):
            evolve_moutard_cube(1.0, 1.0, -0.5)  # 1*1 + 1*(-1/2) + (-1/2)*1 = 0


class TestLayeredCauchy:
    def test_constant_weingarten_seeds_are_fixed_point(self):
        rng = rng_for(4, 1)
        n1 = rng.normal(size=(4, 3))
        n2 = rng.normal(size=(4, 3))
        n2[0] = n1[0]
        n3 = rng.normal(size=(3, 3))
        n3[0] = n1[0]
        net = solve_layered_cauchy(
            n1, n2, n3, -np.ones((3, 3)), -np.ones((3, 2)), np.ones((3, 2))
        )
        assert np.allclose(net.moutard[(1, 2)].values, -1.0)
        assert np.allclose(net.moutard[(1, 3)].values, -1.0)
        assert np.allclose(net.moutard[(2, 3)].values, 1.0)

    def test_two_by_two_reproduces_single_cube(self):
        rng = rng_for(4, 2)
        n1 = rng.normal(size=(2, 3))
        n2 = rng.normal(size=(2, 3))
        n2[0] = n1[0]
        n3 = rng.normal(size=(2, 3))
        n3[0] = n1[0]
        a12, a13, a23 = rng.uniform(0.5, 1.5, size=3)
        net = solve_two_layer_cauchy(
            n1, n2, n3, np.array([[a12]]), np.array([a13]), np.array([a23])
        )
        s12, s13, s23, _ = evolve_cube_lex(a12, a13, a23)
        assert net.moutard[(1, 2)].values[0, 0, 1] == pytest.approx(s12)
        assert net.moutard[(1, 3)].values[0, 1, 0] == pytest.approx(s13)
        assert net.moutard[(2, 3)].values[1, 0, 0] == pytest.approx(s23)

    def test_seeded_net_invariants(self):
        net = random_layered_net(6, (6, 6, 2))
        assert star_coplanarity_max(net) < 1e-9
        assert lelieuvre_residual_max(net) < 1e-10
        assert moutard_residual_max(net) < 1e-10
        assert min_quad_volume(net) > 1e-7


class TestTauPotential:
    def test_ones_fixed_point(self):
        rng = rng_for(5, 1)
        n1 = rng.normal(size=(4, 3))
        n2 = rng.normal(size=(4, 3))
        n2[0] = n1[0]
        n3 = rng.normal(size=(2, 3))
        n3[0] = n1[0]
        net = solve_layered_cauchy(
            n1, n2, n3, -np.ones((3, 3)), -np.ones((3, 1)), np.ones((3, 1))
        )
        tf = tau_potential(net, family="weingarten")
        assert np.allclose(tf.tau.values, 1.0)

    def test_axis_gauge_leaves_coefficients(self, layered_6x5x2):
        tf = tau_potential(layered_6x5x2, family="weingarten")
        rng = rng_for(5, 2)
        seeds = [
            rng.uniform(0.5, 1.5, size=s) for s in layered_6x5x2.window.shape
        ]
        for s in seeds[1:]:
            s[0] = seeds[0][0]
        tf2 = tau_potential(layered_6x5x2, family="weingarten", axis_seeds=seeds)
        # different potential, same coefficients
        assert not np.allclose(tf.tau.values, tf2.tau.values)
        assert tau_defining_residual(layered_6x5x2, tf2) < 1e-10

    def test_roundtrip_residual(self, layered_6x5x2):
        for family in ("weingarten", "lexicographic"):
            tf = tau_potential(layered_6x5x2, family=family)
            assert tau_defining_residual(layered_6x5x2, tf) < 1e-10


class TestDbkp:
    def test_constant_tau_weingarten_signs(self):
        vals = np.ones((3, 3, 3))
        assert dbkp_residual(vals, signs="weingarten").max() == 0.0

    def test_constant_tau_lexicographic_signs(self):
        vals = np.ones((3, 3, 3))
        assert dbkp_residual(vals, signs="lexicographic").max() == 0.0

    def test_potential_of_solved_net(self, layered_6x5x2):
        for family in ("weingarten", "lexicographic"):
            tf = tau_potential(layered_6x5x2, family=family)
            assert dbkp_residual(tf, signs=family).max() < 1e-10

    def test_wrong_signs_fail(self, layered_6x5x2):
        tf = tau_potential(layered_6x5x2, family="weingarten")
        assert dbkp_residual(tf, signs="lexicographic").max() > 1e-2

    def test_explicit_kappa_fields(self, layered_6x5x2):
        tf = tau_potential(layered_6x5x2, family="weingarten")
        shape = tuple(s - 1 for s in layered_6x5x2.window.shape)
        kappa = (-np.ones(shape), -np.ones(shape), np.ones(shape))
        assert dbkp_residual(tf, signs=kappa).max() < 1e-10

    def test_needs_3d_window(self):
        with pytest.raises(ValueError):
            dbkp_residual(np.ones((3, 3)), signs="weingarten")
