import math

import numpy as np
import pytest
from scipy import special

from fracgraph.fraccalc import End, GridFunction, graded_grid
from fracgraph.graphmodel import Edge, build_star
from fracgraph.eigensolver import (ConstraintError, EdgeParams, SpectralParams, assemble_constraints,
                                   build_solution, chain_values, residual_eq1, residual_eq2,
                                   verify_theorem2, volterra_solve, volterra_sweep, weights_from_b)


def one_edge(alpha, k, b, c, length=1.0):
    return Edge("1", length, "u", "v"), SpectralParams(alpha, {"1": EdgeParams(k, b, c)}, k)


# (alpha, k, b, c, length, s, value): the closed form summed term by term at 30 digits
SOL_ORACLE = [
    (0.5, 1.0, 1.0, 1.0, 1.0, 0.1, 7.2047843555653418),
    (0.5, 1.0, 1.0, 1.0, 1.0, 0.5, 4.4374837264262222),
    (0.5, 1.0, 1.0, 1.0, 1.0, 0.9, 3.3860425771528964),
    (0.5, 0.7071067811865476, 1.4142135623730951, 1.4142135623730951, 2.0, 0.2, 7.2047843555653418),
    (0.5, 0.7071067811865476, 1.4142135623730951, 1.4142135623730951, 2.0, 1.0, 4.4374837264262222),
    (0.5, 0.7071067811865476, 1.4142135623730951, 1.4142135623730951, 2.0, 1.8, 3.3860425771528964),
    (0.3, 2.0, -1.0, 0.5, 1.0, 0.1, 70486.957742287932),
    (0.3, 2.0, -1.0, 0.5, 1.0, 0.5, 1251.4514161166966),
    (0.3, 2.0, -1.0, 0.5, 1.0, 0.9, 23.289811133636725),
]


def value_at(phi, s):
    i = int(np.argmin(np.abs(phi.grid.nodes - s)))
    assert phi.grid.nodes[i] == pytest.approx(s, abs=1e-14)
    return phi.values[i]


@pytest.mark.parametrize("alpha,k,b,c,length,s,expected", SOL_ORACLE)
def test_closed_form_matches_oracle(alpha, k, b, c, length, s, expected):
    edge, params = one_edge(alpha, k, b, c, length)
    phi = build_solution(edge, params, n=10, grading=1.0)
    assert value_at(phi, s) == pytest.approx(expected, rel=1e-9)


class TestAssemble:
    def test_symmetric_star(self, star3):
        p = assemble_constraints(star3, 1.0, 1.0, 1.0)
        assert all(p[e] == EdgeParams(1.0, 1.0, 1.0) for e in "123")
        assert p.residuals["flux_sum"] == pytest.approx(3.0)
        assert not p.consistent

    def test_weights_rescale_b(self):
        g = build_star(3, [1.0, 1.0, 1.0], [1.0, 1.0, -0.5])
        p = assemble_constraints(g, 1.0, 1.0, 1.0)
        assert [p[e].b for e in "123"] == pytest.approx([1.0, 1.0, -2.0])
        # sum b_j / w_j = 1 + 1 + 4
        assert p.residuals["flux_sum"] == pytest.approx(6.0)

    def test_length_scaling_of_k(self, star124):
        p = assemble_constraints(star124, 2.0, 0.0, 1.0)
        assert [p[e].k for e in "123"] == pytest.approx([2.0, 2 / math.sqrt(2), 1.0])
        assert p.consistent

    def test_chains_are_exact(self, tree):
        g = build_star(4, [0.5, 1.0, 1.7, 3.0], [1.0, -2.0, 0.3, 1.1], 0.35)
        p = assemble_constraints(g, 1.3, 0.4, -0.8)
        for v in chain_values(g, p).values():
            assert np.ptp(v) <= 1e-13 * np.max(np.abs(v))

    def test_zero_k_rejected(self, star3):
        with pytest.raises(ValueError):
            assemble_constraints(star3, 0.0, 1.0, 1.0)

    def test_strict_raises_with_residuals(self, star3):
        with pytest.raises(ConstraintError) as info:
            assemble_constraints(star3, 1.0, 1.0, 1.0, strict=True)
        assert info.value.residuals["flux_sum"] == pytest.approx(3.0)

    def test_strict_accepts_b_zero(self, star124):
        assert assemble_constraints(star124, 1.0, 0.0, 1.0, strict=True).consistent

    def test_non_star_rejected(self, tree):
        with pytest.raises(ValueError):
            assemble_constraints(tree, 1.0, 0.0, 1.0)

    def test_weights_from_b_round_trip(self):
        lengths, b, a = [1.0, 2.0, 4.0], [1.0, 1.0, -2.0], 0.5
        w = weights_from_b(lengths, b, a)
        p = assemble_constraints(build_star(3, lengths, w, a), 1.0, 1.0, 1.0)
        assert [p[e].b for e in "123"] == pytest.approx(b)


class TestBuildSolution:
    def test_zero_data(self):
        edge, params = one_edge(0.5, 1.0, 0.0, 0.0)
        phi = build_solution(edge, params, n=64)
        assert np.all(phi.values == 0)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
    def test_pure_power_without_k(self, alpha):
        edge, params = one_edge(alpha, 0.0, 0.0, 1.0)
        phi = build_solution(edge, params, n=64)
        tau = 1.0 - phi.grid.nodes[:-1]
        np.testing.assert_allclose(phi.values[:-1], tau ** (alpha - 1) / special.gamma(alpha), rtol=1e-13)

    def test_singular_end_is_symbolic(self):
        edge, params = one_edge(0.5, 1.0, 1.0, 2.0)
        phi = build_solution(edge, params, n=64)
        assert phi.has_singular_terms
        assert np.all(np.isfinite(phi.regular))
        assert phi.singular_coefficient(End.AT_L) == pytest.approx(2.0 / special.gamma(0.5))

    @pytest.mark.parametrize("alpha,k,b", [(0.5, 1.0, 1.0), (0.3, -2.0, 0.7), (0.7, 0.5, -1.0)])
    def test_quadrature_agrees(self, alpha, k, b):
        edge, params = one_edge(alpha, k, b, 0.0)
        g = graded_grid(1.0, 128, 2.0)
        closed = build_solution(edge, params, grid=g)
        quad = build_solution(edge, params, grid=g, method="quadrature")
        scale = np.max(np.abs(closed.values))
        assert np.max(np.abs(closed.values - quad.values)) < 1e-4 * scale

    def test_unknown_method(self):
        edge, params = one_edge(0.5, 1.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            build_solution(edge, params, n=16, method="spline")

    def test_edge_independent_profile(self, star124):
        # w_j phi_j(l_j sigma) does not depend on j once the chains hold
        p = assemble_constraints(star124, 1.2, 0.6, 0.9)
        sigma = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
        profiles = []
        for e, inc in zip(star124.edges, star124.condition("v0").incidences):
            g = graded_grid(e.length, 10, 1.0)
            phi = build_solution(e, p, grid=g)
            profiles.append(inc.weight * phi.values[[1, 3, 5, 7, 9]])
            np.testing.assert_allclose(g.nodes[[1, 3, 5, 7, 9]], e.length * sigma)
        for prof in profiles[1:]:
            np.testing.assert_allclose(prof, profiles[0], rtol=1e-12)


class TestRightSidedEquation:
    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
    def test_residual_converges(self, alpha):
        edge, params = one_edge(alpha, 1.0, 1.0, 1.0)
        r = [residual_eq2(edge, build_solution(edge, params, n), params) for n in (256, 1024)]
        assert r[1] < 1e-2
        assert np.log2(r[0] / r[1]) / 2 > 0.8

    def test_detects_wrong_k(self):
        edge, params = one_edge(0.5, 1.0, 1.0, 1.0)
        phi = build_solution(edge, params, 1024)
        good = residual_eq2(edge, phi, params)
        assert residual_eq2(edge, phi, params, k=1.1) > 100 * good

    def test_full_equation_is_not_satisfied(self):
        # the left-sided part of the operator is not cancelled by this profile
        edge, params = one_edge(0.5, 1.0, 1.0, 1.0)
        phi = build_solution(edge, params, 1024)
        assert residual_eq1(edge, phi, params) > 1.0


class TestVolterra:
    def test_zero_is_fixed(self):
        edge, params = one_edge(0.5, 1.0, 0.0, 0.0)
        res = volterra_solve(edge, params, sweeps=3, n=64)
        assert res.converged and res.sweeps == 1
        assert np.all(res.solution.values == 0)

    def test_first_sweep_contracts_from_perturbed_start(self):
        edge, params = one_edge(0.5, 1.0, 0.0, 1.0)
        base = build_solution(edge, params, 512)
        bump = GridFunction.sample(base.grid, lambda x: 0.05 * np.sin(np.pi * x) ** 2)
        res = volterra_solve(edge, params, sweeps=2, start=base + bump)
        assert len(res.changes) == 2
        assert res.changes[1] < res.changes[0]
        assert not math.isnan(res.contraction_ratio)

    def test_divergence_is_reported(self):
        edge, params = one_edge(0.5, 1.0, 1.0, 1.0)
        res = volterra_solve(edge, params, sweeps=5, n=256)
        assert not res.converged
        assert "diverged" in res.message or "no convergence" in res.message

    def test_sweep_on_smooth_input(self):
        edge, params = one_edge(0.5, 0.0, 0.0, 0.0)
        g = graded_grid(1.0, 256)
        phi = GridFunction.sample(g, lambda x: x**2 * (1 - x) ** 2)
        out = volterra_sweep(phi, params, "1")
        assert np.all(np.isfinite(out.values))

    def test_rejects_zero_sweeps(self):
        edge, params = one_edge(0.5, 1.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            volterra_solve(edge, params, sweeps=0, n=16)


class TestVerifyStarConstruction:
    def test_symmetric_star(self, star3):
        rep = verify_theorem2(star3, 1.0, 1.0, 1.0, n=1024)
        assert rep.eq2_ok and rep.chains_exact and rep.center_ok
        assert not rep.consistent
        assert rep.constraint_residuals["flux_sum"] == pytest.approx(3.0)

    def test_signed_weights(self):
        lengths, a = [1.0, 2.0, 4.0], 0.5
        g = build_star(3, lengths, weights_from_b(lengths, [1.0, 1.0, -2.0], a), a)
        rep = verify_theorem2(g, 1.0, 1.0, 1.0, n=1024)
        assert rep.eq2_ok and rep.chains_exact and not rep.consistent

    def test_b_zero_is_consistent(self, star124):
        rep = verify_theorem2(star124, 1.0, 0.0, 1.0, n=1024)
        assert rep.consistent and rep.eq2_ok and rep.center_ok

    def test_volterra_column(self, star3):
        rep = verify_theorem2(star3, 1.0, 1.0, 1.0, n=256, volterra_sweeps=2)
        assert all(r.volterra_message != "not run" for r in rep.rows)
        assert not rep.volterra_ok

    def test_text(self, star3):
        text = verify_theorem2(star3, 1.0, 1.0, 1.0, n=256).to_text()
        for section in ("[theorem2]", "[constraints]", "[vertices]", "[summary]"):
            assert section in text
        assert "flux_sum = 3.00000000000e+00" in text
        assert "consistent = False" in text

    def test_strict(self, star3):
        with pytest.raises(ConstraintError):
            verify_theorem2(star3, 1.0, 1.0, 1.0, n=64, strict=True)
