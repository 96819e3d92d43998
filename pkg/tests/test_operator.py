import math

import numpy as np
import pytest
from scipy import special

from fracgraph.fraccalc import End, GridFunction, graded_grid
from fracgraph.graphmodel import GraphFunction, build_star
from fracgraph.operator import (apply_edge, apply_operator, domain_function, inner_product,
                                pairing_constant, skew_form, verify_self_adjoint, vertex_function)


def single_edge(alpha=0.5, length=1.0):
    # a 2-star is one interval with a matching point at x = 0
    return build_star(2, [length, length], [1.0, -1.0], alpha)


def on_edge(f):
    return GraphFunction({"1": f})


class TestApply:
    def test_zero(self, star3):
        phi = GraphFunction.sample(star3, np.zeros_like, n=32)
        out = apply_operator(star3, phi)
        assert all(np.all(c.values == 0) and not c.has_singular_terms for _, c in out.items())

    def test_parabola_midpoint(self):
        # both one-sided derivatives of x(1-x) agree at 1/2 by symmetry
        half = 0.5**0.5 / special.gamma(1.5) - 2 * 0.5**1.5 / special.gamma(2.5)
        errs = []
        for n in (256, 1024):
            g = graded_grid(1.0, n, 1.0)
            r = apply_edge(GridFunction.sample(g, lambda x: x * (1 - x)), 0.5)
            mid = int(np.argmin(np.abs(g.nodes - 0.5)))
            assert g.nodes[mid] == 0.5
            errs.append(abs(r.values[mid] - 2 * half))
        assert errs[1] < 5e-5
        assert np.log2(errs[0] / errs[1]) / 2 > 1.2

    def test_vanishing_ends_give_no_annotations(self, star3, rng):
        out = apply_operator(star3, domain_function(star3, rng, 64))
        assert not any(c.has_singular_terms for _, c in out.items())

    def test_nonzero_end_is_annotated(self):
        g = graded_grid(1.0, 64)
        r = apply_edge(GridFunction.sample(g, lambda x: 1 + x), 0.5)
        assert r.singular_coefficient(End.AT_0) == pytest.approx(1 / special.gamma(0.5))
        assert r.singular_coefficient(End.AT_L) == pytest.approx(2 / special.gamma(0.5))


class TestInnerProduct:
    def test_length_sum(self, star3):
        one = GraphFunction.sample(star3, np.ones_like, n=64)
        assert inner_product(one, one) == pytest.approx(3.0, rel=1e-14)

    def test_conjugate_symmetry(self, star124, rng):
        phi = domain_function(star124, rng, 64)
        psi = vertex_function(star124, rng, 64)
        assert inner_product(phi, psi) == pytest.approx(np.conj(inner_product(psi, phi)), rel=1e-13)

    def test_orthogonality(self):
        g = graded_grid(1.0, 512)
        s1 = GridFunction.sample(g, lambda x: np.sin(np.pi * x))
        s2 = GridFunction.sample(g, lambda x: np.sin(2 * np.pi * x))
        assert abs(inner_product(on_edge(s1), on_edge(s2))) < 1e-5
        assert inner_product(on_edge(s1), on_edge(s1)) == pytest.approx(0.5, abs=5e-5)

    @pytest.mark.parametrize("p,q,end_q,expected", [
        (-0.5, 0.0, End.AT_0, 2.0),
        (-0.3, -0.3, End.AT_0, 2.5),
        (-0.5, -0.5, End.AT_L, math.pi),
        (0.5, -0.5, End.AT_L, special.beta(1.5, 0.5)),
    ])
    def test_power_terms_exact(self, p, q, end_q, expected):
        g = graded_grid(1.0, 16)
        f = GridFunction.power(g, 1.0, p)
        h = GridFunction.power(g, 1.0, q, end_q)
        assert inner_product(on_edge(f), on_edge(h)) == pytest.approx(expected, rel=1e-13)

    def test_singular_times_sampled(self):
        g = graded_grid(1.0, 256)
        f = GridFunction.power(g, 1.0, -0.5)
        h = GridFunction.sample(g, lambda x: x)
        # int x**(1/2) = 2/3 (the sampled factor is linear, so this is exact)
        assert inner_product(on_edge(f), on_edge(h)) == pytest.approx(2 / 3, rel=1e-13)

    def test_finite_part_of_divergent_pair(self):
        # FP int_0^L x**(-1) dx = log L
        g = graded_grid(2.0, 16)
        f = GridFunction.power(g, 1.0, -0.5)
        assert inner_product(on_edge(f), on_edge(f)) == pytest.approx(math.log(2.0), rel=1e-13)


def test_pairing_constant_at_half():
    assert pairing_constant(0.5) == pytest.approx(1 - 2 * math.log(2) / math.pi, rel=1e-14)


class TestSkewForm:
    def test_real_diagonal_vanishes(self, star3, rng):
        phi = domain_function(star3, rng, 128).map(lambda c: GridFunction(c.grid, c.regular.real))
        assert abs(skew_form(star3, phi, phi).omega) < 1e-14

    def test_antisymmetry(self, star124, rng):
        phi, psi = vertex_function(star124, rng, 128), vertex_function(star124, rng, 128)
        w1 = skew_form(star124, phi, psi).omega
        w2 = skew_form(star124, psi, phi).omega
        assert abs(w1 + np.conj(w2)) <= 1e-12 * max(1.0, abs(w1))

    def test_sesquilinear(self, star124, rng):
        p1, p2, psi = (vertex_function(star124, rng, 128) for _ in range(3))
        a, b = 0.7 - 1.2j, -0.4 + 0.3j
        lhs = skew_form(star124, p1 * a + p2 * b, psi).omega
        rhs = a * skew_form(star124, p1, psi).omega + b * skew_form(star124, p2, psi).omega
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))

    def test_domain_functions_under_refinement(self, star3):
        omegas = []
        for n in (64, 256, 1024):
            rng = np.random.default_rng(7)
            phi, psi = domain_function(star3, rng, n), domain_function(star3, rng, n)
            rep = skew_form(star3, phi, psi)
            omegas.append(abs(rep.omega))
            assert rep.boundary_gap == pytest.approx(abs(rep.omega), abs=1e-9)
        assert omegas[-1] < 1e-4 and omegas[-1] < omegas[0]

    def test_pairing_form_tracks_omega_for_singular_inputs(self, star124, rng):
        phi, psi = vertex_function(star124, rng, 1024), vertex_function(star124, rng, 1024)
        # break the flux condition so that the boundary pairing is far from 0
        psi = psi + GraphFunction({k: GridFunction.power(c.grid, 0.3, star124.alpha - 1.0) if k == "1"
                                   else GridFunction.zeros(c.grid) for k, c in psi.items()})
        rep = skew_form(star124, phi, psi)
        assert abs(rep.omega) > 1e-2
        assert abs(rep.omega - rep.pairing_form) < 1e-3 * abs(rep.omega) + 1e-3

    def test_dirichlet_violation(self):
        g1 = single_edge()
        x_grid = g1.grids(1024)
        a = g1.alpha
        # phi(l) = 1 on edge 1; psi carries a flux at the same end
        phi = GraphFunction({"1": GridFunction.sample(x_grid["1"], lambda x: x**2 * (3 - 2 * x)),
                             "2": GridFunction.zeros(x_grid["2"])})
        psi = GraphFunction({"1": GridFunction.sample(x_grid["1"], lambda x: x**2 * (1 - x))
                             + GridFunction.power(x_grid["1"], special.rgamma(a), a - 1.0, End.AT_L),
                             "2": GridFunction.zeros(x_grid["2"])})
        rep = skew_form(g1, phi, psi)
        # the only surviving end term is c(a) * u_phi(l) * conj(F_psi(l)) = c(a)
        assert abs(rep.omega) == pytest.approx(pairing_constant(a), rel=1e-3)
        assert abs(rep.boundary_form) < 1e-6


class TestVerify:
    def test_star_passes(self, star124):
        rep = verify_self_adjoint(star124, trials=3, tol=1e-3, seed=1, n=1024)
        assert rep.passed and rep.max_omega < 1e-3 and not rep.failures()
        assert rep.violation.omega > 1e-2
        assert {t.family for t in rep.trials} == {"a", "b"}

    def test_tree_and_loop_pass(self, tree, loop):
        for g in (tree, loop):
            assert verify_self_adjoint(g, trials=2, n=1024, seed=3).passed

    def test_failures_are_reported(self, star3):
        rep = verify_self_adjoint(star3, trials=2, tol=1e-14, n=64, violation=False)
        assert not rep.passed and rep.failures()
        assert all(f.worst_vertex for f in rep.failures())

    def test_deterministic(self, star3):
        r1 = verify_self_adjoint(star3, trials=2, n=128, seed=5)
        r2 = verify_self_adjoint(star3, trials=2, n=128, seed=5)
        assert r1 == r2

    def test_unknown_family(self, star3):
        with pytest.raises(ValueError):
            verify_self_adjoint(star3, trials=1, n=64, families=("c",))

    def test_vertex_functions_meet_conditions(self, star124, rng):
        from fracgraph.graphmodel import check_conditions
        phi = vertex_function(star124, rng, 1024)
        assert check_conditions(star124, phi, tol=1e-6).satisfied
