import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knotenergy.curves import make_circle
from knotenergy.sampling import (CosineDensity, SampleSet, UniformDensity, quantile_transport_map, sample_iid,
                                 stagnation_statistic)
from knotenergy.transport import (TLqElement, _transport_lp, circular_wasserstein, cost_matrix,
                                  quantize_continuum, tlq_brute_force, tlq_exact, tlq_map_bound,
                                  tlq_sequence_convergence)


def _random_element(rng, n, L=1.0, dim=2, weights=False):
    w = rng.dirichlet(np.ones(n)) if weights else None
    return TLqElement.discrete(rng.uniform(0, L, n), rng.normal(size=(n, dim)), L, weights=w)


def _recovery(curve, dens, n, seed, offset=0.0):
    S = sample_iid(dens, n, seed)
    return TLqElement.from_samples(S, curve.eval(S.samples) + offset)


class TestExact:
    def test_swap_example(self):
        A = TLqElement.discrete([0.25, 0.75], [0.0, 1.0], 1.0)
        B = TLqElement.discrete([0.25, 0.75], [1.0, 0.0], 1.0)
        d, P = tlq_exact(A, B)
        assert d == pytest.approx(0.5)
        np.testing.assert_allclose(P.weights, [[0, 0.5], [0.5, 0]])

    def test_identical_is_zero(self):
        A = _random_element(np.random.default_rng(0), 9)
        assert tlq_exact(A, A)[0] == 0.0

    def test_pure_translation(self):
        x = np.array([0.1, 0.4, 0.7])
        A = TLqElement.discrete(x, np.zeros(3), 1.0)
        B = TLqElement.discrete(x + 0.05, np.zeros(3), 1.0)
        assert tlq_exact(A, B, q=2)[0] == pytest.approx(0.05, rel=1e-12)

    @pytest.mark.parametrize("n, frac", [(4, 0.5), (7, 0.2), (8, 1.0)])
    def test_offset_uniform_grids(self, n, frac):
        L = 2.0
        shift = frac * L / (2 * n)
        x = np.arange(n) * L / n
        A = TLqElement.discrete(x, np.zeros(n), L)
        B = TLqElement.discrete(x + shift, np.zeros(n), L)
        assert tlq_exact(A, B)[0] == pytest.approx(shift, rel=1e-12)
        assert tlq_brute_force(A, B) == pytest.approx(shift, rel=1e-12)

    def test_wraparound(self):
        A = TLqElement.discrete([0.98], [0.0], 1.0)
        B = TLqElement.discrete([0.01], [0.0], 1.0)
        assert tlq_exact(A, B)[0] == pytest.approx(0.03)

    @pytest.mark.parametrize("n, m", [(4, 6), (5, 7), (10, 10)])
    def test_coupling_marginals(self, n, m):
        rng = np.random.default_rng(n * m)
        A, B = _random_element(rng, n), _random_element(rng, m)
        d, P = tlq_exact(A, B)
        assert P.marginal_error(A.weights, B.weights) < 1e-12
        assert d == pytest.approx(math.fsum((P.weights * _cost(A, B)).ravel()), rel=1e-12)

    def test_lp_path_nonuniform(self):
        rng = np.random.default_rng(2)
        A, B = _random_element(rng, 6, weights=True), _random_element(rng, 5, weights=True)
        d, P = tlq_exact(A, B)
        assert P.marginal_error(A.weights, B.weights) < 1e-9
        # LP on the expanded uniform problem must agree with the assignment path
        C, D = _random_element(rng, 6), _random_element(rng, 4)
        d_assign = tlq_exact(C, D)[0]
        M = cost_matrix(C, D, 1.0)
        P = _transport_lp(M, C.weights, D.weights)
        assert d_assign == pytest.approx(float(np.sum(P * M)), rel=1e-9)

    def test_cap(self):
        rng = np.random.default_rng(0)
        A, B = _random_element(rng, 20), _random_element(rng, 20)
        with pytest.raises(ValueError, match="cap"):
            tlq_exact(A, B, cap=16)

    def test_rejects_continuum(self):
        c = TLqElement.continuum(UniformDensity(2 * math.pi), make_circle())
        with pytest.raises(ValueError):
            tlq_exact(c, c)

    def test_rejects_q_below_one(self):
        A = _random_element(np.random.default_rng(0), 3)
        with pytest.raises(ValueError):
            tlq_exact(A, A, q=0.5)

    def test_csv(self, tmp_path):
        rng = np.random.default_rng(3)
        A, B = _random_element(rng, 3), _random_element(rng, 3)
        _, P = tlq_exact(A, B)
        P.to_csv(tmp_path / "c.csv")
        rows = list(csv.DictReader(open(tmp_path / "c.csv")))
        assert len(rows) == 3 and sum(float(r["weight"]) for r in rows) == pytest.approx(1.0)


def _cost(A, B):
    return cost_matrix(A, B, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 7), st.integers(0, 10**6), st.sampled_from([1.0, 2.0, 1.5]))
def test_exact_matches_brute_force(n, seed, q):
    rng = np.random.default_rng(seed)
    A, B = _random_element(rng, n), _random_element(rng, n)
    assert tlq_exact(A, B, q)[0] == pytest.approx(tlq_brute_force(A, B, q), rel=1e-12, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10**6), st.sampled_from([1.0, 2.0]))
def test_metric_axioms(n, seed, q):
    rng = np.random.default_rng(seed)
    A, B, C = (_random_element(rng, n) for _ in range(3))
    ab = tlq_exact(A, B, q)[0]
    assert ab == pytest.approx(tlq_exact(B, A, q)[0], rel=1e-12)
    assert ab >= 0
    assert tlq_exact(A, C, q)[0] <= ab + tlq_exact(B, C, q)[0] + 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 24), st.integers(1, 24), st.integers(0, 10**6))
def test_circular_w1_matches_exact(n, m, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(0, 2.0, n), rng.uniform(0, 2.0, m)
    A = TLqElement.discrete(x, np.zeros(n), 2.0)
    B = TLqElement.discrete(y, np.zeros(m), 2.0)
    assert circular_wasserstein(x, y, 2.0) == pytest.approx(tlq_exact(A, B)[0], rel=1e-9, abs=1e-14)


def test_circular_w1_only_q1():
    with pytest.raises(ValueError):
        circular_wasserstein([0.1], [0.2], 1.0, q=2)


class TestMapBound:
    def test_between_stagnation_and_twice_stagnation(self):
        # the unit-speed circle is 1-Lipschitz in arc length
        c, d = make_circle(1.0), CosineDensity(1.0, 0.4)
        cont = TLqElement.continuum(d, c)
        for n, seed in [(16, 0), (100, 1), (500, 2)]:
            el = _recovery(c, d, n, seed)
            b = tlq_map_bound(cont, el)
            st_ = stagnation_statistic(el.transport_map)
            assert st_ - 1e-12 <= b <= 2 * st_ + 1e-12

    def test_bounds_exact_distance_to_quantized_target(self):
        c, d = make_circle(1.0), UniformDensity(1.0)
        cont = TLqElement.continuum(d, c)
        el = _recovery(c, d, 128, 0)
        Q = quantize_continuum(cont, 512)
        exact = tlq_exact(Q, el)[0]
        # quantization moves mass by at most half a cell, values by as much
        assert exact <= tlq_map_bound(cont, el) + 2 * 0.5 / 512

    def test_rejects_wrong_push_forward(self):
        c = make_circle(1.0)
        S = sample_iid(UniformDensity(1.0), 50, 0)
        el = TLqElement.from_samples(S, c.eval(S.samples), with_map=False)
        T = quantile_transport_map(UniformDensity(1.0), S)
        cont = TLqElement.continuum(CosineDensity(1.0, 0.5), c)
        with pytest.raises(ValueError, match="push"):
            tlq_map_bound(cont, el, T)

    def test_needs_map(self):
        c = make_circle(1.0)
        S = sample_iid(UniformDensity(1.0), 10, 0)
        el = TLqElement.from_samples(S, c.eval(S.samples), with_map=False)
        with pytest.raises(ValueError):
            tlq_map_bound(TLqElement.continuum(UniformDensity(1.0), c), el)

    def test_refinement_insensitive(self):
        c, d = make_circle(1.0), UniformDensity(1.0)
        cont = TLqElement.continuum(d, c)
        el = _recovery(c, d, 20, 5)
        a = tlq_map_bound(cont, el)
        b = tlq_map_bound(cont, el, max_piece=1e-3)
        assert a == pytest.approx(b, rel=1e-10)

    def test_q2(self):
        c, d = make_circle(1.0), UniformDensity(1.0)
        n = 64
        S = SampleSet.from_points((np.arange(n) + 0.5) / n, d)
        el = TLqElement.from_samples(S, c.eval(S.samples))
        b = tlq_map_bound(TLqElement.continuum(d, c), el, q=2)
        # |x - Tx| and |gamma(x) - gamma(Tx)| both ~ offset, mean square 1/(12 n^2) each
        assert b == pytest.approx(math.sqrt(2 / (12 * n * n)), rel=1e-3)


class TestSequence:
    def _seq(self, offset_fn, ns=(64, 256, 1024, 4096), seeds=range(5)):
        c, d = make_circle(1.0), UniformDensity(1.0)
        seq = [_recovery(c, d, n, s, offset_fn(n)) for n in ns for s in seeds]
        return tlq_sequence_convergence(seq, TLqElement.continuum(d, c))

    def test_recovery_sequence_converges(self):
        out = self._seq(lambda n: 0.0)
        assert out["converging"] and out["final_bound"] < 0.02
        assert out["n"] == [64, 256, 1024, 4096]

    def test_constant_offset_does_not(self):
        out = self._seq(lambda n: 1.0)
        assert not out["converging"]
        assert out["final_bound"] > 1.0

    def test_vanishing_offset_converges(self):
        assert self._seq(lambda n: n**-0.5)["converging"]

    def test_missing_map(self):
        c = make_circle(1.0)
        S = sample_iid(UniformDensity(1.0), 10, 0)
        el = TLqElement.from_samples(S, c.eval(S.samples), with_map=False)
        with pytest.raises(ValueError):
            tlq_sequence_convergence([el], TLqElement.continuum(UniformDensity(1.0), c))


def test_element_validation():
    with pytest.raises(ValueError):
        TLqElement.discrete([0.1, 0.2], [1.0], 1.0)
    with pytest.raises(ValueError):
        TLqElement.discrete([0.1, 0.2], [1.0, 2.0], 1.0, weights=[0.2, 0.2])
    with pytest.raises(ValueError):
        TLqElement.continuum(UniformDensity(2.0), make_circle(1.0))
