import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knotenergy.curves import (FourierCurve, Polygon, PolygonCurve, TransformedCurve, make_circle, make_ellipse,
                               random_rotation, unit_square)
from knotenergy.energies import (DivergenceRule, EnergyParams, integrand, kernel, ohara_energy,
                                 random_energy_from_values, random_ohara_energy, weighted_ohara_energy)
from knotenergy.oracles import circle_energy_oracle
from knotenergy.sampling import CosineDensity, SampleSet, UniformDensity, sample_iid

MOBIUS = EnergyParams()


class TestParams:
    def test_defaults(self):
        p = EnergyParams()
        assert (p.alpha, p.p, p.s) == (2.0, 1.0, 0.5)
        assert p.blatt_lower and p.finite_range and not p.heavy_tail

    @given(st.floats(0.1, 10), st.floats(0.1, 10))
    def test_s_below_one_iff_finite_range(self, a, p):
        prm = EnergyParams(a, p)
        if abs(prm.ap - (2 * p + 1)) > 1e-9:
            assert (prm.s < 1) == prm.finite_range

    def test_heavy_tail_threshold(self):
        assert EnergyParams(2.6, 1.0).heavy_tail
        assert not EnergyParams(2.5, 1.0).heavy_tail

    @pytest.mark.parametrize("a, p", [(0, 1), (2, 0), (-1, 1)])
    def test_rejects_non_positive(self, a, p):
        with pytest.raises(ValueError):
            EnergyParams(a, p)


class TestOracle:
    # reference values: adaptive quadrature cross-checked against a split
    # analytic-head + numeric-tail evaluation
    @pytest.mark.parametrize("L, a, p, ref", [
        (2 * math.pi, 2.0, 1.0, 4.0),
        (1.0, 2.0, 1.0, 4.0),
        (4 * math.pi, 2.0, 1.0, 4.0),
        (2 * math.pi, 2.5, 1.0, 5.38767047973861),
        (2 * math.pi, 2.0, 1.2, 2.53982353200174),
        (1.0, 3.0, 0.8, 33.3233617107073),
    ])
    def test_values(self, L, a, p, ref):
        assert circle_energy_oracle(L, a, p) == pytest.approx(ref, rel=1e-12)

    def test_outside_finite_range(self):
        assert circle_energy_oracle(1.0, 3.0, 1.0) == math.inf


class TestIntegrand:
    def test_antipodal(self):
        assert integrand(make_circle(), 0.0, math.pi) == pytest.approx(0.25 - 1 / math.pi**2, rel=1e-14)

    def test_quarter(self):
        assert integrand(make_circle(), 0.0, math.pi / 2) == pytest.approx(0.5 - 4 / math.pi**2, rel=1e-14)

    @pytest.mark.parametrize("w", [1e-2, 1e-4, 1e-6, 1e-8])
    def test_diagonal_limit(self, w):
        # kappa^2 / 12 for the unit circle
        assert integrand(make_circle(), 1.0, 1.0 + w) == pytest.approx(1 / 12, rel=max(w * w, 1e-12))

    def test_diagonal_is_domain_error(self):
        with pytest.raises(ValueError):
            integrand(make_circle(), 0.5, 0.5 + 2 * math.pi)

    def test_self_intersection_is_inf(self):
        # figure-eight style polygon: vertex 0 is revisited at parameter 4
        P = PolygonCurve(Polygon(np.array([[0, 0], [1, 1], [1, 0], [0, 1e-300], [-1, 1], [-1, 0]])))
        with pytest.warns(RuntimeWarning):
            v = integrand(P, 0.0, P.polygon.cum_length[3])
        assert v > 1e290 or math.isinf(v)

    def test_general_params(self):
        c = make_circle()
        chord, arc = 2.0, math.pi
        val = integrand(c, 0.0, math.pi, EnergyParams(3.0, 0.7))
        assert val == pytest.approx((chord**-3 - arc**-3) ** 0.7, rel=1e-13)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 6.28), st.floats(1e-7, 3.1))
    def test_symmetric_nonnegative(self, x, w):
        c = make_circle()
        a = integrand(c, x, x + w)
        assert a == integrand(c, x + w, x)
        assert a >= 0

    def test_kernel_rejects_chord_over_arc_for_fractional_power(self):
        from knotenergy.curves import PairGeometry
        g = PairGeometry(np.array(1.0), np.array(1.5), np.array(-0.5))
        with pytest.raises(ValueError):
            kernel(g, EnergyParams(2.0, 0.5))


class TestOharaEnergy:
    def test_circle_matches_oracle(self):
        rep = ohara_energy(make_circle(), MOBIUS, 2048)
        assert rep.value == pytest.approx(4.0, abs=1e-6)
        assert not rep.divergent
        assert list(rep.extras["ladder"]) == [512, 1024, 2048]

    def test_scale_invariance(self):
        a = ohara_energy(make_circle(2 * math.pi), MOBIUS, 1024).value
        b = ohara_energy(make_circle(4 * math.pi), MOBIUS, 1024).value
        assert a == pytest.approx(b, abs=1e-12)

    def test_non_mobius_circle_converges_to_oracle(self):
        prm = EnergyParams(2.0, 1.2)
        rep = ohara_energy(make_circle(), prm, 1024)
        assert rep.value == pytest.approx(circle_energy_oracle(2 * math.pi, 2.0, 1.2), rel=1e-5)

    def test_singular_kernel_still_finite(self):
        rep = ohara_energy(make_circle(), EnergyParams(2.8, 1.0), 1024)
        assert not rep.divergent
        assert rep.value < circle_energy_oracle(2 * math.pi, 2.8, 1.0)

    def test_square_divergent(self):
        rep = ohara_energy(PolygonCurve(unit_square()), MOBIUS, 512)
        assert rep.divergent and math.isinf(rep.value)
        lad = list(rep.extras["ladder"].values())
        # logarithmic growth: equal increments per doubling
        assert (lad[2] - lad[1]) == pytest.approx(lad[1] - lad[0], rel=0.02)
        assert rep.warnings

    def test_ellipse_isometry_invariance(self):
        e = make_ellipse(2.0, 1.0, 2048, dim=3)
        rng = np.random.default_rng(5)
        t = TransformedCurve(e, random_rotation(3, rng), [3.0, 1.0, -2.0])
        a = ohara_energy(e, MOBIUS, 256).value
        b = ohara_energy(t, MOBIUS, 256).value
        assert b == pytest.approx(a, rel=1e-12)

    def test_small_grid_rejected(self):
        with pytest.raises(ValueError):
            ohara_energy(make_circle(), MOBIUS, 32)

    def test_report_json(self):
        rep = ohara_energy(PolygonCurve(unit_square()), MOBIUS, 256)
        d = json.loads(rep.to_json())
        assert d["value"] == "inf" and d["divergent"] is True
        assert d["extras"]["rule"]["growth"] == 0.5

    def test_threads_bit_identical(self):
        c = FourierCurve(1.0, [(2, 0.3, 0.1)])
        a = ohara_energy(c, MOBIUS, 256, threads=1).value
        b = ohara_energy(c, MOBIUS, 256, threads=4).value
        assert a == b


class TestDivergenceRule:
    def test_growth(self):
        assert DivergenceRule().verdict([1.0, 2.0, 3.1])[0]

    def test_log_growth(self):
        assert DivergenceRule().verdict([10.0, 13.0, 16.0])[0]

    def test_converging(self):
        assert not DivergenceRule().verdict([3.9, 3.99, 3.999])[0]

    def test_slow_power_convergence(self):
        # increments shrinking by only 2^-0.1 per doubling look logarithmic
        v = [5.0, 5.0 + 0.2, 5.0 + 0.2 + 0.2 * 2**-0.1]
        assert DivergenceRule().verdict(v)[0]
        v = [5.0, 5.0 + 0.2, 5.0 + 0.2 + 0.2 * 2**-0.3]
        assert not DivergenceRule().verdict(v)[0]
        v = [5.0, 5.2, 5.2 + 0.2 * 0.5]
        assert not DivergenceRule().verdict(v)[0]

    def test_non_finite(self):
        assert DivergenceRule().verdict([1.0, math.inf])[0]


class TestWeighted:
    def test_uniform_is_scaled_energy(self):
        rep = weighted_ohara_energy(make_circle(), UniformDensity(2 * math.pi), MOBIUS, 1024)
        assert rep.value == pytest.approx(4 / (2 * math.pi) ** 2, rel=1e-6)

    def test_unit_length_uniform_equals_energy(self):
        c = make_circle(1.0)
        a = weighted_ohara_energy(c, UniformDensity(1.0), MOBIUS, 512).value
        b = ohara_energy(c, MOBIUS, 512).value
        assert a == pytest.approx(b, rel=1e-14)

    def test_cosine_frozen(self):
        rep = weighted_ohara_energy(make_circle(1.0), CosineDensity(1.0, 0.5), MOBIUS, 2048)
        assert rep.value == pytest.approx(3.941614540282204, rel=1e-12)

    def test_period_mismatch(self):
        with pytest.raises(ValueError):
            weighted_ohara_energy(make_circle(1.0), UniformDensity(2.0))


class TestRandom:
    def test_two_point_example(self):
        S = SampleSet.from_points([0.0, math.pi / 2], UniformDensity(2 * math.pi))
        rep = random_ohara_energy(make_circle(), S)
        assert rep.value == pytest.approx(0.25 * 2 * (0.5 - 4 / math.pi**2), rel=1e-14)
        assert rep.value == pytest.approx(0.047357, abs=1e-6)

    def test_single_sample(self):
        S = SampleSet.from_points([1.0], UniformDensity(2 * math.pi))
        assert random_ohara_energy(make_circle(), S).value == 0.0

    def test_duplicates_rejected(self):
        S = SampleSet.from_points([0.1, 0.2, 0.1], UniformDensity(1.0))
        with pytest.raises(ValueError):
            random_ohara_energy(make_circle(1.0), S)

    def test_matches_direct_double_loop(self):
        c = FourierCurve(1.0, [(2, 0.2, 0.5)])
        S = sample_iid(CosineDensity(1.0, 0.3), 40, 1)
        x = S.samples
        tot = 0.0
        for i in range(40):
            for j in range(40):
                if i != j:
                    tot += integrand(c, x[i], x[j])
        assert random_ohara_energy(c, S).value == pytest.approx(tot / 1600, rel=1e-11)

    def test_values_path_agrees(self):
        c = make_circle(1.0)
        S = sample_iid(UniformDensity(1.0), 60, 3)
        a = random_ohara_energy(c, S).value
        b = random_energy_from_values(c.eval(S.samples), S).value
        assert b == pytest.approx(a, rel=1e-6)

    def test_values_translation_invariant(self):
        c = make_circle(1.0)
        S = sample_iid(UniformDensity(1.0), 30, 3)
        g = c.eval(S.samples)
        a = random_energy_from_values(g, S).value
        assert random_energy_from_values(g + 1.0, S).value == pytest.approx(a, rel=1e-9)

    def test_heavy_tail_warning(self):
        S = sample_iid(UniformDensity(1.0), 20, 0)
        rep = random_ohara_energy(make_circle(1.0), S, EnergyParams(2.8, 1.0))
        assert any("variance" in w for w in rep.warnings)

    def test_mc_consistency_weighted(self):
        # mean over seeds of R_n equals (1 - 1/n) E_rho within 3 standard errors
        c, d, n = make_circle(1.0), CosineDensity(1.0, 0.5), 128
        vals = np.array([random_ohara_energy(c, sample_iid(d, n, s)).value for s in range(60)])
        E = 3.941614540282204
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        assert abs(vals.mean() - (1 - 1 / n) * E) < 3 * se

    def test_degenerate_kernel_rate(self):
        # uniform density on a circle: the kernel depends on x - y only, the
        # first-order projection vanishes and the spread decays like 1/n
        c, d = make_circle(1.0), UniformDensity(1.0)
        ns = [64, 256, 1024]
        sds = [np.std([random_ohara_energy(c, sample_iid(d, n, s)).value for s in range(30)], ddof=1)
               for n in ns]
        slope = np.polyfit(np.log(ns), np.log(sds), 1)[0]
        assert -1.2 < slope < -0.8


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 40), st.integers(0, 10**6))
def test_random_energy_permutation_invariant(n, seed):
    c = FourierCurve(1.0, [(2, 0.25, 0.0)])
    S = sample_iid(UniformDensity(1.0), n, seed)
    perm = np.random.default_rng(seed).permutation(n)
    T = SampleSet(S.samples[perm], S.density, S.seed)
    assert random_ohara_energy(c, S).value == random_ohara_energy(c, T).value
