import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knotenergy.curves import (Circle, FourierCurve, ParametricCurve, Polygon, PolygonCurve,
                               ReparametrizationWarning, TabulatedCurve, TransformedCurve,
                               arclength_reparametrize, curve_from_spec, intrinsic_distance,
                               load_polygon, make_circle, make_ellipse, make_torus_knot,
                               random_rotation, regular_polygon, save_polygon, signed_offset,
                               speed_deviation, unit_square)

params = st.floats(0.0, 1.0, allow_nan=False)


def direct_geometry(curve, x, y):
    d = np.abs(signed_offset(x, y, curve.length))
    diff = curve.eval(y) - curve.eval(x)
    c2 = np.sum(diff * diff, axis=-1)
    return d, c2, d * d - c2


class TestIntrinsicDistance:
    def test_examples(self):
        assert intrinsic_distance(0.1, 0.9, 1.0) == pytest.approx(0.2)
        assert intrinsic_distance(0.0, 0.5, 1.0) == pytest.approx(0.5)
        assert intrinsic_distance(0.3, 1.3, 1.0) == pytest.approx(0.0, abs=1e-15)

    @given(params, params)
    def test_symmetric_and_bounded(self, x, y):
        d = intrinsic_distance(x, y, 1.0)
        assert d == intrinsic_distance(y, x, 1.0)
        assert 0.0 <= d <= 0.5

    @given(params, params, params)
    def test_triangle(self, x, y, z):
        L = 1.0
        assert intrinsic_distance(x, z, L) <= intrinsic_distance(x, y, L) + intrinsic_distance(y, z, L) + 1e-15


class TestCircle:
    def test_radius_and_points(self):
        c = make_circle()
        assert c.radius == pytest.approx(1.0)
        np.testing.assert_allclose(c.eval(math.pi / 2), [0.0, 1.0], atol=1e-15)
        np.testing.assert_allclose(np.linalg.norm(c.tangent(np.linspace(0, 6, 7)), axis=-1), 1.0)

    def test_pair_geometry_matches_direct_for_separated_pairs(self):
        c = make_circle(2.0, 3)
        x = np.linspace(0, 2, 17)[:, None]
        y = np.linspace(0.05, 2.05, 13)[None, :]
        g = c.pair_geometry(x, y)
        d, c2, _ = direct_geometry(c, x, y)
        np.testing.assert_allclose(g.D, d, atol=1e-15)
        np.testing.assert_allclose(g.chord2, c2, atol=1e-14)

    def test_small_offset_deficit_series(self):
        # D^2 - chord^2 = D^4 / (12 R^2) to leading order
        c = make_circle()
        w = 1e-6
        g = c.pair_geometry(0.3, 0.3 + w)
        assert g.deficit == pytest.approx(w**4 / 12.0, rel=1e-9)

    def test_scalar_inputs(self):
        g = make_circle().pair_geometry(0.0, math.pi)
        assert float(g.chord2) == pytest.approx(4.0)
        assert float(g.D) == pytest.approx(math.pi)


class TestPolygon:
    def test_validation(self):
        with pytest.raises(ValueError):
            Polygon(np.zeros((2, 2)))
        with pytest.raises(ValueError):
            Polygon(np.array([[0, 0], [0, 0], [1, 0]]))

    def test_square_curve(self):
        sq = PolygonCurve(unit_square())
        assert sq.length == 4.0
        np.testing.assert_allclose(sq.eval([0.5, 1.5, 4.5]), [[0.5, 0], [1, 0.5], [0.5, 0]], atol=1e-15)

    def test_exact_span_geometry(self):
        P = regular_polygon(40, dim=3)
        c = PolygonCurve(P)
        rng = np.random.default_rng(3)
        x = rng.uniform(0, c.length, 200)
        y = x + rng.uniform(-0.5, 0.5, 200)
        g = c.pair_geometry(x, y)
        d, c2, df = direct_geometry(c, x, y)
        np.testing.assert_allclose(g.chord2, c2, rtol=1e-12, atol=1e-15)
        assert np.all(g.deficit >= 0)

    def test_same_edge_zero_deficit(self):
        c = PolygonCurve(unit_square())
        assert float(c.pair_geometry(0.1, 0.9).deficit) == 0.0

    def test_round_trip_file(self, tmp_path):
        P = regular_polygon(7, 2.5, 3)
        save_polygon(P, tmp_path / "p.txt")
        Q = load_polygon(tmp_path / "p.txt")
        np.testing.assert_array_equal(P.vertices, Q.vertices)

    def test_file_with_comments(self, tmp_path):
        f = tmp_path / "sq.txt"
        f.write_text("# square\n0 0\n1 0  # corner\n\n1 1\n0 1\n")
        assert load_polygon(f).length == 4.0

    def test_regular_polygon_is_equilateral(self):
        P = regular_polygon(9)
        np.testing.assert_allclose(P.edge_lengths, 2 * math.sin(math.pi / 9))


class TestParametric:
    def test_ellipse_is_unit_speed(self):
        e = make_ellipse(2.0, 1.0)
        assert speed_deviation(e, 1024) < 1e-4
        assert e.length == pytest.approx(9.688448220547675, rel=1e-9)

    def test_torus_knot(self):
        k = make_torus_knot(2, 3, 2.0, 0.5)
        assert k.length == pytest.approx(26.88874078023383, rel=1e-8)
        assert k.closure_gap() < 1e-8
        assert not k.meta["unknotted"]

    def test_torus_knot_rejects_bad_input(self):
        with pytest.raises(ValueError):
            make_torus_knot(2, 4, 2.0, 0.5)
        with pytest.raises(ValueError):
            make_torus_knot(2, 3, 0.5, 2.0)

    def test_coarse_reparametrization_warns(self):
        base = ParametricCurve(lambda t: np.stack([5 * np.cos(t), 0.2 * np.sin(t)], axis=-1),
                               2 * math.pi, 2)
        with pytest.warns(ReparametrizationWarning):
            arclength_reparametrize(base, N=16, tol=1e-12, oversample=1)

    def test_short_arc_geometry_of_reparametrized_curve(self):
        e = make_ellipse(2.0, 1.0)
        x = np.array([0.3, 1.0, 4.0])
        y = x + 0.01
        g = e.pair_geometry(x, y)
        _, c2, _ = direct_geometry(e, x, y)
        np.testing.assert_allclose(g.chord2, c2, rtol=1e-7)
        assert np.all(g.deficit > 0)


class TestFourier:
    def test_closed_and_unit_speed(self):
        c = FourierCurve(1.0, [(2, 0.4, 0.3), (4, 0.1, 1.0)])
        assert c.closure_residual < 1e-14
        assert c.closure_gap() < 1e-12
        assert speed_deviation(c, 512) < 1e-6

    def test_odd_modes_rejected(self):
        with pytest.raises(ValueError):
            FourierCurve(1.0, [(3, 0.1, 0.0)])

    def test_zero_modes_is_circle(self):
        c = FourierCurve(2 * math.pi, [])
        x = np.linspace(0, 6, 11)
        d = np.linalg.norm(c.eval(x) - c.eval(x[:1]), axis=-1)
        circ = np.linalg.norm(make_circle().eval(x) - make_circle().eval(x[:1]), axis=-1)
        np.testing.assert_allclose(d, circ, atol=1e-12)


class TestTransforms:
    def test_transformed_geometry(self):
        rng = np.random.default_rng(0)
        base = make_torus_knot(2, 3, 2.0, 0.5, N=1024)
        t = TransformedCurve(base, random_rotation(3, rng), [1.0, -2.0, 0.5], 3.0)
        assert t.length == pytest.approx(3 * base.length)
        g0 = base.pair_geometry(np.array([0.1]), np.array([5.0]))
        g1 = t.pair_geometry(np.array([0.3]), np.array([15.0]))
        np.testing.assert_allclose(g1.chord2, 9 * g0.chord2, rtol=1e-10)


class TestSpecs:
    @pytest.mark.parametrize("spec, kind, L", [
        ({"kind": "circle", "length": 1.0}, "circle", 1.0),
        ({"kind": "square", "side": 0.25}, "polygonal", 1.0),
        ({"kind": "regular_polygon", "m": 6}, "polygonal", 6.0),
        ({"kind": "polygon", "vertices": [[0, 0], [3, 0], [0, 4]]}, "polygonal", 12.0),
        ({"kind": "fourier", "length": 2.0, "modes": [[2, 0.3, 0.0]]}, "fourier", 2.0),
    ])
    def test_kinds(self, spec, kind, L):
        c = curve_from_spec(spec)
        assert c.kind == kind
        assert c.length == pytest.approx(L)

    def test_polygon_file_relative_to_base(self, tmp_path):
        save_polygon(unit_square(), tmp_path / "sq.txt")
        (tmp_path / "c.json").write_text(json.dumps({"kind": "polygon", "file": "sq.txt", "scale": 2}))
        assert curve_from_spec(str(tmp_path / "c.json")).length == pytest.approx(8.0)

    def test_tabulated(self, tmp_path):
        th = np.linspace(0, 2 * math.pi, 64, endpoint=False)
        save_polygon(Polygon(np.c_[np.cos(th), np.sin(th)]), tmp_path / "t.txt")
        c = curve_from_spec({"kind": "tabulated", "file": str(tmp_path / "t.txt")})
        assert c.length == pytest.approx(2 * math.pi, rel=1e-6)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            curve_from_spec({"kind": "spiral"})


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(1e-9, math.pi))
def test_circle_chord_never_exceeds_arc(x, w):
    g = Circle(2 * math.pi).pair_geometry(x, x + w)
    assert g.chord2 <= g.D**2
    assert g.deficit >= 0


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 4), st.floats(1e-6, 2))
def test_square_chord_never_exceeds_arc(x, w):
    g = PolygonCurve(unit_square()).pair_geometry(x, x + w)
    assert g.deficit >= 0
    assert g.chord2 > 0


def test_tabulated_curve_interpolates_nodes():
    pts = regular_polygon(12).vertices
    c = TabulatedCurve(pts)
    np.testing.assert_allclose(c.eval(np.arange(12) * c.length / 12)[0], pts[0], atol=1e-12)
