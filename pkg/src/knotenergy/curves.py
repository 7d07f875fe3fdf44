"""Closed curves on the circle R/LZ: presets, polygons and arc-length tools.

Every curve exposes ``eval`` (points), ``tangent`` (derivative) and
``pair_geometry``. The last one returns, for parameter pairs, the intrinsic
distance ``D``, the squared chord and the *deficit* ``D**2 - chord**2``.
Energies are built from the deficit rather than from ``1/chord - 1/D``
directly: for nearby pairs the two reciprocals agree to ~16 digits and the
naive difference is pure rounding noise.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

# Gauss-Legendre rule on [0, 1] used for short-arc chord integrals.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS

CLOSEDNESS_RTOL = 1e-9


def reduce_param(x, L):
    """Canonical representative of ``x`` in ``[0, L)``."""
    r = np.mod(x, L)
    # np.mod can return L for tiny negative inputs
    return np.where(r >= L, 0.0, r)


def signed_offset(x, y, L):
    """Shortest signed displacement from ``x`` to ``y`` on R/LZ, in [-L/2, L/2]."""
    d = np.mod(np.asarray(y, dtype=float) - np.asarray(x, dtype=float), L)
    return np.where(d > 0.5 * L, d - L, d)


def intrinsic_distance(x, y, L):
    """Length of the shorter arc between parameters ``x`` and ``y``."""
    d = np.abs(np.asarray(reduce_param(x, L)) - np.asarray(reduce_param(y, L)))
    out = np.minimum(L - d, d)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class PairGeometry:
    D: np.ndarray
    chord2: np.ndarray
    deficit: np.ndarray


class ClosedCurve:
    """Base class: a closed curve gamma: R/LZ -> R^d.

    Subclasses implement ``_eval``; ``tangent`` falls back to central
    differences and ``pair_geometry`` to a Gauss-Legendre integral of the
    tangent over short arcs.
    """

    kind = "generic"
    unit_speed = False
    short_arc_fraction = 1.0 / 32.0

    def __init__(self, length: float, dim: int, meta: dict | None = None):
        if not length > 0:
            raise ValueError(f"curve length must be positive, got {length}")
        if dim < 2:
            raise ValueError(f"ambient dimension must be >= 2, got {dim}")
        self.length = float(length)
        self.dim = int(dim)
        self.meta = dict(meta or {})

    @property
    def L(self) -> float:
        return self.length

    def eval(self, x):
        x = reduce_param(np.asarray(x, dtype=float), self.length)
        return self._eval(x)

    def _eval(self, x):
        raise NotImplementedError

    def tangent(self, x):
        h = self.length * 1e-6
        x = np.asarray(x, dtype=float)
        return (self.eval(x + h) - self.eval(x - h)) / (2.0 * h)

    def pair_geometry(self, x, y) -> PairGeometry:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        delta = signed_offset(x, y, self.length)
        D = np.abs(delta)
        diff = self.eval(y) - self.eval(x)
        chord2 = np.einsum("...k,...k->...", diff, diff)
        deficit = D * D - chord2
        short = D < self.short_arc_fraction * self.length
        if np.any(short):
            xs = np.broadcast_to(x, D.shape)[short]
            ds = delta[short]
            c2, df = self._short_arc(xs, ds)
            chord2 = np.array(chord2, dtype=float, ndmin=1).reshape(D.shape)
            deficit = np.array(deficit, dtype=float, ndmin=1).reshape(D.shape)
            chord2[short] = c2
            deficit[short] = df
        return PairGeometry(D, chord2, deficit)

    def _short_arc(self, x, delta):
        """Chord and deficit over the arc [x, x + delta] from tangent samples.

        Uses deficit/D^2 = sum_a w_a (1 - |T_a|^2) + 1/2 sum_ab w_a w_b |T_a - T_b|^2,
        an identity for the exact integrals that involves no cancellation.
        """
        t = x[:, None] + delta[:, None] * _GL_NODES[None, :]
        T = self.tangent(t)
        if self.unit_speed:
            T = T / np.linalg.norm(T, axis=-1, keepdims=True)
            own = 0.0
        else:
            own = np.einsum("a,na->n", _GL_WEIGHTS, 1.0 - np.einsum("nak,nak->na", T, T))
        dT = T[:, :, None, :] - T[:, None, :, :]
        spread = 0.5 * np.einsum("a,b,nabk,nabk->n", _GL_WEIGHTS, _GL_WEIGHTS, dT, dT)
        rel = own + spread
        D2 = delta * delta
        return D2 * (1.0 - rel), D2 * rel

    def points(self, N: int):
        """Points at the N uniform parameters k*L/N."""
        return self.eval(np.arange(N) * (self.length / N))

    def closure_gap(self) -> float:
        a = self.eval(0.0)
        b = self._eval(np.array(self.length * (1.0 - 1e-15)))
        return float(np.linalg.norm(a - b))

    def to_spec(self) -> dict:
        return {"kind": self.kind, **self.meta}

    def __repr__(self):
        return f"{type(self).__name__}(L={self.length:.6g}, d={self.dim})"


class Circle(ClosedCurve):
    """Round circle of circumference L in the first two coordinates."""

    kind = "circle"
    unit_speed = True

    def __init__(self, length: float, dim: int = 2):
        super().__init__(length, dim, {"length": float(length), "dim": int(dim)})
        self.radius = self.length / (2.0 * math.pi)

    def _eval(self, x):
        th = x / self.radius
        out = np.zeros(np.shape(x) + (self.dim,))
        out[..., 0] = self.radius * np.cos(th)
        out[..., 1] = self.radius * np.sin(th)
        return out

    def tangent(self, x):
        th = np.asarray(x, dtype=float) / self.radius
        out = np.zeros(np.shape(th) + (self.dim,))
        out[..., 0] = -np.sin(th)
        out[..., 1] = np.cos(th)
        return out

    def pair_geometry(self, x, y) -> PairGeometry:
        D = np.abs(signed_offset(x, y, self.length))
        u = D / (2.0 * self.radius)
        s = np.sin(u)
        chord2 = (2.0 * self.radius * s) ** 2
        # D^2 - chord^2 = 4R^2 (u - sin u)(u + sin u)
        deficit = 4.0 * self.radius**2 * _u_minus_sin(u) * (u + s)
        return PairGeometry(D, chord2, deficit)


def _u_minus_sin(u):
    u = np.asarray(u, dtype=float)
    shape = u.shape
    u = np.atleast_1d(u)
    out = u - np.sin(u)
    small = u < 0.1
    if np.any(small):
        v = u[small]
        v2 = v * v
        # Taylor series of u - sin(u); 6 terms exhaust double precision for u < 0.1
        out[small] = v * v2 / 6.0 * (
            1.0 - v2 / 20.0 * (1.0 - v2 / 42.0 * (1.0 - v2 / 72.0 * (1.0 - v2 / 110.0 * (1.0 - v2 / 156.0))))
        )
    return out.reshape(shape)


@dataclass(frozen=True)
class Polygon:
    """Closed polygon; the last vertex connects back to the first."""

    vertices: np.ndarray
    edge_lengths: np.ndarray = field(init=False, repr=False)
    cum_length: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3:
            raise ValueError("a polygon needs at least 3 vertices")
        if v.shape[1] < 2:
            raise ValueError("polygon vertices must live in R^d with d >= 2")
        edges = np.roll(v, -1, axis=0) - v
        lengths = np.linalg.norm(edges, axis=1)
        if np.any(lengths <= 0):
            bad = int(np.argmin(lengths))
            raise ValueError(f"repeated consecutive vertices at index {bad}")
        v.setflags(write=False)
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "edge_lengths", lengths)
        object.__setattr__(self, "cum_length", cum)

    @property
    def m(self) -> int:
        return self.vertices.shape[0]

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def length(self) -> float:
        return float(self.cum_length[-1])

    @property
    def directions(self) -> np.ndarray:
        edges = np.roll(self.vertices, -1, axis=0) - self.vertices
        return edges / self.edge_lengths[:, None]

    def transformed(self, rotation=None, translation=None, scale: float = 1.0) -> "Polygon":
        v = self.vertices * scale
        if rotation is not None:
            v = v @ np.asarray(rotation).T
        if translation is not None:
            v = v + np.asarray(translation)
        return Polygon(v)


def regular_polygon(m: int, radius: float = 1.0, dim: int = 2) -> Polygon:
    th = 2.0 * math.pi * np.arange(m) / m
    v = np.zeros((m, dim))
    v[:, 0] = radius * np.cos(th)
    v[:, 1] = radius * np.sin(th)
    return Polygon(v)


def unit_square(dim: int = 2) -> Polygon:
    v = np.zeros((4, dim))
    v[:, :2] = [[0, 0], [1, 0], [1, 1], [0, 1]]
    return Polygon(v)


def load_polygon(path) -> Polygon:
    """Read a polygon: one vertex per line, '#' comments, implicit closure."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append([float(t) for t in line.split()])
    if len({len(r) for r in rows}) > 1:
        raise ValueError(f"{path}: inconsistent coordinate counts")
    return Polygon(np.array(rows))


def save_polygon(P: Polygon, path) -> None:
    lines = [f"# polygon with {P.m} vertices in R^{P.dim}"]
    lines += [" ".join(f"{c:.17g}" for c in row) for row in P.vertices]
    Path(path).write_text("\n".join(lines) + "\n")


class PolygonCurve(ClosedCurve):
    """Arc-length parametrized polygon, linear interpolation between vertices."""

    kind = "polygonal"
    unit_speed = True
    max_exact_span = 8

    def __init__(self, polygon: Polygon, meta: dict | None = None):
        super().__init__(polygon.length, polygon.dim, meta)
        self.polygon = polygon
        self._dirs = polygon.directions

    def _edge(self, x):
        e = np.searchsorted(self.polygon.cum_length, x, side="right") - 1
        return np.clip(e, 0, self.polygon.m - 1)

    def _eval(self, x):
        e = self._edge(x)
        a = x - self.polygon.cum_length[e]
        return self.polygon.vertices[e] + a[..., None] * self._dirs[e]

    def tangent(self, x):
        x = reduce_param(np.asarray(x, dtype=float), self.length)
        return self._dirs[self._edge(x)]

    def pair_geometry(self, x, y) -> PairGeometry:
        P = self.polygon
        L, m = self.length, P.m
        x = reduce_param(np.asarray(x, dtype=float), L)
        y = reduce_param(np.asarray(y, dtype=float), L)
        x, y = np.broadcast_arrays(x, y)
        delta = signed_offset(x, y, L)
        D = np.abs(delta)
        fwd = delta >= 0
        start = np.where(fwd, x, y)
        end = np.where(fwd, y, x)
        es, ee = self._edge(start), self._edge(end)
        a_s = start - P.cum_length[es]
        a_e = end - P.cum_length[ee]
        span = np.mod(ee - es, m)
        span = np.where((span == 0) & (a_e < a_s), m, span)

        diff = self._eval(end) - self._eval(start)
        chord2 = np.einsum("...k,...k->...", diff, diff)
        deficit = D * D - chord2

        same = span == 0
        chord2 = np.where(same, D * D, chord2)
        deficit = np.where(same, 0.0, deficit)
        for k in range(1, min(self.max_exact_span, m - 1) + 1):
            sel = span == k
            if not np.any(sel):
                continue
            e0 = es[sel]
            pieces = [P.edge_lengths[e0] - a_s[sel]]
            dirs = [self._dirs[e0]]
            for t in range(1, k):
                et = (e0 + t) % m
                pieces.append(P.edge_lengths[et])
                dirs.append(self._dirs[et])
            pieces.append(a_e[sel])
            dirs.append(self._dirs[ee[sel]])
            lens = np.stack(pieces, axis=-1)
            U = np.stack(dirs, axis=-2)
            vec = np.einsum("na,nak->nk", lens, U)
            dU = U[:, :, None, :] - U[:, None, :, :]
            gap = np.einsum("na,nb,nabk,nabk->n", lens, lens, dU, dU)
            chord2[sel] = np.einsum("nk,nk->n", vec, vec)
            # sum over unordered pairs = half the ordered sum
            deficit[sel] = 0.5 * gap
        return PairGeometry(D, chord2, deficit)

    def to_spec(self) -> dict:
        spec = {"kind": "polygon"}
        spec.update(self.meta)
        if "file" not in spec:
            spec["vertices"] = self.polygon.vertices.tolist()
        return spec


def polygon_as_curve(P: Polygon) -> PolygonCurve:
    return PolygonCurve(P)


class ParametricCurve(ClosedCurve):
    """Closed curve given by a periodic map on [0, period); not arc-length."""

    kind = "parametric"

    def __init__(self, func, period: float, dim: int, derivative=None, kind: str | None = None,
                 meta: dict | None = None):
        super().__init__(period, dim, meta)
        self._func = func
        self._deriv = derivative
        if kind:
            self.kind = kind

    def _eval(self, x):
        return self._func(x)

    def tangent(self, x):
        if self._deriv is None:
            return super().tangent(x)
        return self._deriv(reduce_param(np.asarray(x, dtype=float), self.length))


class ReparametrizedCurve(ClosedCurve):
    """Arc-length version of ``base`` via monotone inversion of cumulative length."""

    def __init__(self, base: ClosedCurve, grid: int):
        t = np.linspace(0.0, base.length, grid + 1)
        a, b = t[:-1], t[1:]
        nodes = a[:, None] + (b - a)[:, None] * _GL_NODES[None, :]
        speed = np.linalg.norm(base.tangent(nodes), axis=-1)
        cell = (speed @ _GL_WEIGHTS) * (b - a)
        s = np.concatenate([[0.0], np.cumsum(cell)])
        super().__init__(float(s[-1]), base.dim, dict(base.meta))
        self.kind = base.kind
        self.base = base
        self.grid = grid
        self._inverse = PchipInterpolator(s, t, extrapolate=True)
        self._dinverse = self._inverse.derivative()
        self.speed_error = float("nan")

    def _eval(self, s):
        return self.base.eval(self._inverse(s))

    def tangent(self, s):
        s = reduce_param(np.asarray(s, dtype=float), self.length)
        return self.base.tangent(self._inverse(s)) * self._dinverse(s)[..., None]


def speed_deviation(curve: ClosedCurve, N: int) -> float:
    """max |finite-difference speed - 1| at the N uniform grid points."""
    x = np.arange(N) * (curve.length / N)
    h = curve.length * 1e-6
    v = (curve.eval(x + h) - curve.eval(x - h)) / (2.0 * h)
    return float(np.max(np.abs(np.linalg.norm(v, axis=-1) - 1.0)))


class ReparametrizationWarning(UserWarning):
    pass


def arclength_reparametrize(curve: ClosedCurve, N: int = 4096, tol: float = 1e-4,
                            oversample: int = 4) -> ClosedCurve:
    """Return an arc-length parametrization of ``curve``.

    Unit-speed curves (circles, polygons, Fourier curves) are returned as-is.
    Otherwise the cumulative length is tabulated on ``oversample * N`` cells and
    inverted with a monotone cubic. The achieved speed deviation on the N grid
    is stored as ``speed_error``; exceeding ``tol`` emits a warning so the
    caller can raise N.
    """
    if curve.unit_speed:
        return curve
    out = ReparametrizedCurve(curve, oversample * N)
    out.speed_error = speed_deviation(out, N)
    if out.speed_error > tol:
        warnings.warn(
            f"arc-length reparametrization reached speed error {out.speed_error:.3g} > {tol:.3g}"
            f" at N={N}; increase N",
            ReparametrizationWarning,
            stacklevel=2,
        )
    return out


def make_circle(L: float = 2.0 * math.pi, d: int = 2) -> Circle:
    return Circle(L, d)


def make_ellipse(a: float, b: float, N: int = 4096, dim: int = 2) -> ClosedCurve:
    if not (a > 0 and b > 0):
        raise ValueError("ellipse semi-axes must be positive")

    def f(t):
        out = np.zeros(np.shape(t) + (dim,))
        out[..., 0] = a * np.cos(t)
        out[..., 1] = b * np.sin(t)
        return out

    def df(t):
        out = np.zeros(np.shape(t) + (dim,))
        out[..., 0] = -a * np.sin(t)
        out[..., 1] = b * np.cos(t)
        return out

    base = ParametricCurve(f, 2.0 * math.pi, dim, df, kind="ellipse", meta={"a": a, "b": b})
    return arclength_reparametrize(base, N)


def make_torus_knot(p: int, q: int, R: float, r: float, N: int = 4096) -> ClosedCurve:
    """Standard (p, q) torus knot on the torus with radii R > r > 0."""
    if math.gcd(int(p), int(q)) != 1:
        raise ValueError(f"torus knot needs gcd(p, q) = 1, got ({p}, {q})")
    if not (R > r > 0):
        raise ValueError(f"torus knot needs R > r > 0, got R={R}, r={r}")

    def f(t):
        rho = R + r * np.cos(q * t)
        return np.stack([rho * np.cos(p * t), rho * np.sin(p * t), r * np.sin(q * t)], axis=-1)

    def df(t):
        rho = R + r * np.cos(q * t)
        drho = -r * q * np.sin(q * t)
        return np.stack([
            drho * np.cos(p * t) - p * rho * np.sin(p * t),
            drho * np.sin(p * t) + p * rho * np.cos(p * t),
            r * q * np.cos(q * t),
        ], axis=-1)

    meta = {"p": int(p), "q": int(q), "R": float(R), "r": float(r)}
    # |p| <= 1 or |q| <= 1 gives an unknot
    meta["unknotted"] = min(abs(int(p)), abs(int(q))) <= 1
    base = ParametricCurve(f, 2.0 * math.pi, 3, df, kind="torus_knot", meta=meta)
    return arclength_reparametrize(base, N)


class TabulatedCurve(ClosedCurve):
    """Periodic cubic spline through points, parametrized by cumulative chord length."""

    kind = "tabulated"

    def __init__(self, points, meta: dict | None = None):
        pts = np.asarray(points, dtype=float)
        closed = np.vstack([pts, pts[:1]])
        seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
        if np.any(seg <= 0):
            raise ValueError("tabulated curve has repeated consecutive points")
        t = np.concatenate([[0.0], np.cumsum(seg)])
        super().__init__(float(t[-1]), pts.shape[1], meta)
        self._spline = CubicSpline(t, closed, bc_type="periodic")
        self._dspline = self._spline.derivative()

    def _eval(self, x):
        return self._spline(x)

    def tangent(self, x):
        return self._dspline(reduce_param(np.asarray(x, dtype=float), self.length))


class FourierCurve(ClosedCurve):
    """Exactly unit-speed closed curve from a tangent-angle function.

    The tangent is (cos phi, sin phi) with phi(theta) = theta + sum_k a_k sin(k theta + c_k),
    theta = 2 pi s / L, using only even k: then every Fourier mode of the tangent has odd
    frequency, the zero mode vanishes and the curve closes. Positions come from the
    term-wise integrated Fourier series of the tangent.
    """

    kind = "fourier"
    unit_speed = True

    def __init__(self, length: float, modes, dim: int = 2, rotation=None, fft_size: int = 1024):
        modes = [(int(k), float(a), float(c)) for k, a, c in modes]
        if any(k % 2 for k, _, _ in modes):
            raise ValueError("Fourier curve modes must have even wavenumbers for closure")
        super().__init__(length, dim, {"length": float(length), "modes": [list(m) for m in modes]})
        self.modes = modes
        self._rot = None if rotation is None else np.asarray(rotation, dtype=float)
        th = 2.0 * math.pi * np.arange(fft_size) / fft_size
        z = np.exp(1j * self._phi(th))
        coef = np.fft.fft(z) / fft_size
        freq = np.fft.fftfreq(fft_size, 1.0 / fft_size)
        # coefficients decay like Bessel functions; drop the FFT round-off floor
        keep = (np.abs(coef) > 1e-16 * np.abs(coef).max()) & (freq != 0)
        self._freq = freq[keep]
        # d gamma/ds = e^{i phi} => gamma = sum c_n e^{i n theta} L / (2 pi i n)
        self._coef = coef[keep] * self.length / (2j * math.pi * self._freq)
        self.closure_residual = float(abs(coef[freq == 0][0]))

    def _phi(self, th):
        out = np.array(th, dtype=float, copy=True)
        for k, a, c in self.modes:
            out = out + a * np.sin(k * th + c)
        return out

    def _embed(self, xy):
        out = np.zeros(xy.shape[:-1] + (self.dim,))
        out[..., :2] = xy
        if self._rot is not None:
            out = out @ self._rot.T
        return out

    def _eval(self, x):
        th = 2.0 * math.pi * np.asarray(x) / self.length
        z = np.exp(1j * th[..., None] * self._freq) @ self._coef
        return self._embed(np.stack([z.real, z.imag], axis=-1))

    def tangent(self, x):
        phi = self._phi(2.0 * math.pi * np.asarray(x, dtype=float) / self.length)
        return self._embed(np.stack([np.cos(phi), np.sin(phi)], axis=-1))


class TransformedCurve(ClosedCurve):
    """Similarity image x -> scale * rotation @ gamma(x / scale) + translation."""

    def __init__(self, base: ClosedCurve, rotation=None, translation=None, scale: float = 1.0):
        super().__init__(base.length * scale, base.dim, dict(base.meta))
        self.kind = base.kind
        self.unit_speed = base.unit_speed
        self.base = base
        self.scale = float(scale)
        self.rotation = np.eye(base.dim) if rotation is None else np.asarray(rotation, dtype=float)
        self.translation = np.zeros(base.dim) if translation is None else np.asarray(translation, dtype=float)

    def _eval(self, x):
        return self.scale * self.base.eval(x / self.scale) @ self.rotation.T + self.translation

    def tangent(self, x):
        return self.base.tangent(np.asarray(x, dtype=float) / self.scale) @ self.rotation.T

    def pair_geometry(self, x, y) -> PairGeometry:
        g = self.base.pair_geometry(np.asarray(x) / self.scale, np.asarray(y) / self.scale)
        s2 = self.scale**2
        return PairGeometry(g.D * self.scale, g.chord2 * s2, g.deficit * s2)


def random_rotation(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def curve_from_spec(spec, base_dir=None) -> ClosedCurve:
    """Build a curve from its JSON description (dict, JSON string or path)."""
    if isinstance(spec, (str, Path)):
        text = str(spec)
        if text.lstrip().startswith("{"):
            spec = json.loads(text)
        else:
            p = Path(text)
            spec = json.loads(p.read_text())
            base_dir = base_dir or p.parent
    try:
        return _curve_from_dict(spec, base_dir)
    except KeyError as exc:
        raise ValueError(f"curve spec of kind {spec.get('kind')!r} is missing key {exc}") from None


def _curve_from_dict(spec: dict, base_dir) -> ClosedCurve:
    kind = spec.get("kind")
    if kind == "circle":
        return make_circle(float(spec.get("length", 2.0 * math.pi)), int(spec.get("dim", 2)))
    if kind == "torus_knot":
        return make_torus_knot(int(spec["p"]), int(spec["q"]), float(spec["R"]), float(spec["r"]),
                               int(spec.get("N", 4096)))
    if kind == "ellipse":
        return make_ellipse(float(spec["a"]), float(spec["b"]), int(spec.get("N", 4096)))
    if kind == "polygon":
        if "file" in spec:
            path = Path(spec["file"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            P = load_polygon(path)
            meta = {"file": str(spec["file"])}
        else:
            P = Polygon(np.asarray(spec["vertices"], dtype=float))
            meta = {}
        if "scale" in spec:
            P = P.transformed(scale=float(spec["scale"]))
            meta["scale"] = float(spec["scale"])
        return PolygonCurve(P, meta)
    if kind == "square":
        side = float(spec.get("side", 1.0))
        return PolygonCurve(unit_square(int(spec.get("dim", 2))).transformed(scale=side),
                            {"side": side})
    if kind == "regular_polygon":
        P = regular_polygon(int(spec["m"]), float(spec.get("radius", 1.0)), int(spec.get("dim", 2)))
        return PolygonCurve(P, {"m": int(spec["m"])})
    if kind == "fourier":
        return FourierCurve(float(spec["length"]), spec["modes"], int(spec.get("dim", 2)))
    if kind == "tabulated":
        path = Path(spec["file"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        pts = load_polygon(path).vertices
        return arclength_reparametrize(TabulatedCurve(pts, {"file": str(spec["file"])}),
                                       int(spec.get("N", 4096)))
    raise ValueError(f"unknown curve kind {kind!r}")
