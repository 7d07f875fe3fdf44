"""TL^q distances between (measure, function) pairs on the circle R/LZ."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog

from .curves import ClosedCurve, signed_offset
from .sampling import Density, SampleSet, TransportMap, quantile_transport_map, stagnation_statistic

DEFAULT_CAP = 1024
EXPAND_LIMIT = 2048
QUANT_ATOMS = 512
MARGINAL_TOL = 1e-12
PUSH_TOL = 1e-8

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass
class TLqElement:
    """Either a continuum pair (rho dx, gamma) or a weighted atomic pair (sum w_i delta_{x_i}, g_i)."""

    L: float
    points: np.ndarray | None = None
    values: np.ndarray | None = None
    weights: np.ndarray | None = None
    density: Density | None = None
    curve: ClosedCurve | None = None
    samples: SampleSet | None = None
    transport_map: TransportMap | None = None
    meta: dict = field(default_factory=dict)

    @property
    def is_discrete(self) -> bool:
        return self.points is not None

    @property
    def n(self) -> int:
        return 0 if self.points is None else int(self.points.size)

    @classmethod
    def continuum(cls, density: Density, curve: ClosedCurve, **meta) -> "TLqElement":
        if abs(density.L - curve.length) > 1e-9 * curve.length:
            raise ValueError("density period differs from curve length")
        return cls(L=density.L, density=density, curve=curve, meta=meta)

    @classmethod
    def discrete(cls, points, values, L: float, weights=None, **meta) -> "TLqElement":
        x = np.asarray(points, dtype=float).ravel()
        g = np.asarray(values, dtype=float)
        if g.ndim == 1:
            g = g[:, None]
        if g.shape[0] != x.size:
            raise ValueError(f"{x.size} points but {g.shape[0]} values")
        w = np.full(x.size, 1.0 / x.size) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != x.shape or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        return cls(L=float(L), points=x, values=g, weights=w, meta=meta)

    @classmethod
    def from_samples(cls, S: SampleSet, values, with_map: bool = True, **meta) -> "TLqElement":
        """Empirical measure of ``S`` with values attached to ``S.samples``; uniform weights."""
        el = cls.discrete(S.samples, values, S.L, **meta)
        el.samples = S
        if with_map:
            el.transport_map = quantile_transport_map(S.density, S)
        return el

    @property
    def uniform(self) -> bool:
        return self.is_discrete and bool(np.all(self.weights == self.weights[0]))


@dataclass
class CouplingMatrix:
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray

    def marginal_error(self, a, b) -> float:
        return float(max(np.max(np.abs(self.weights.sum(axis=1) - a)),
                         np.max(np.abs(self.weights.sum(axis=0) - b))))

    def to_csv(self, path) -> None:
        I, J = np.nonzero(self.weights)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "weight"])
            for i, j in zip(I, J):
                w.writerow([int(i), int(j), format(self.weights[i, j], ".17g")])

    def to_dict(self) -> dict:
        I, J = np.nonzero(self.weights)
        return {"i": I.tolist(), "j": J.tolist(), "weight": self.weights[I, J].tolist()}


def circular_distance(x, y, L):
    return np.abs(signed_offset(x, y, L))


def cost_matrix(A: TLqElement, B: TLqElement, q: float) -> np.ndarray:
    """c_ij = |x_i - y_j|_circ^q + |f_i - g_j|^q."""
    if abs(A.L - B.L) > 1e-12 * A.L:
        raise ValueError("elements live on circles of different length")
    if A.values.shape[1] != B.values.shape[1]:
        raise ValueError("function values have different dimensions")
    d = circular_distance(A.points[:, None], B.points[None, :], A.L)
    diff = A.values[:, None, :] - B.values[None, :, :]
    f = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return d**q + f**q


def _check_q(q):
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")


def tlq_exact(A: TLqElement, B: TLqElement, q: float = 1.0, cap: int = DEFAULT_CAP):
    """Exact TL^q distance between two atomic elements and an optimal coupling.

    Equal uniform sizes are a linear assignment. Other rational weights are
    expanded to lcm(n, m) copies when small enough; anything else goes to a
    transportation LP.
    """
    _check_q(q)
    if not (A.is_discrete and B.is_discrete):
        raise ValueError("tlq_exact needs two discrete elements; use tlq_map_bound for continuum data")
    n, m = A.n, B.n
    if max(n, m) > cap:
        raise ValueError(f"{max(n, m)} atoms exceed the exact-solver cap {cap}; use tlq_map_bound")
    C = cost_matrix(A, B, q)
    if n == m and A.uniform and B.uniform:
        r, c = linear_sum_assignment(C)
        P = np.zeros((n, m))
        P[r, c] = 1.0 / n
        total = math.fsum(C[r, c]) / n
    elif A.uniform and B.uniform and math.lcm(n, m) <= EXPAND_LIMIT:
        k = math.lcm(n, m)
        ri = np.repeat(np.arange(n), k // n)
        ci = np.repeat(np.arange(m), k // m)
        r, c = linear_sum_assignment(C[np.ix_(ri, ci)])
        P = np.zeros((n, m))
        np.add.at(P, (ri[r], ci[c]), 1.0 / k)
        total = math.fsum(C[ri[r], ci[c]]) / k
    else:
        P = _transport_lp(C, A.weights, B.weights)
        total = math.fsum((P * C).ravel())
    coupling = CouplingMatrix(A.points, B.points, P)
    return max(total, 0.0) ** (1.0 / q), coupling


def _transport_lp(C, a, b):
    n, m = C.shape
    k = np.arange(n * m)
    rows = np.concatenate([k // m, n + k % m])
    A_eq = sparse.csr_array((np.ones(2 * n * m), (rows, np.tile(k, 2))), shape=(n + m, n * m))
    res = linprog(C.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, b]), bounds=(0, None),
                  method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return np.clip(res.x.reshape(n, m), 0.0, None)


def tlq_brute_force(A: TLqElement, B: TLqElement, q: float = 1.0) -> float:
    """Minimum over all n! matchings; reference for small equal uniform sizes."""
    _check_q(q)
    n = A.n
    if n != B.n or not (A.uniform and B.uniform):
        raise ValueError("brute force needs equal sizes with uniform weights")
    if n > 8:
        raise ValueError("brute force limited to n <= 8")
    C = cost_matrix(A, B, q)
    perms = np.array(list(itertools.permutations(range(n))))
    best = np.min(C[np.arange(n), perms].sum(axis=1)) / n
    return float(best) ** (1.0 / q)


def circular_wasserstein(x1, x2, L: float, w1=None, w2=None, q: float = 1.0) -> float:
    """W_1 between two atomic measures on R/LZ.

    With G = F_1 - F_2 piecewise constant between merged atoms,
    W_1 = min_s int |G - s| and the minimizer s is a length-weighted median of G.
    """
    if q != 1:
        raise ValueError("circular_wasserstein supports q = 1 only; use tlq_exact with zero values")
    x1 = np.mod(np.asarray(x1, dtype=float).ravel(), L)
    x2 = np.mod(np.asarray(x2, dtype=float).ravel(), L)
    w1 = np.full(x1.size, 1.0 / x1.size) if w1 is None else np.asarray(w1, dtype=float)
    w2 = np.full(x2.size, 1.0 / x2.size) if w2 is None else np.asarray(w2, dtype=float)
    pts = np.concatenate([x1, x2])
    jumps = np.concatenate([w1, -w2])
    order = np.argsort(pts, kind="stable")
    pts, jumps = pts[order], jumps[order]
    G = np.cumsum(jumps)
    lengths = np.diff(np.append(pts, pts[0] + L))
    keep = lengths > 0
    G, lengths = G[keep], lengths[keep]
    idx = np.argsort(G, kind="stable")
    cum = np.cumsum(lengths[idx])
    s = G[idx][np.searchsorted(cum, 0.5 * cum[-1])]
    return math.fsum(lengths * np.abs(G - s))


def quantize_continuum(el: TLqElement, atoms: int = QUANT_ATOMS) -> TLqElement:
    """Atomic stand-in for a continuum element: quantile midpoints with equal weights."""
    if el.is_discrete:
        raise ValueError("element is already discrete")
    x = el.density.inverse_cdf((np.arange(atoms) + 0.5) / atoms)
    return TLqElement.discrete(x, el.curve.eval(x), el.L, quantized=atoms)


def tlq_map_bound(continuum: TLqElement, discrete: TLqElement, T: TransportMap | None = None,
                  q: float = 1.0, max_piece: float | None = None) -> float:
    """(int [|x - T x|_circ^q + |gamma(x) - g(T x)|^q] rho(x) dx)^{1/q}.

    (Id, T) is a coupling, so this bounds the TL^q distance from above.
    ``discrete.values[i]`` must be attached to ``T.samples.samples[i]``.
    """
    _check_q(q)
    if continuum.is_discrete or not discrete.is_discrete:
        raise ValueError("need a continuum element and a discrete element")
    T = T or discrete.transport_map
    if T is None:
        raise ValueError("no transport map supplied")
    if T.n != discrete.n:
        raise ValueError("transport map and discrete element differ in size")
    dens = continuum.density
    if abs(dens.L - T.density.L) > 1e-12 * dens.L:
        raise ValueError("map and continuum density live on different circles")
    mass_err = np.max(np.abs(dens.mass(T.edges[:-1], T.edges[1:]) - 1.0 / T.n))
    if mass_err > PUSH_TOL:
        raise ValueError(f"map does not push rho onto the empirical measure (block error {mass_err:.2e})")
    L = dens.L
    max_piece = L / 64.0 if max_piece is None else max_piece
    blk, a, b = T.pieces()
    # refine long pieces so the fixed rule resolves the curve term
    parts = np.maximum(1, np.ceil((b - a) / max_piece).astype(int))
    blk = np.repeat(blk, parts)
    start = np.repeat(a, parts)
    step = np.repeat((b - a) / parts, parts)
    offs = np.concatenate([np.arange(k) for k in parts])
    a = start + offs * step
    x = a[:, None] + step[:, None] * _GL_X[None, :]
    tgt = T.order[blk]
    disp = circular_distance(x, T.samples.samples[tgt][:, None], L)
    gam = continuum.curve.eval(x.ravel()).reshape(x.shape + (-1,))
    diff = gam - discrete.values[tgt][:, None, :]
    fterm = np.sqrt(np.sum(diff * diff, axis=-1))
    w = step[:, None] * _GL_W[None, :] * dens.pdf(x)
    total = math.fsum(np.sum(w * (disp**q + fterm**q), axis=1))
    return max(total, 0.0) ** (1.0 / q)


def _median_decreasing(vals) -> bool:
    return all(b < a for a, b in zip(vals, vals[1:]))


def tlq_sequence_convergence(seq, target: TLqElement, q: float = 1.0, eps: float = 0.05,
                             window: int = 3) -> dict:
    """Map-bound and stagnation table for a sequence of atomic elements.

    Elements sharing a size n are pooled by median. The sequence is declared
    converging when both median columns strictly decrease over the last
    ``window`` sizes and the final median bound is below ``eps``.
    """
    rows = {}
    for el in seq:
        T = el.transport_map
        if T is None:
            raise ValueError("every element needs a transport map")
        rows.setdefault(el.n, []).append((tlq_map_bound(target, el, T, q), stagnation_statistic(T, q)))
    ns = sorted(rows)
    bound = [float(np.median([r[0] for r in rows[n]])) for n in ns]
    stag = [float(np.median([r[1] for r in rows[n]])) for n in ns]
    tail = slice(max(0, len(ns) - window), None)
    decreasing = _median_decreasing(bound[tail]) and _median_decreasing(stag[tail])
    final_ok = bool(bound) and bound[-1] < eps
    return {
        "n": ns,
        "map_bound": bound,
        "stagnation": stag,
        "decreasing": decreasing,
        "final_bound": bound[-1] if bound else math.nan,
        "eps": eps,
        "window": window,
        "converging": bool(decreasing and final_ok),
    }
