"""Discrete energies of closed polygons: Kim-Kusner, Simon and the cosine form."""
from __future__ import annotations

import math
import time
from functools import lru_cache

import numpy as np

from .curves import Polygon, regular_polygon
from .energies import EnergyReport


def segment_distance(p1, q1, p2, q2) -> np.ndarray:
    """Euclidean distance between segments [p1, q1] and [p2, q2], broadcasting over leading axes.

    Closest parameters are clamped to the segments; parallel pairs fall back to
    the endpoint of the first segment, which still yields the exact distance.
    """
    p1, q1, p2, q2 = (np.asarray(a, dtype=float) for a in (p1, q1, p2, q2))
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a = np.sum(d1 * d1, axis=-1)
    e = np.sum(d2 * d2, axis=-1)
    b = np.sum(d1 * d2, axis=-1)
    c = np.sum(d1 * r, axis=-1)
    f = np.sum(d2 * r, axis=-1)
    if np.any(a <= 0) or np.any(e <= 0):
        raise ValueError("degenerate segment")
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-14 * a * e, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
        t = (b * s + f) / e
        s = np.where(t < 0, np.clip(-c / a, 0.0, 1.0), np.where(t > 1, np.clip((b - c) / a, 0.0, 1.0), s))
        t = np.clip(t, 0.0, 1.0)
    gap = p1 + s[..., None] * d1 - p2 - t[..., None] * d2
    return np.sqrt(np.sum(gap * gap, axis=-1))


def _cyclic_gap(m: int) -> np.ndarray:
    i = np.arange(m)
    k = np.abs(i[:, None] - i[None, :])
    return np.minimum(k, m - k)


# ---------------------------------------------------------------------------
# Kim-Kusner
# ---------------------------------------------------------------------------

def kim_kusner_energy(P: Polygon, variant: str = "endpoint") -> EnergyReport:
    """Sum over vertex pairs of (|P_i - P_j|^-2 - D(a_i, a_j)^-2) w_i w_j.

    ``variant="endpoint"`` weights vertex i by the edge leaving it;
    ``variant="averaged"`` uses the mean of the two incident edges.
    """
    t0 = time.perf_counter()
    ell = P.edge_lengths
    if variant == "endpoint":
        w = ell
    elif variant == "averaged":
        w = 0.5 * (ell + np.roll(ell, 1))
    else:
        raise ValueError(f"unknown Kim-Kusner variant {variant!r}")
    L = P.length
    a = P.cum_length[:-1]
    V = P.vertices
    diff = V[:, None, :] - V[None, :, :]
    c2 = np.einsum("ijk,ijk->ij", diff, diff)
    off = np.abs(a[:, None] - a[None, :])
    D = np.minimum(off, L - off)
    np.fill_diagonal(c2, 1.0)
    np.fill_diagonal(D, 1.0)
    if np.any(c2 == 0):
        return EnergyReport("kim-kusner", math.inf, resolution=P.m, divergent=True,
                            runtime=time.perf_counter() - t0, warnings=["coincident vertices"],
                            extras={"variant": variant})
    terms = (1.0 / c2 - 1.0 / D**2) * w[:, None] * w[None, :]
    np.fill_diagonal(terms, 0.0)
    return EnergyReport("kim-kusner", math.fsum(terms.ravel()), resolution=P.m,
                        runtime=time.perf_counter() - t0, extras={"variant": variant, "length": L})


# ---------------------------------------------------------------------------
# Simon
# ---------------------------------------------------------------------------

def simon_raw(P: Polygon) -> float:
    """Sum over non-adjacent ordered segment pairs of |X_i||X_j| / dist(X_i, X_j)^2."""
    m = P.m
    V = P.vertices
    W = np.roll(V, -1, axis=0)
    I, J = np.nonzero(_cyclic_gap(m) > 1)
    d = segment_distance(V[I], W[I], V[J], W[J])
    ell = P.edge_lengths
    with np.errstate(divide="ignore"):
        terms = ell[I] * ell[J] / d**2
    return math.fsum(terms)


@lru_cache(maxsize=None)
def _simon_regular(m: int) -> float:
    return simon_raw(regular_polygon(m))


def simon_energy(P: Polygon) -> EnergyReport:
    """Raw Simon sum normalized so that the regular m-gon scores exactly 4."""
    t0 = time.perf_counter()
    raw = simon_raw(P)
    ref = _simon_regular(P.m)
    value = raw - ref + 4.0
    rep = EnergyReport("simon", value, resolution=P.m, runtime=time.perf_counter() - t0,
                       divergent=math.isinf(value), extras={"raw": raw, "regular_raw": ref})
    if rep.divergent:
        rep.warnings.append("non-adjacent segments intersect")
    return rep


# ---------------------------------------------------------------------------
# cosine form
# ---------------------------------------------------------------------------

def _inv(v):
    return v / np.sum(v * v, axis=-1, keepdims=True)


def _circle_tangent(nxt, after):
    """Tangent at X of the circle traversed X -> N -> A, given N - X and A - X.

    Inversion about X sends the circle to the line through the images of N and
    A; its direction pulled back to X is the tangent, collinear triples included.
    """
    return _inv(nxt) - _inv(after)


def _cos_between(t1, t2):
    num = np.sum(t1 * t2, axis=-1)
    den = np.sqrt(np.sum(t1 * t1, axis=-1) * np.sum(t2 * t2, axis=-1))
    return np.clip(num / den, -1.0, 1.0)


def cos_energy(P: Polygon) -> EnergyReport:
    """Moebius-invariant cosine energy of a polygon.

    For each ordered pair of edges i, j at cyclic distance > 1 the summand is
    (1 - (cos a + cos b) / 2) times the cross ratio
    |P_{i+1} - P_i| |P_{j+1} - P_j| / (|P_j - P_i| |P_{j+1} - P_{i+1}|).
    Angle a sits at P_j between circles (P_i, P_{i+1}, P_j) and (P_j, P_{j+1}, P_i);
    angle b sits at P_{i+1} between (P_i, P_{i+1}, P_{j+1}) and (P_j, P_{j+1}, P_{i+1}).
    Each circle is oriented by its listed triple, so concyclic points in
    curve order give a = b = 0 and the regular polygon scores 0.
    """
    t0 = time.perf_counter()
    m = P.m
    V = P.vertices
    I, J = np.nonzero(_cyclic_gap(m) > 1)
    Pi, Pi1, Pj, Pj1 = V[I], V[(I + 1) % m], V[J], V[(J + 1) % m]
    if np.any(np.all(Pi == Pj, axis=-1)) or np.any(np.all(Pi1 == Pj1, axis=-1)):
        return EnergyReport("cos", math.inf, resolution=m, divergent=True,
                            runtime=time.perf_counter() - t0, warnings=["coincident vertices"])
    # at P_j: circle (P_i, P_{i+1}, P_j) runs P_j -> P_i -> P_{i+1}
    t1 = _circle_tangent(Pi - Pj, Pi1 - Pj)
    t2 = _circle_tangent(Pj1 - Pj, Pi - Pj)
    # at P_{i+1}: circle (P_j, P_{j+1}, P_{i+1}) runs P_{i+1} -> P_j -> P_{j+1}
    t3 = _circle_tangent(Pj1 - Pi1, Pi - Pi1)
    t4 = _circle_tangent(Pj - Pi1, Pj1 - Pi1)
    cos_a = _cos_between(t1, t2)
    cos_b = _cos_between(t3, t4)
    ell = P.edge_lengths
    cross = ell[I] * ell[J] / (np.linalg.norm(Pj - Pi, axis=-1) * np.linalg.norm(Pj1 - Pi1, axis=-1))
    terms = (1.0 - 0.5 * (cos_a + cos_b)) * cross
    return EnergyReport("cos", math.fsum(terms), resolution=m, runtime=time.perf_counter() - t0)
