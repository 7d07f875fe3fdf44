"""Densities on R/LZ, reproducible i.i.d. sampling and empirical-measure statistics."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .curves import reduce_param, signed_offset

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


# ---------------------------------------------------------------------------
# counter-based uniforms
# ---------------------------------------------------------------------------

def counter_uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Uniforms in [0, 1) at stream indices start .. start+count-1.

    Philox4x64 keyed by ``seed``: index i lives in counter block i // 4, lane i % 4,
    so every value is a pure function of (seed, i).
    """
    bg = np.random.Philox(key=int(seed) & (2**64 - 1))
    bg.advance(start // 4)
    gen = np.random.Generator(bg)
    lead = start % 4
    if lead:
        gen.random(lead)
    return gen.random(count)


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

class Density:
    """Probability density on R/LZ (parameter domain of a curve)."""

    kind = "density"

    def __init__(self, L: float):
        if not L > 0:
            raise ValueError("period must be positive")
        self.L = float(L)

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        """F on [0, L) with F(0) = 0; arguments are reduced mod L."""
        raise NotImplementedError

    def inverse_cdf(self, u):
        raise NotImplementedError

    @property
    def lower_bound(self) -> float:
        raise NotImplementedError

    def cdf_unwrapped(self, x):
        """Periodic lift of F: floor(x / L) + F(x mod L)."""
        x = np.asarray(x, dtype=float)
        return np.floor(x / self.L) + self.cdf(x)

    def mass(self, a, b):
        """rho-mass of [a, b] (unwrapped, a <= b)."""
        return self.cdf_unwrapped(b) - self.cdf_unwrapped(a)

    def to_spec(self) -> dict:
        return {"kind": self.kind}

    def __repr__(self):
        return f"{type(self).__name__}({self.to_spec()}, L={self.L:.6g})"


class UniformDensity(Density):
    kind = "uniform"

    def pdf(self, x):
        return np.full(np.shape(x), 1.0 / self.L)

    def cdf(self, x):
        return reduce_param(np.asarray(x, dtype=float), self.L) / self.L

    def inverse_cdf(self, u):
        return np.asarray(u, dtype=float) * self.L

    @property
    def lower_bound(self) -> float:
        return 1.0 / self.L


class CosineDensity(Density):
    """rho(x) = (1 + c cos(2 pi x / L)) / L with |c| < 1."""

    kind = "cosine"

    def __init__(self, L: float, c: float):
        super().__init__(L)
        if not abs(c) < 1:
            raise ValueError(f"cosine density needs |c| < 1, got {c}")
        self.c = float(c)

    def pdf(self, x):
        return (1.0 + self.c * np.cos(2.0 * math.pi * np.asarray(x, dtype=float) / self.L)) / self.L

    def cdf(self, x):
        x = reduce_param(np.asarray(x, dtype=float), self.L)
        return x / self.L + self.c * np.sin(2.0 * math.pi * x / self.L) / (2.0 * math.pi)

    def inverse_cdf(self, u):
        u = np.asarray(u, dtype=float)
        # Newton in theta = 2 pi x / L on theta + c sin(theta) = 2 pi u, safeguarded by bisection
        target = 2.0 * math.pi * u
        lo = np.zeros_like(target)
        hi = np.full_like(target, 2.0 * math.pi)
        th = target.copy()
        for _ in range(60):
            g = th + self.c * np.sin(th) - target
            lo = np.where(g < 0, th, lo)
            hi = np.where(g >= 0, th, hi)
            step = g / (1.0 + self.c * np.cos(th))
            new = th - step
            bad = (new <= lo) | (new >= hi)
            new = np.where(bad, 0.5 * (lo + hi), new)
            if np.all(np.abs(new - th) <= 1e-15 * (1.0 + np.abs(th))):
                th = new
                break
            th = new
        return th * self.L / (2.0 * math.pi)

    @property
    def lower_bound(self) -> float:
        return (1.0 - abs(self.c)) / self.L

    def to_spec(self) -> dict:
        return {"kind": "cosine", "c": self.c}


class TabulatedDensity(Density):
    """Piecewise-linear periodic density through (x_k, r_k), normalized to mass one."""

    kind = "tabulated"

    def __init__(self, L: float, nodes, values, source: str | None = None):
        super().__init__(L)
        x = np.asarray(nodes, dtype=float)
        r = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != r.shape or x.size < 2:
            raise ValueError("tabulated density needs matching 1-D node and value arrays")
        if np.any(np.diff(x) <= 0) or x[0] < 0 or x[-1] >= L:
            raise ValueError("tabulated density nodes must be strictly increasing in [0, L)")
        if np.any(r < 0):
            raise ValueError("density values must be nonnegative")
        # periodic closure: last node connects to first + L; prepend wrap cell from 0
        xe = np.concatenate([x, [x[0] + L]])
        re = np.concatenate([r, [r[0]]])
        if x[0] > 0:
            r0 = r[-1] + (r[0] - r[-1]) * (L - x[-1]) / (x[0] + L - x[-1])
            xe = np.concatenate([[0.0], xe[:-1], [L]])
            re = np.concatenate([[r0], re[:-1], [r0]])
        cell = 0.5 * (re[:-1] + re[1:]) * np.diff(xe)
        total = math.fsum(cell)
        if not total > 0:
            raise ValueError("tabulated density has zero mass")
        self._x = xe
        self._r = re / total
        self._cum = np.concatenate([[0.0], np.cumsum(cell / total)])
        self._cum[-1] = 1.0
        self.source = source

    def pdf(self, x):
        x = reduce_param(np.asarray(x, dtype=float), self.L)
        return np.interp(x, self._x, self._r)

    def cdf(self, x):
        x = reduce_param(np.asarray(x, dtype=float), self.L)
        k = np.clip(np.searchsorted(self._x, x, side="right") - 1, 0, self._x.size - 2)
        t = x - self._x[k]
        dx = self._x[k + 1] - self._x[k]
        slope = (self._r[k + 1] - self._r[k]) / dx
        return self._cum[k] + self._r[k] * t + 0.5 * slope * t * t

    def inverse_cdf(self, u):
        u = np.asarray(u, dtype=float)
        k = np.clip(np.searchsorted(self._cum, u, side="right") - 1, 0, self._x.size - 2)
        need = u - self._cum[k]
        r0 = self._r[k]
        dx = self._x[k + 1] - self._x[k]
        slope = (self._r[k + 1] - r0) / dx
        # root of r0 t + slope t^2 / 2 = need in the form that avoids cancellation
        disc = np.sqrt(np.maximum(r0 * r0 + 2.0 * slope * need, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(r0 + disc > 0, 2.0 * need / (r0 + disc), 0.0)
        return np.clip(self._x[k] + np.minimum(t, dx), 0.0, np.nextafter(self.L, 0))

    @property
    def lower_bound(self) -> float:
        return float(np.min(self._r))

    def to_spec(self) -> dict:
        spec = {"kind": "tabulated"}
        if self.source:
            spec["file"] = self.source
        else:
            spec["nodes"] = self._x[:-1].tolist()
            spec["values"] = self._r[:-1].tolist()
        return spec


def load_tabulated_density(path, L: float) -> TabulatedDensity:
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            a, b = line.split()[:2]
            rows.append((float(a), float(b)))
    arr = np.array(rows)
    return TabulatedDensity(L, arr[:, 0], arr[:, 1], source=str(path))


def density_from_spec(spec, L: float, base_dir=None) -> Density:
    if spec is None:
        return UniformDensity(L)
    if isinstance(spec, str):
        spec = json.loads(spec) if spec.lstrip().startswith("{") else json.loads(Path(spec).read_text())
    kind = spec.get("kind")
    if kind == "uniform":
        return UniformDensity(L)
    if kind == "cosine":
        return CosineDensity(L, float(spec["c"]))
    if kind == "tabulated":
        if "file" in spec:
            path = Path(spec["file"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            return load_tabulated_density(path, L)
        return TabulatedDensity(L, spec["nodes"], spec["values"])
    raise ValueError(f"unknown density kind {kind!r}")


# ---------------------------------------------------------------------------
# sample sets
# ---------------------------------------------------------------------------

class DuplicateSampleError(RuntimeError):
    pass


@dataclass(frozen=True)
class SampleSet:
    """n parameters on R/LZ with the seed and density that produced them."""

    samples: np.ndarray
    density: Density
    seed: int | None = None
    sorted_index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.array(self.samples, dtype=float)
        if x.ndim != 1 or x.size < 1:
            raise ValueError("a sample set needs at least one sample")
        x.setflags(write=False)
        order = np.argsort(x, kind="stable")
        order.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sorted_index", order)

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def L(self) -> float:
        return self.density.L

    @property
    def sorted(self) -> np.ndarray:
        return self.samples[self.sorted_index]

    def has_duplicates(self) -> bool:
        s = self.sorted
        return bool(np.any(s[1:] == s[:-1]))

    @classmethod
    def from_points(cls, points, density: Density) -> "SampleSet":
        return cls(reduce_param(np.asarray(points, dtype=float), density.L), density, None)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "x"])
            for i, v in enumerate(self.samples):
                w.writerow([i, repr(float(v))])
        sidecar = {"seed": self.seed, "n": self.n, "L": self.L, "density": self.density.to_spec()}
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")

    @classmethod
    def from_csv(cls, path, base_dir=None) -> "SampleSet":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        with path.open() as fh:
            rows = list(csv.DictReader(fh))
        x = np.array([float(r["x"]) for r in sorted(rows, key=lambda r: int(r["index"]))])
        dens = density_from_spec(meta["density"], meta["L"], base_dir)
        return cls(x, dens, meta["seed"])


def sample_iid(density: Density, n: int, seed: int, max_retries: int = 3) -> SampleSet:
    """n i.i.d. draws by inverse-CDF on the counter stream of ``seed``.

    Exact duplicates (probability zero in exact arithmetic) are redrawn from
    fresh stream indices past n; more than ``max_retries`` rounds is an error.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    u = counter_uniforms(seed, 0, n)
    x = reduce_param(density.inverse_cdf(u), density.L)
    next_index = n
    for _ in range(max_retries + 1):
        order = np.argsort(x, kind="stable")
        s = x[order]
        dup = np.nonzero(s[1:] == s[:-1])[0] + 1
        if dup.size == 0:
            return SampleSet(x, density, seed)
        idx = np.sort(order[dup])
        fresh = counter_uniforms(seed, next_index, idx.size)
        next_index += idx.size
        x = x.copy()
        x[idx] = reduce_param(density.inverse_cdf(fresh), density.L)
    raise DuplicateSampleError(f"duplicate samples persist after {max_retries} retries (seed={seed})")


def gc_statistic(S: SampleSet) -> float:
    """sup_x |F_n(x) - F(x)|, attained at the jumps of the empirical CDF."""
    n = S.n
    F = S.density.cdf(S.sorted)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


# ---------------------------------------------------------------------------
# quantile transport maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransportMap:
    """Monotone map pushing rho dx onto the empirical measure of S.

    The circle is cut at ``cut``; block k is the unwrapped arc
    ``[edges[k], edges[k+1]]`` with rho-mass 1/n and is sent to sample
    ``order[k]`` (an index into ``S.samples``).
    """

    samples: SampleSet
    cut: float
    edges: np.ndarray
    order: np.ndarray
    sup_displacement: float

    @property
    def n(self) -> int:
        return self.samples.n

    @property
    def density(self) -> Density:
        return self.samples.density

    @property
    def targets(self) -> np.ndarray:
        return self.samples.samples[self.order]

    def block_of(self, x) -> np.ndarray:
        L = self.density.L
        t = self.cut + reduce_param(np.asarray(x, dtype=float) - self.cut, L)
        k = np.searchsorted(self.edges, t, side="left") - 1
        return np.clip(k, 0, self.n - 1)

    def __call__(self, x):
        return self.targets[self.block_of(x)]

    def block_masses(self) -> np.ndarray:
        return self.density.mass(self.edges[:-1], self.edges[1:])

    def pieces(self):
        """Sub-intervals of every block on which the circular displacement is linear.

        Returns (block, a, b) arrays; a block is split where it contains its target
        or the target's antipode.
        """
        L = self.density.L
        lo, hi = self.edges[:-1], self.edges[1:]
        X = self.targets
        blocks, A, B = [], [], []
        cuts = []
        for shift in (0.0, 0.5 * L):
            # representative of X + shift nearest to the block
            r = X + shift
            r = r + L * np.round(((lo + hi) * 0.5 - r) / L)
            cuts.append(r)
        pts = np.stack([lo, *cuts, hi], axis=1)
        pts[:, 1:-1] = np.clip(pts[:, 1:-1], lo[:, None], hi[:, None])
        pts = np.sort(pts, axis=1)
        for j in range(pts.shape[1] - 1):
            a, b = pts[:, j], pts[:, j + 1]
            keep = b > a
            blocks.append(np.nonzero(keep)[0])
            A.append(a[keep])
            B.append(b[keep])
        return np.concatenate(blocks), np.concatenate(A), np.concatenate(B)


def _displacement_sup(edges, X, L):
    """max over blocks of sup_{x in block} |x - X_k|_circ."""
    lo, hi = edges[:-1], edges[1:]
    d_lo = np.abs(signed_offset(lo, X, L))
    d_hi = np.abs(signed_offset(hi, X, L))
    sup = np.maximum(d_lo, d_hi)
    # the antipode of X inside the block attains L/2
    anti = X + 0.5 * L
    anti = anti + L * np.round(((lo + hi) * 0.5 - anti) / L)
    sup = np.where((anti > lo) & (anti < hi), 0.5 * L, sup)
    return float(np.max(sup))


def _build_map(S: SampleSet, cut: float) -> TransportMap:
    dens, L, n = S.density, S.L, S.n
    rel = reduce_param(S.samples - cut, L)
    order = np.argsort(rel, kind="stable")
    # edges are the inverse of the lifted CDF at F(cut) + k/n, which lands in [cut, cut + L]
    u = float(dens.cdf(cut)) + np.arange(n + 1) / n
    whole = np.floor(u)
    edges = whole * L + dens.inverse_cdf(u - whole)
    edges[0], edges[-1] = cut, cut + L
    edges = np.clip(np.maximum.accumulate(edges), cut, cut + L)
    X = cut + rel[order]
    sup = _displacement_sup(edges, X, L)
    return TransportMap(S, float(cut), edges, order, sup)


def quantile_transport_map(density: Density, S: SampleSet, cut=0.0) -> TransportMap:
    """Quantile map of ``density`` onto the empirical measure of ``S``.

    ``cut`` is a parameter or ``"optimize"``; the latter tries every sample
    position as the cut and keeps the map with the smallest sup displacement.
    """
    if S.density is not density and S.density.to_spec() != density.to_spec():
        S = SampleSet(S.samples, density, S.seed)
    if cut != "optimize":
        return _build_map(S, float(reduce_param(float(cut), S.L)))
    if isinstance(density, UniformDensity):
        best = _best_uniform_cut(S)
    else:
        best = min(S.samples, key=lambda c: (_build_map(S, c).sup_displacement, c))
    return _build_map(S, float(best))


def _best_uniform_cut(S: SampleSet) -> float:
    """Optimal sample cut for uniform rho in O(n log n).

    With u_(j) the sorted normalized samples and e_j = u_(j) - j/n, cutting at sample k
    gives block offsets e_j - e_k, so the sup displacement is
    max(max e - e_k, 1/n + e_k - min e) * L whenever it stays below L/2.
    """
    n, L = S.n, S.L
    u = S.sorted / L
    e = u - np.arange(n) / n
    hi, lo = e.max(), e.min()
    cost = np.maximum(hi - e, 1.0 / n + e - lo)
    if np.max(cost) * L >= 0.25 * L:
        return float(min(S.samples, key=lambda c: (_build_map(S, c).sup_displacement, c)))
    k = int(np.argmin(cost))
    return float(S.sorted[k])


def stagnation_statistic(T: TransportMap, q: float = 1.0) -> float:
    """Integral of |x - T(x)|_circ^q rho(x) dx, exact per piece for uniform rho."""
    if q < 1:
        raise ValueError("q must be >= 1")
    L = T.density.L
    blk, a, b = T.pieces()
    X = T.targets[blk]
    da = np.abs(signed_offset(a, X, L))
    db = np.abs(signed_offset(b, X, L))
    if isinstance(T.density, UniformDensity):
        # displacement is linear with slope +-1 on each piece
        vals = np.abs(db ** (q + 1) - da ** (q + 1)) / ((q + 1) * L)
        return float(math.fsum(vals))
    x = a[:, None] + (b - a)[:, None] * _GL_X[None, :]
    d = np.abs(signed_offset(x, X[:, None], L))
    w = (b - a)[:, None] * _GL_W[None, :] * T.density.pdf(x)
    return float(math.fsum(np.sum(w * d**q, axis=1)))
