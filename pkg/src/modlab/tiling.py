"""Graph approximations of the unit square, Sierpinski carpet and Menger sponge.

A level-k approximation tiles the space by closed cells of side 3^-k; two
cells are adjacent when their closed boxes intersect (corner contact counts).
Cell identity is carried by integer base-3 grid coordinates, so equality and
adjacency are exact; real centers are derived quantities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import BoundsError, CapabilityError
from .serialize import SCHEMA_VERSION

DEFAULT_LEVEL_CAPS = {"square": 8, "carpet": 7, "sponge": 4}

_BUILTIN_DIMS = {"square": 2, "carpet": 2, "sponge": 3}


@dataclass(frozen=True)
class Cell:
    id: int
    center: tuple
    half_width: float
    level: int


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    worst_inner_ratio: float
    worst_outer_ratio: float
    min_center_separation: float
    violations: list


class GraphApproximation:
    """Incidence graph of a cell covering, with cell geometry attached.

    Immutable after construction; safe to share across workers.
    """

    def __init__(self, space_tag, level, scale, kappa, centers, half_widths,
                 edges, grid=None, grid_extent=None):
        self.space_tag = str(space_tag)
        self.level = int(level)
        self.scale = float(scale)
        self.kappa = float(kappa)
        self.centers = np.ascontiguousarray(centers, dtype=np.float64)
        self.half_widths = np.ascontiguousarray(half_widths, dtype=np.float64)
        n = self.centers.shape[0]
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        # store each undirected pair once, i < j, lexicographically sorted
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        order = np.lexsort((hi, lo))
        self._edges = np.column_stack([lo[order], hi[order]]).astype(np.int32)
        # CSR over both directions, neighbor lists ascending
        both_src = np.concatenate([lo, hi])
        both_dst = np.concatenate([hi, lo])
        order2 = np.lexsort((both_dst, both_src))
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.indptr, both_src + 1, 1)
        np.cumsum(self.indptr, out=self.indptr)
        self.nbrs = both_dst[order2].astype(np.int32)
        self.grid = None if grid is None else np.ascontiguousarray(grid, dtype=np.int32)
        self.grid_extent = None if grid_extent is None else int(grid_extent)
        for arr in (self.centers, self.half_widths, self._edges,
                    self.indptr, self.nbrs):
            arr.setflags(write=False)
        if self.grid is not None:
            self.grid.setflags(write=False)
        self._index_map = None

    # -- basic accessors -------------------------------------------------

    @property
    def n(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def num_edges(self) -> int:
        return self._edges.shape[0]

    def edge_list(self) -> np.ndarray:
        """Undirected edges, each once as (i, j) with i<j, lexicographic."""
        return self._edges

    def neighbors(self, i: int) -> np.ndarray:
        return self.nbrs[self.indptr[i]:self.indptr[i + 1]]

    def cell(self, i: int) -> Cell:
        return Cell(int(i), tuple(float(c) for c in self.centers[i]),
                    float(self.half_widths[i]), self.level)

    def iter_cells(self) -> Iterator[Cell]:
        for i in range(self.n):
            yield self.cell(i)

    def index_map(self) -> np.ndarray:
        """Dense grid-position -> cell id lookup (-1 for removed positions)."""
        if self.grid is None:
            raise CapabilityError("approximation has no integer grid")
        if self._index_map is None:
            m = self.grid_extent
            flat = np.full(m ** self.dim, -1, dtype=np.int32)
            idx = np.zeros(self.n, dtype=np.int64)
            for d in range(self.dim):
                idx = idx * m + self.grid[:, d]
            flat[idx] = np.arange(self.n, dtype=np.int32)
            self._index_map = flat
        return self._index_map

    def grid_to_id(self, pos: np.ndarray) -> np.ndarray:
        """Cell ids for integer positions (vectorized); -1 where removed."""
        pos = np.asarray(pos, dtype=np.int64)
        m = self.grid_extent
        flat = np.zeros(pos.shape[0], dtype=np.int64)
        for d in range(self.dim):
            flat = flat * m + pos[:, d]
        return self.index_map()[flat]

    # -- serialization ---------------------------------------------------

    def to_json_doc(self) -> dict:
        return {
            "modlab_schema": SCHEMA_VERSION,
            "space_tag": self.space_tag,
            "level": self.level,
            "scale": self.scale,
            "kappa": self.kappa,
            "cells": [
                {"id": i, "center": [float(c) for c in self.centers[i]],
                 "half_width": float(self.half_widths[i])}
                for i in range(self.n)
            ],
            "edges": [[int(a), int(b)] for a, b in self._edges],
        }

    @classmethod
    def from_json_doc(cls, doc: dict) -> "GraphApproximation":
        cells = doc["cells"]
        n = len(cells)
        dim = len(cells[0]["center"]) if n else 2
        centers = np.zeros((n, dim))
        hw = np.zeros(n)
        for c in cells:
            centers[c["id"]] = c["center"]
            hw[c["id"]] = c["half_width"]
        scale = float(doc["scale"])
        grid = grid_extent = None
        if doc["space_tag"] in ("square", "carpet", "sponge", "inflated_cover") and n:
            g = centers / scale - 0.5
            gi = np.rint(g).astype(np.int32)
            if np.max(np.abs(g - gi)) < 1e-9:
                grid, grid_extent = gi, int(round(1.0 / scale))
        return cls(doc["space_tag"], doc["level"], scale, doc["kappa"],
                   centers, hw, np.array(doc["edges"], dtype=np.int64).reshape(-1, 2),
                   grid=grid, grid_extent=grid_extent)


# -- builders -------------------------------------------------------------


def _check_level(space: str, k: int, cap: Optional[int]) -> None:
    limit = DEFAULT_LEVEL_CAPS[space] if cap is None else int(cap)
    if not 0 <= k <= limit:
        raise BoundsError(
            f"{space} level must satisfy 0 <= k <= {limit}, got {k}")


def _grid_edges(grid: np.ndarray, extent: int, reach: int) -> np.ndarray:
    """Edges between occupied positions within Chebyshev distance `reach`."""
    n, dim = grid.shape
    flat = np.full(extent ** dim, -1, dtype=np.int32)
    idx = np.zeros(n, dtype=np.int64)
    for d in range(dim):
        idx = idx * extent + grid[:, d]
    flat[idx] = np.arange(n)
    offsets = []
    rng = range(-reach, reach + 1)
    if dim == 2:
        cand = [(a, b) for a in rng for b in rng]
    else:
        cand = [(a, b, c) for a in rng for b in rng for c in rng]
    for off in cand:
        if off > tuple([0] * dim):  # lexicographically positive: each pair once
            offsets.append(off)
    srcs, dsts = [], []
    for off in offsets:
        shifted = grid.astype(np.int64) + np.array(off, dtype=np.int64)
        ok = np.ones(n, dtype=bool)
        for d in range(dim):
            ok &= (shifted[:, d] >= 0) & (shifted[:, d] < extent)
        fi = np.zeros(ok.sum(), dtype=np.int64)
        sh = shifted[ok]
        for d in range(dim):
            fi = fi * extent + sh[:, d]
        other = flat[fi]
        keep = other >= 0
        srcs.append(np.flatnonzero(ok)[keep])
        dsts.append(other[keep])
    if not srcs:
        return np.zeros((0, 2), dtype=np.int64)
    return np.column_stack([np.concatenate(srcs), np.concatenate(dsts)])


def _finish_builtin(space: str, k: int, grid: np.ndarray) -> GraphApproximation:
    dim = grid.shape[1]
    extent = 3 ** k
    s = 3.0 ** (-k)
    centers = (grid.astype(np.float64) + 0.5) * s
    hw = np.full(grid.shape[0], s / 2.0)
    edges = _grid_edges(grid, extent, reach=1)
    kappa = _computed_kappa(s, s / 2.0, dim, grid.shape[0])
    return GraphApproximation(space, k, s, kappa, centers, hw, edges,
                              grid=grid, grid_extent=extent)


def _computed_kappa(scale: float, half_width: float, dim: int, n: int) -> float:
    # smallest kappa satisfying: circumradius <= kappa*s, s/kappa <= inradius,
    # and inner balls (radius s/kappa) disjoint at the minimal grid pitch s
    ks = [half_width * np.sqrt(dim) / scale, scale / half_width]
    if n >= 2:
        ks.append(2.0)  # grid pitch equals the scale for all builders
    return float(max(ks))


def build_square(k: int, cap: Optional[int] = None) -> GraphApproximation:
    """Tiling of [0,1]^2 into 3^k x 3^k closed cells, no removals."""
    _check_level("square", k, cap)
    m = 3 ** k
    xs, ys = np.meshgrid(np.arange(m, dtype=np.int32),
                         np.arange(m, dtype=np.int32), indexing="ij")
    grid = np.column_stack([xs.ravel(), ys.ravel()])
    return _finish_builtin("square", k, grid)


def _base3_digits(v: np.ndarray, k: int) -> np.ndarray:
    """Digits (most significant first), shape (k, len(v))."""
    out = np.zeros((k, v.size), dtype=np.int32)
    rem = v.copy()
    for t in range(k - 1, -1, -1):
        out[t] = rem % 3
        rem //= 3
    return out


def build_carpet(k: int, cap: Optional[int] = None) -> GraphApproximation:
    """Sierpinski carpet tiling: positions whose base-3 digit pairs never
    equal (1,1) at the same digit position."""
    _check_level("carpet", k, cap)
    m = 3 ** k
    coords = np.arange(m, dtype=np.int32)
    dig = _base3_digits(coords, k) if k else np.zeros((0, 1), dtype=np.int32)
    xs, ys = np.meshgrid(coords, coords, indexing="ij")
    keep = np.ones((m, m), dtype=bool)
    for t in range(k):
        keep &= ~((dig[t][:, None] == 1) & (dig[t][None, :] == 1))
    grid = np.column_stack([xs[keep], ys[keep]])
    order = np.lexsort((grid[:, 1], grid[:, 0]))
    return _finish_builtin("carpet", k, grid[order])


def build_sponge(k: int, cap: Optional[int] = None) -> GraphApproximation:
    """Menger sponge tiling: keep (a,b,c) iff at every digit position at most
    one of the three base-3 digits equals 1."""
    _check_level("sponge", k, cap)
    m = 3 ** k
    coords = np.arange(m, dtype=np.int32)
    dig = _base3_digits(coords, k) if k else np.zeros((0, 1), dtype=np.int32)
    keep = np.ones((m, m, m), dtype=bool)
    for t in range(k):
        one = dig[t] == 1
        a = one[:, None, None]
        b = one[None, :, None]
        c = one[None, None, :]
        keep &= ~((a & b) | (a & c) | (b & c))
    xs, ys, zs = np.meshgrid(coords, coords, coords, indexing="ij")
    grid = np.column_stack([xs[keep], ys[keep], zs[keep]])
    order = np.lexsort((grid[:, 2], grid[:, 1], grid[:, 0]))
    return _finish_builtin("sponge", k, grid[order])


def build_inflated_cover(base: GraphApproximation,
                         inflation: float) -> GraphApproximation:
    """Overlapping cover with the base cells inflated about their centers.

    Produces a second, genuinely different approximation on the same scale;
    useful for testing that moduli depend on the approximation only up to a
    bounded factor.
    """
    if not 1.0 < inflation <= 3.0:
        raise BoundsError(
            f"inflation must satisfy 1 < inflation <= 3, got {inflation}")
    if base.grid is None:
        raise CapabilityError("inflated cover requires a grid-based base")
    hw = base.half_widths * inflation
    # closed boxes overlap iff |delta center|_inf <= 2*hw, i.e. grid reach
    reach_f = 2.0 * float(hw[0]) / base.scale
    reach = int(np.floor(reach_f + 1e-9))
    edges = _grid_edges(base.grid, base.grid_extent, reach=reach)
    sep = base.scale  # grid pitch; unchanged by inflation
    kappa = max(float(hw[0]) * np.sqrt(base.dim) / base.scale,
                base.scale / float(hw[0]),
                2.0 * base.scale / sep if base.n >= 2 else 1.0)
    return GraphApproximation("inflated_cover", base.level, base.scale, kappa,
                              base.centers, hw, edges,
                              grid=base.grid, grid_extent=base.grid_extent)


# -- hand-built covers and brute-force geometry ---------------------------


def brute_adjacency(centers: np.ndarray, half_widths: np.ndarray) -> np.ndarray:
    """All closed-box intersections, O(n^2) in blocks; testing oracle."""
    n = centers.shape[0]
    out = []
    block = max(1, int(2**22 // max(n, 1)))
    for a in range(0, n, block):
        b = min(n, a + block)
        d = np.abs(centers[a:b, None, :] - centers[None, :, :])
        r = (half_widths[a:b, None] + half_widths[None, :])[..., None]
        touch = np.all(d <= r + 1e-12, axis=2)
        ii, jj = np.nonzero(touch)
        ii = ii + a
        keep = ii < jj
        out.append(np.column_stack([ii[keep], jj[keep]]))
    return np.concatenate(out) if out else np.zeros((0, 2), dtype=np.int64)


def from_cells(space_tag, level, scale, kappa, centers, half_widths,
               edges=None) -> GraphApproximation:
    """Assemble a cover by hand; adjacency defaults to the brute-force rule."""
    centers = np.asarray(centers, dtype=np.float64)
    half_widths = np.asarray(half_widths, dtype=np.float64)
    if edges is None:
        edges = brute_adjacency(centers, half_widths)
    return GraphApproximation(space_tag, level, scale, kappa, centers,
                              half_widths, edges)


# -- validation ------------------------------------------------------------


def validate_approximation(G: GraphApproximation) -> ValidationReport:
    """Check the ball-sandwich axiom and inner-ball disjointness.

    Inner balls are open, so centers separated by exactly twice the inner
    radius still pass. Failures are reported, never raised.
    """
    s, kappa = G.scale, G.kappa
    inner_r = s / kappa
    tol = 1e-12
    violations = []
    inradius = G.half_widths
    circum = G.half_widths * np.sqrt(G.dim)
    inner_ratio = inner_r / inradius
    outer_ratio = circum / (kappa * s)
    for i in np.flatnonzero(inner_ratio > 1 + tol):
        violations.append((int(i), "inner_ball"))
    for i in np.flatnonzero(outer_ratio > 1 + tol):
        violations.append((int(i), "outer_ball"))
    if G.n >= 2:
        tree = cKDTree(G.centers)
        dd, _ = tree.query(G.centers, k=2)
        min_sep = float(np.min(dd[:, 1]))
        bad = tree.query_pairs(r=2 * inner_r * (1 - 1e-9), output_type="ndarray")
        for i, j in bad:
            violations.append((int(i), "inner_disjoint"))
            violations.append((int(j), "inner_disjoint"))
    else:
        min_sep = float("inf")
    violations.sort()
    return ValidationReport(
        passed=not violations,
        worst_inner_ratio=float(np.max(inner_ratio)) if G.n else 0.0,
        worst_outer_ratio=float(np.max(outer_ratio)) if G.n else 0.0,
        min_center_separation=min_sep,
        violations=violations,
    )


def is_connected(G: GraphApproximation) -> bool:
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components
    if G.n <= 1:
        return True
    data = np.ones(G.nbrs.size, dtype=np.int8)
    mat = csr_matrix((data, G.nbrs, G.indptr), shape=(G.n, G.n))
    ncomp, _ = connected_components(mat, directed=False)
    return ncomp == 1


def build_space(space: str, k: int, cap: Optional[int] = None) -> GraphApproximation:
    if space == "square":
        return build_square(k, cap)
    if space == "carpet":
        return build_carpet(k, cap)
    if space == "sponge":
        return build_sponge(k, cap)
    raise CapabilityError(f"unknown space {space!r}")
