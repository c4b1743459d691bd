"""Curve families on graph approximations and their separation oracles.

A discrete curve is the chain of cells a continuum curve meets; conversely
every chain of pairwise-adjacent closed cells is realizable by a continuum
curve through shared boundary points. The rho-length of a curve is the sum
of rho over its distinct cells, endpoints included.

Family semantics (reduced forms, used consistently by the oracle and the
brute-force enumerator):

* connect(A, B[, region]): chains with first cell in A, last cell in B,
  all cells in region (A and B are always included in the region).
* cross_rect(rect, axis): connect between the two faces of the rectangle
  perpendicular to the axis, restricted to cells meeting the rectangle.
* diam_at_least(d0): chains whose endpoint cells have centers >= d0 apart.
  Chains merely containing such a pair admit one of these as a subcurve,
  so both readings have the same modulus and the same minimal length.
* tube(waypoints, epsilon): chains inside the epsilon-neighborhood of the
  waypoint polyline that visit the waypoint balls in order, starting at
  the first match and ending when the match completes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .errors import (DegenerateContinuumError, FamilySpecError, SizeError)
from .tiling import GraphApproximation


# -- densities and curves ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class Density:
    """Nonnegative weight function on the cells of an approximation."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 1:
            raise ValueError("density must be a flat vector")
        if not np.all(np.isfinite(vals)):
            raise ValueError("density entries must be finite")
        if np.any(vals < 0):
            raise ValueError("density entries must be nonnegative")
        object.__setattr__(self, "values", vals)

    @classmethod
    def uniform(cls, G: GraphApproximation, value: float) -> "Density":
        return cls(np.full(G.n, float(value)))

    @classmethod
    def zeros(cls, G: GraphApproximation) -> "Density":
        return cls(np.zeros(G.n))

    @classmethod
    def indicator(cls, G: GraphApproximation, ids) -> "Density":
        v = np.zeros(G.n)
        v[np.asarray(ids, dtype=np.int64)] = 1.0
        return cls(v)


@dataclass(frozen=True)
class DiscreteCurve:
    cells: tuple

    def __post_init__(self):
        if not self.cells:
            raise ValueError("curve must be nonempty")
        cells = tuple(int(c) for c in self.cells)
        for a, b in zip(cells, cells[1:]):
            if a == b:
                raise ValueError("consecutive duplicate cell in curve")
        object.__setattr__(self, "cells", cells)

    def __len__(self):
        return len(self.cells)

    def check_adjacent(self, G: GraphApproximation) -> bool:
        for a, b in zip(self.cells, self.cells[1:]):
            if b not in G.neighbors(a):
                return False
        return True


def curve_length(rho: np.ndarray, cells) -> float:
    """Set-sum rho-length: each distinct cell counted once."""
    uniq = np.unique(np.asarray(cells, dtype=np.int64))
    return float(np.sum(rho[uniq]))


# -- cell-set predicates ----------------------------------------------------


@dataclass(frozen=True)
class BoxSet:
    """Cells whose closed cell intersects the closed axis-aligned box."""

    bounds: tuple  # per-axis (lo, hi); degenerate boxes select a slice

    def __post_init__(self):
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        for lo, hi in b:
            if hi < lo:
                raise FamilySpecError("box bounds must satisfy lo <= hi")
        object.__setattr__(self, "bounds", b)

    def resolve(self, G: GraphApproximation) -> np.ndarray:
        mask = np.ones(G.n, dtype=bool)
        for d, (lo, hi) in enumerate(self.bounds):
            c = G.centers[:, d]
            h = G.half_widths
            mask &= (c - h <= hi + 1e-12) & (c + h >= lo - 1e-12)
        return np.flatnonzero(mask).astype(np.int64)


@dataclass(frozen=True)
class IdSet:
    ids: tuple

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))

    def resolve(self, G: GraphApproximation) -> np.ndarray:
        out = np.unique(np.asarray(self.ids, dtype=np.int64))
        if out.size and (out[0] < 0 or out[-1] >= G.n):
            raise FamilySpecError("cell id out of range")
        return out


CellSet = Union[BoxSet, IdSet]


def side_box(dim: int, axis: int, at_one: bool) -> BoxSet:
    """Degenerate box selecting the cells touching one face of [0,1]^dim."""
    bounds = [(0.0, 1.0)] * dim
    bounds[axis] = (1.0, 1.0) if at_one else (0.0, 0.0)
    return BoxSet(tuple(bounds))


# -- family specifications --------------------------------------------------


@dataclass(frozen=True)
class Connect:
    a: CellSet
    b: CellSet
    region: Optional[CellSet] = None


@dataclass(frozen=True)
class CrossRect:
    rect: tuple  # per-axis (lo, hi)
    axis: str = "horizontal"  # horizontal: joins the two x-faces

    def __post_init__(self):
        if self.axis not in ("horizontal", "vertical"):
            raise FamilySpecError("axis must be horizontal or vertical")
        object.__setattr__(self, "rect",
                           tuple((float(lo), float(hi)) for lo, hi in self.rect))


@dataclass(frozen=True)
class DiamAtLeast:
    d0: float

    def __post_init__(self):
        if not self.d0 > 0:
            raise FamilySpecError("d0 must be positive")


@dataclass(frozen=True)
class Tube:
    waypoints: tuple  # ordered coordinate points
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise FamilySpecError("epsilon must be positive")
        pts = tuple(tuple(float(x) for x in p) for p in self.waypoints)
        if len(pts) < 1:
            raise FamilySpecError("tube needs at least one waypoint")
        for p, q in zip(pts, pts[1:]):
            gap = math.dist(p, q)
            if gap >= self.epsilon:
                raise FamilySpecError(
                    "consecutive waypoints must be closer than epsilon "
                    f"(gap {gap:.6g} >= {self.epsilon:.6g})")
        object.__setattr__(self, "waypoints", pts)


CurveFamilySpec = Union[Connect, CrossRect, DiamAtLeast, Tube]


def spec_to_json(spec: CurveFamilySpec) -> dict:
    def cs(c):
        if c is None:
            return None
        if isinstance(c, BoxSet):
            return {"box": [list(b) for b in c.bounds]}
        return {"ids": list(c.ids)}

    if isinstance(spec, Connect):
        return {"variant": "connect", "a": cs(spec.a), "b": cs(spec.b),
                "region": cs(spec.region)}
    if isinstance(spec, CrossRect):
        return {"variant": "cross_rect", "rect": [list(b) for b in spec.rect],
                "axis": spec.axis}
    if isinstance(spec, DiamAtLeast):
        return {"variant": "diam_at_least", "d0": spec.d0}
    if isinstance(spec, Tube):
        return {"variant": "tube", "waypoints": [list(p) for p in spec.waypoints],
                "epsilon": spec.epsilon}
    raise FamilySpecError(f"unknown family spec {type(spec)!r}")


def spec_from_json(doc: dict) -> CurveFamilySpec:
    def cs(d):
        if d is None:
            return None
        if "box" in d:
            return BoxSet(tuple(tuple(b) for b in d["box"]))
        if "ids" in d:
            return IdSet(tuple(d["ids"]))
        raise FamilySpecError("cell set needs 'box' or 'ids'")

    var = doc.get("variant")
    if var == "connect":
        return Connect(cs(doc["a"]), cs(doc["b"]), cs(doc.get("region")))
    if var == "cross_rect":
        return CrossRect(tuple(tuple(b) for b in doc["rect"]),
                         doc.get("axis", "horizontal"))
    if var == "diam_at_least":
        return DiamAtLeast(float(doc["d0"]))
    if var == "tube":
        return Tube(tuple(tuple(p) for p in doc["waypoints"]),
                    float(doc["epsilon"]))
    raise FamilySpecError(f"unknown family variant {var!r}")


# -- resolution -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ResolvedFamily:
    kind: str  # empty | connect | diam | tube
    sources: Optional[np.ndarray] = None
    targets: Optional[np.ndarray] = None
    region_mask: Optional[np.ndarray] = None  # uint8 over cells
    via_cell: Optional[int] = None
    d0: Optional[float] = None
    member: Optional[np.ndarray] = None  # (n, num_sets) uint8
    waypoints: Optional[np.ndarray] = None  # polyline actually used
    epsilon: Optional[float] = None
    note: str = ""


def _point_box_dist(points: np.ndarray, centers: np.ndarray,
                    half_widths: np.ndarray) -> np.ndarray:
    """Distance from each point (rows) to each closed cell box (cols)."""
    gap = np.abs(points[:, None, :] - centers[None, :, :]) \
        - half_widths[None, :, None]
    np.maximum(gap, 0.0, out=gap)
    return np.sqrt(np.sum(gap * gap, axis=2))


def _segment_box_dist(a: np.ndarray, b: np.ndarray, centers: np.ndarray,
                      half_widths: np.ndarray) -> np.ndarray:
    """Distance from segment [a,b] to every cell box (convex in the segment
    parameter; golden-section to machine-level precision)."""
    d = b - a

    def f(t):
        pts = a[None, :] + t[:, None] * d[None, :]
        gap = np.abs(pts - centers) - half_widths[:, None]
        np.maximum(gap, 0.0, out=gap)
        return np.sum(gap * gap, axis=1)

    lo = np.zeros(centers.shape[0])
    hi = np.ones(centers.shape[0])
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    for _ in range(70):
        x1 = hi - invphi * (hi - lo)
        x2 = lo + invphi * (hi - lo)
        take = f(x1) > f(x2)  # minimum lies in [x1, hi]
        lo = np.where(take, x1, lo)
        hi = np.where(take, hi, x2)
    return np.sqrt(np.minimum(f(lo), f(hi)))


def _resample_polyline(pts: np.ndarray, spacing: float) -> np.ndarray:
    """Insert points so consecutive waypoints are at most `spacing` apart."""
    out = [pts[0]]
    for a, b in zip(pts[:-1], pts[1:]):
        gap = float(np.linalg.norm(b - a))
        steps = max(1, int(math.ceil(gap / spacing - 1e-12)))
        for s in range(1, steps + 1):
            out.append(a + (b - a) * (s / steps))
    return np.asarray(out)


def _space_diameter(G: GraphApproximation) -> float:
    """Largest center-to-center distance between cells."""
    if G.n <= 1:
        return 0.0
    pts = G.centers
    try:
        from scipy.spatial import ConvexHull
        hull = ConvexHull(pts)
        pts = pts[hull.vertices]
    except Exception:
        # degenerate (collinear) point sets: project on the principal axis
        c = pts - pts.mean(axis=0)
        _, _, vt = np.linalg.svd(c, full_matrices=False)
        proj = c @ vt[0]
        lo, hi = np.argmin(proj), np.argmax(proj)
        return float(np.linalg.norm(pts[hi] - pts[lo]))
    best = 0.0
    for i in range(len(pts)):
        d = np.linalg.norm(pts[i + 1:] - pts[i], axis=1)
        if d.size:
            best = max(best, float(d.max()))
    return best


def resolve(spec: CurveFamilySpec, G: GraphApproximation,
            via_cell: Optional[int] = None) -> ResolvedFamily:
    """Bind a geometric family spec to concrete cell sets on G.

    Empty sides or vacuous thresholds yield the distinguished empty family
    (its modulus is zero) rather than an error.
    """
    if isinstance(spec, CrossRect):
        rect = spec.rect
        if len(rect) != G.dim:
            raise FamilySpecError("rectangle dimension mismatch")
        axis = 0 if spec.axis == "horizontal" else 1
        lo_face = list(rect)
        hi_face = list(rect)
        lo_face[axis] = (rect[axis][0], rect[axis][0])
        hi_face[axis] = (rect[axis][1], rect[axis][1])
        spec = Connect(BoxSet(tuple(lo_face)), BoxSet(tuple(hi_face)),
                       region=BoxSet(rect))

    if isinstance(spec, Connect):
        a = spec.a.resolve(G)
        b = spec.b.resolve(G)
        if a.size == 0 or b.size == 0:
            return ResolvedFamily(kind="empty", note="empty side")
        mask = np.zeros(G.n, dtype=np.uint8)
        if spec.region is None:
            mask[:] = 1
        else:
            mask[spec.region.resolve(G)] = 1
        mask[a] = 1
        mask[b] = 1
        if via_cell is not None:
            mask[via_cell] = 1
        return ResolvedFamily(kind="connect", sources=a, targets=b,
                              region_mask=mask, via_cell=via_cell)

    if via_cell is not None:
        raise FamilySpecError("mandatory waypoint applies to connect-like families")

    if isinstance(spec, DiamAtLeast):
        if G.n == 0 or spec.d0 > _space_diameter(G) + 1e-12:
            return ResolvedFamily(kind="empty", note="threshold exceeds diameter")
        return ResolvedFamily(kind="diam", d0=float(spec.d0))

    if isinstance(spec, Tube):
        pts = np.asarray(spec.waypoints, dtype=np.float64)
        if pts.shape[1] != G.dim:
            raise FamilySpecError("waypoint dimension mismatch")
        pts = _resample_polyline(pts, spec.epsilon / 2.0)
        dist_w = _point_box_dist(pts, G.centers, G.half_widths)
        member = (dist_w <= spec.epsilon + 1e-12).astype(np.uint8).T
        member = np.ascontiguousarray(member)
        if not member.any(axis=0).all():
            return ResolvedFamily(kind="empty", note="empty waypoint set")
        region = np.zeros(G.n, dtype=np.uint8)
        best = np.full(G.n, np.inf)
        if pts.shape[0] == 1:
            best = dist_w[0]
        for a, b in zip(pts[:-1], pts[1:]):
            np.minimum(best, _segment_box_dist(a, b, G.centers, G.half_widths),
                       out=best)
        region[best <= spec.epsilon + 1e-12] = 1
        return ResolvedFamily(kind="tube", member=member, region_mask=region,
                              waypoints=pts, epsilon=float(spec.epsilon))

    raise FamilySpecError(f"cannot resolve {type(spec)!r}")


# -- separation oracle ------------------------------------------------------

EMPTY_RESULT = (None, math.inf)


def _lex_walk(G, rho, dA, dB, total, source_set, target_set):
    """Lexicographically smallest cell sequence among minimal-length paths.

    Walks the tight cells (dA + dB - rho == total) choosing the smallest
    admissible id at each step. Falls back to None on a dead end (possible
    only with zero-weight ties), in which case the caller uses parent chains.
    """
    eps = 1e-9 * (1.0 + abs(total))
    finite = np.isfinite(dA) & np.isfinite(dB)
    tight = np.zeros(G.n, dtype=bool)
    tight[finite] = (dA[finite] + dB[finite] - rho[finite]) <= total + eps
    starts = [int(v) for v in np.flatnonzero(tight)
              if v in source_set and dA[v] <= rho[v] + eps]
    if not starts:
        return None
    v = min(starts)
    path = [v]
    visited = {v}
    for _ in range(G.n):
        if v in target_set and abs(dB[v] - rho[v]) <= eps:
            return path
        nxt = None
        for w in sorted(int(x) for x in G.neighbors(v)):
            if w in visited or not tight[w]:
                continue
            if abs(dA[w] - (dA[v] + rho[w])) <= eps:
                nxt = w
                break
        if nxt is None:
            return None
        path.append(nxt)
        visited.add(nxt)
        v = nxt
    return None


def _parent_chain(parent, end):
    out = []
    v = int(end)
    while v >= 0:
        out.append(v)
        v = int(parent[v])
    out.reverse()
    return out


def _canonical_orientation(cells):
    rev = list(reversed(cells))
    return cells if tuple(cells) <= tuple(rev) else rev


def connect_sweeps(G, rho, fam):
    """Forward (from A) and backward (from B) distance fields and parents."""
    dA, pA = _kernels.dijkstra_ms(G.indptr, G.nbrs, rho, fam.sources,
                                  fam.region_mask)
    dB, pB = _kernels.dijkstra_ms(G.indptr, G.nbrs, rho, fam.targets,
                                  fam.region_mask)
    return dA, pA, dB, pB


def min_length_curve(G: GraphApproximation, rho: Union[Density, np.ndarray],
                     family: ResolvedFamily):
    """Curve of minimal rho-length in the family, with its exact length.

    Returns (DiscreteCurve, length); (None, inf) is the distinguished
    empty-family result. Ties between minimal curves break toward the
    lexicographically smallest cell sequence.
    """
    rho = rho.values if isinstance(rho, Density) else np.asarray(rho, float)
    if family.kind == "empty":
        return EMPTY_RESULT

    if family.kind == "connect":
        dA, pA, dB, pB = connect_sweeps(G, rho, family)
        if family.via_cell is not None:
            v = family.via_cell
            if not np.isfinite(dA[v]) or not np.isfinite(dB[v]):
                return EMPTY_RESULT
            total = float(dA[v] + dB[v] - rho[v])
            left = _parent_chain(pA, v)
            right = _parent_chain(pB, v)
            cells = left + list(reversed(right))[1:]
            cells = _dedupe_consecutive(cells)
            return DiscreteCurve(tuple(cells)), total
        dt = dA[family.targets]
        if not np.isfinite(dt).any():
            return EMPTY_RESULT
        total = float(np.min(dt))
        src = set(int(s) for s in family.sources)
        tgt = set(int(t) for t in family.targets)
        cells = _lex_walk(G, rho, dA, dB, total, src, tgt)
        if cells is None:
            end = int(family.targets[int(np.argmin(dt))])
            cells = _parent_chain(pA, end)
        return DiscreteCurve(tuple(cells)), total

    if family.kind == "diam":
        allowed = np.ones(G.n, dtype=np.uint8)
        sources = np.arange(G.n, dtype=np.int64)
        best, bu, bw, _, _, _ = _kernels.far_scan(
            G.indptr, G.nbrs, rho, G.centers, family.d0 ** 2, sources,
            0.0, np.inf, -1, -1)
        if not np.isfinite(best):
            return EMPTY_RESULT
        du, _ = _kernels.dijkstra_ms(G.indptr, G.nbrs, rho,
                                     np.array([bu], dtype=np.int64), allowed)
        dw, pw = _kernels.dijkstra_ms(G.indptr, G.nbrs, rho,
                                      np.array([bw], dtype=np.int64), allowed)
        cells = _lex_walk(G, rho, du, dw, float(best), {int(bu)}, {int(bw)})
        if cells is None:
            cells = list(reversed(_parent_chain(pw, bu)))
        cells = _canonical_orientation(cells)
        return DiscreteCurve(tuple(cells)), float(best)

    if family.kind == "tube":
        best, st, _, parent = _kernels.tube_dijkstra(
            G.indptr, G.nbrs, rho, family.member, family.region_mask)
        if not np.isfinite(best):
            return EMPTY_RESULT
        states = _parent_chain(parent, st)
        ws = family.member.shape[1] + 1
        cells = _dedupe_consecutive([s // ws for s in states])
        curve = DiscreteCurve(tuple(cells))
        return curve, curve_length(rho, curve.cells)

    raise FamilySpecError(f"unknown family kind {family.kind!r}")


def _dedupe_consecutive(cells):
    out = []
    for c in cells:
        if not out or out[-1] != c:
            out.append(int(c))
    return out


# -- brute-force enumeration ------------------------------------------------


def enumerate_curves(G: GraphApproximation, family: ResolvedFamily,
                     max_cells: int):
    """All simple family curves with at most max_cells cells, deduplicated
    up to reversal, sorted lexicographically. Testing oracle only."""
    if G.n > 200:
        raise SizeError(f"enumerate_curves needs <= 200 cells, got {G.n}")
    if max_cells > 12:
        raise SizeError(f"enumerate_curves needs max_cells <= 12, got {max_cells}")
    if family.kind == "empty" or max_cells <= 0:
        return []
    found = set()

    nbrs_sorted = [sorted(int(w) for w in G.neighbors(v)) for v in range(G.n)]

    if family.kind == "connect":
        mask = family.region_mask
        targets = set(int(t) for t in family.targets)
        via = family.via_cell

        def dfs(path, on_path):
            v = path[-1]
            if v in targets and (via is None or via in on_path):
                found.add(tuple(_canonical_orientation(list(path))))
            if len(path) >= max_cells:
                return
            for w in nbrs_sorted[v]:
                if mask[w] and w not in on_path:
                    path.append(w)
                    on_path.add(w)
                    dfs(path, on_path)
                    on_path.discard(w)
                    path.pop()

        for a in sorted(int(s) for s in family.sources):
            if mask[a]:
                dfs([a], {a})

    elif family.kind == "diam":
        d0sq = family.d0 ** 2
        cent = G.centers

        def far(u, v):
            return float(np.sum((cent[u] - cent[v]) ** 2)) >= d0sq - 1e-15

        def dfs(path, on_path):
            if far(path[0], path[-1]):
                found.add(tuple(_canonical_orientation(list(path))))
            if len(path) >= max_cells:
                return
            for w in nbrs_sorted[path[-1]]:
                if w not in on_path:
                    path.append(w)
                    on_path.add(w)
                    dfs(path, on_path)
                    on_path.discard(w)
                    path.pop()

        for a in range(G.n):
            dfs([a], {a})

    elif family.kind == "tube":
        member = family.member
        nsets = member.shape[1]
        mask = family.region_mask

        def upgrade(v, j):
            while j < nsets and member[v, j]:
                j += 1
            return j

        def dfs(path, on_path, j):
            if j == nsets:
                found.add(tuple(_canonical_orientation(list(path))))
                return  # reduced form: stop at match completion
            if len(path) >= max_cells:
                return
            for w in nbrs_sorted[path[-1]]:
                if mask[w] and w not in on_path:
                    path.append(w)
                    on_path.add(w)
                    dfs(path, on_path, upgrade(w, j))
                    on_path.discard(w)
                    path.pop()

        for a in range(G.n):
            if mask[a] and member[a, 0]:
                dfs([a], {a}, upgrade(a, 0))
    else:
        raise FamilySpecError(f"unknown family kind {family.kind!r}")

    return [DiscreteCurve(c) for c in sorted(found)]


def curve_in_family(G: GraphApproximation, family: ResolvedFamily,
                    cells: Sequence[int]) -> bool:
    """Membership test used by property tests."""
    cells = [int(c) for c in cells]
    for a, b in zip(cells, cells[1:]):
        if b not in G.neighbors(a):
            return False
    if family.kind == "empty":
        return False
    if family.kind == "connect":
        ok = (cells[0] in family.sources and cells[-1] in family.targets) or \
             (cells[-1] in family.sources and cells[0] in family.targets)
        ok = ok and all(family.region_mask[c] for c in cells)
        if family.via_cell is not None:
            ok = ok and family.via_cell in cells
        return bool(ok)
    if family.kind == "diam":
        d = np.linalg.norm(G.centers[cells[0]] - G.centers[cells[-1]])
        return bool(d >= family.d0 - 1e-12)
    if family.kind == "tube":
        if not all(family.region_mask[c] for c in cells):
            return False
        for seq in (cells, list(reversed(cells))):
            j = 0
            for c in seq:
                while j < family.member.shape[1] and family.member[c, j]:
                    j += 1
            if j == family.member.shape[1]:
                return True
        return False
    raise FamilySpecError(family.kind)


# -- relative distance ------------------------------------------------------


def _cellset_ids(obj, G):
    if isinstance(obj, (BoxSet, IdSet)):
        return obj.resolve(G)
    return np.unique(np.asarray(obj, dtype=np.int64))


def relative_distance(A, B, G: GraphApproximation) -> float:
    """dist(A,B) / min(diam A, diam B) over the closed cell unions."""
    ia = _cellset_ids(A, G)
    ib = _cellset_ids(B, G)
    if ia.size < 2 or ib.size < 2:
        raise DegenerateContinuumError(
            "relative distance needs >= 2 cells on each side")
    if np.intersect1d(ia, ib).size:
        raise DegenerateContinuumError("cell sets must be disjoint")
    dist = _boxes_min_dist(G, ia, ib)
    diam = min(_boxes_diameter(G, ia), _boxes_diameter(G, ib))
    return float(dist / diam)


def _boxes_min_dist(G, ia, ib):
    best = np.inf
    ca, ha = G.centers[ia], G.half_widths[ia]
    cb, hb = G.centers[ib], G.half_widths[ib]
    block = max(1, int(2**20 // max(ib.size, 1)))
    for s in range(0, ia.size, block):
        e = min(ia.size, s + block)
        gap = np.abs(ca[s:e, None, :] - cb[None, :, :]) \
            - (ha[s:e, None] + hb[None, :])[..., None]
        np.maximum(gap, 0.0, out=gap)
        d = np.sqrt(np.sum(gap * gap, axis=2))
        best = min(best, float(d.min()))
    return best


def _boxes_diameter(G, ids):
    c, h = G.centers[ids], G.half_widths[ids]
    best = 0.0
    block = max(1, int(2**20 // max(ids.size, 1)))
    for s in range(0, ids.size, block):
        e = min(ids.size, s + block)
        reach = np.abs(c[s:e, None, :] - c[None, :, :]) \
            + (h[s:e, None] + h[None, :])[..., None]
        d = np.sqrt(np.sum(reach * reach, axis=2))
        best = max(best, float(d.max()))
    return best
