"""Folding maps, tile symmetry groups, density symmetrization, curve lifting.

The level-l folding map collapses each level-l tile onto the fundamental
domain of the tile symmetry group (dihedral of order 8 in the plane, the
order-48 signed-permutation group for the sponge). A density is symmetrized
by summing its values over all tile copies and group elements; a curve whose
folded image touches every wall of the fundamental domain can be reflected
tile-by-tile into a curve tracking any target curve to within twice the tile
side plus one fine-cell diameter.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import CapabilityError, ClassificationError, PreconditionError
from .families import Density, DiscreteCurve
from .tiling import GraphApproximation, build_space


def _group_elements(dim: int):
    """Signed permutations: (axis permutation, per-axis flip).

    Identity first, then lexicographic; order 8 for dim 2, 48 for dim 3.
    """
    elems = []
    for sigma in itertools.permutations(range(dim)):
        for flips in itertools.product((False, True), repeat=dim):
            elems.append((sigma, flips))
    return elems


def _apply_element(grid: np.ndarray, m: int, sigma, flips) -> np.ndarray:
    out = np.empty_like(grid)
    for d in range(grid.shape[1]):
        col = grid[:, sigma[d]]
        out[:, d] = (m - 1 - col) if flips[d] else col
    return out


def global_group_permutations(G: GraphApproximation) -> np.ndarray:
    """Cell permutations of the full isometry group of [0,1]^dim acting on G.

    Valid for the built-in tilings, whose retained-cell patterns are
    invariant under the group.
    """
    if G.grid is None:
        raise CapabilityError("group action needs an integer grid")
    m = G.grid_extent
    elems = _group_elements(G.dim)
    perms = np.empty((len(elems), G.n), dtype=np.int32)
    for h, (sigma, flips) in enumerate(elems):
        ids = G.grid_to_id(_apply_element(G.grid, m, sigma, flips))
        if np.any(ids < 0):
            raise CapabilityError("cell pattern is not group-invariant")
        perms[h] = ids
    return perms


@dataclass(eq=False)
class FoldingMap:
    """Data of the folding of a fine approximation over its level-l tiles."""

    space_tag: str
    base_level: int
    fine_level: int
    fine: GraphApproximation
    base: GraphApproximation      # the tiles T_l, as a graph approximation
    pattern: GraphApproximation   # one tile's interior pattern at level k-l
    tile_of: np.ndarray           # fine cell -> tile id
    local_id: np.ndarray          # fine cell -> pattern cell id
    cell_at: np.ndarray           # (num_tiles, num_pattern) -> fine cell id
    group_perms: np.ndarray       # (order, num_pattern) pattern permutations
    elements: list                # (sigma, flips) metadata, identity first

    @property
    def num_tiles(self) -> int:
        return self.base.n

    @property
    def group_order(self) -> int:
        return self.group_perms.shape[0]

    def g(self, tile: int, tile_to: int, h: int) -> np.ndarray:
        """Fine-cell map g_{T,T',h} as an array over cells of `tile`."""
        src = self.cell_at[tile]
        return self.cell_at[tile_to][self.group_perms[h][self.local_id[src]]]

    def apply(self, tile_to: int, h: int, cells) -> np.ndarray:
        """Image of fine cells (all inside one tile) in tile_to under h."""
        cells = np.asarray(cells, dtype=np.int64)
        return self.cell_at[tile_to][self.group_perms[h][self.local_id[cells]]]

    def compose(self, h2: int, h1: int) -> int:
        """Index of the element acting like h2 after h1."""
        perm = self.group_perms[h2][self.group_perms[h1]]
        for h, cand in enumerate(self.group_perms):
            if np.array_equal(cand, perm):
                return h
        raise CapabilityError("group not closed under composition")

    def flip_element(self, axis: int) -> int:
        for h, (sigma, flips) in enumerate(self.elements):
            if sigma == tuple(range(self.fine.dim)) and \
                    flips == tuple(d == axis for d in range(self.fine.dim)):
                return h
        raise CapabilityError("missing axis reflection")


def build_folding(G_fine: GraphApproximation, ell: int) -> FoldingMap:
    if G_fine.space_tag not in ("square", "carpet", "sponge"):
        raise CapabilityError(
            f"folding is defined for the built-in spaces, not {G_fine.space_tag!r}")
    if not 0 <= ell <= G_fine.level:
        raise PreconditionError("need 0 <= ell <= fine level")
    k = G_fine.level
    base = build_space(G_fine.space_tag, ell)
    pattern = build_space(G_fine.space_tag, k - ell)
    sub = 3 ** (k - ell)
    tile_of = base.grid_to_id(G_fine.grid // sub).astype(np.int32)
    local_id = pattern.grid_to_id(G_fine.grid % sub).astype(np.int32)
    if np.any(tile_of < 0) or np.any(local_id < 0):
        raise CapabilityError("tiling is not exactly self-similar here")
    cell_at = np.full((base.n, pattern.n), -1, dtype=np.int32)
    cell_at[tile_of, local_id] = np.arange(G_fine.n, dtype=np.int32)
    if np.any(cell_at < 0):
        raise CapabilityError("tile pattern is incomplete")
    elements = _group_elements(G_fine.dim)
    perms = np.empty((len(elements), pattern.n), dtype=np.int32)
    m = pattern.grid_extent
    for h, (sigma, flips) in enumerate(elements):
        ids = pattern.grid_to_id(_apply_element(pattern.grid, m, sigma, flips))
        if np.any(ids < 0):
            raise CapabilityError("pattern is not group-invariant")
        perms[h] = ids
    return FoldingMap(space_tag=G_fine.space_tag, base_level=ell,
                      fine_level=k, fine=G_fine, base=base, pattern=pattern,
                      tile_of=tile_of, local_id=local_id, cell_at=cell_at,
                      group_perms=perms, elements=elements)


# -- symmetrization ---------------------------------------------------------


def symmetrize(rho, fm: FoldingMap) -> Density:
    """rho'(v) = sum over tiles T' and group elements h of rho(g_{T,T',h}(v)).

    The result is invariant under every g_{T,T',h}: it depends on a cell only
    through the group orbit of its within-tile position.
    """
    vals = rho.values if isinstance(rho, Density) else np.asarray(rho, float)
    if vals.size != fm.fine.n:
        raise PreconditionError("density lives on a different level")
    tile_sum = vals[fm.cell_at].sum(axis=0)        # per pattern cell
    orbit = np.zeros(fm.pattern.n)
    for h in range(fm.group_order):
        orbit += tile_sum[fm.group_perms[h]]
    return Density(orbit[fm.local_id])


def fold_multiplicity(fm: FoldingMap, cells) -> tuple:
    """Overlap counts of the reflected copies of a curve.

    mult[l] counts, for a fine cell with within-tile position l, the pairs
    (source tile, group element) whose copy of the curve covers it; N is
    the maximum. Cells of the reflected-copy set have mult >= 1.
    """
    cells = np.asarray(cells, dtype=np.int64)
    cnt = np.zeros(fm.pattern.n)
    np.add.at(cnt, fm.local_id[cells], 1.0)
    mult = np.zeros(fm.pattern.n)
    for h in range(fm.group_order):
        mult += cnt[fm.group_perms[h]]
    return mult, float(mult.max())


# -- classification ---------------------------------------------------------


def _abs_interval(lo: int, hi: int):
    """|t| range for integer t in [lo, hi]."""
    if lo <= 0 <= hi:
        return 0, max(-lo, hi)
    if hi < 0:
        return -hi, -lo
    return lo, hi


def _sides_met_2d(loc: np.ndarray, m: int):
    li, lj = loc[:, 0], loc[:, 1]
    boundary = np.any((li == 0) | (lj == 0) | (li == m - 1) | (lj == m - 1))
    midline = np.any(((2 * li <= m) & (m <= 2 * li + 2)) |
                     ((2 * lj <= m) & (m <= 2 * lj + 2)))
    diagonal = np.any((np.abs(li - lj) <= 1) |
                      ((li + lj <= m) & (m <= li + lj + 2)))
    return bool(boundary), bool(midline), bool(diagonal)


def _facets_met_3d(loc: np.ndarray, m: int):
    touched = [False, False, False, False]  # boundary, midplane, big, small
    for g in loc:
        iv = []
        for d in range(3):
            lo, hi = int(2 * g[d]), int(2 * g[d] + 2)  # coord * 2m
            iv.append(_abs_interval(m - hi, m - lo))   # |m - t| range
        if any(g[d] == 0 or g[d] == m - 1 for d in range(3)):
            touched[0] = True
        if any(iv[d][0] == 0 for d in range(3)):
            touched[1] = True
        for i, j in ((0, 1), (0, 2), (1, 2)):
            k3 = 3 - i - j
            lo = max(iv[i][0], iv[j][0])
            hi = min(iv[i][1], iv[j][1])
            if lo <= hi:
                if hi >= iv[k3][0]:
                    touched[2] = True  # two largest coincide
                if lo <= iv[k3][1]:
                    touched[3] = True  # two smallest coincide
    return tuple(touched)


def classify_curve(gamma, fm: FoldingMap) -> str:
    """'spanning' iff the folded image of the curve's closed cells meets
    every wall of the fundamental domain; 'small' otherwise."""
    cells = np.asarray(
        gamma.cells if isinstance(gamma, DiscreteCurve) else gamma,
        dtype=np.int64)
    sub = 3 ** (fm.fine_level - fm.base_level)
    loc = fm.fine.grid[cells] % sub
    if fm.fine.dim == 2:
        met = _sides_met_2d(loc, sub)
    else:
        met = _facets_met_3d(loc, sub)
    return "spanning" if all(met) else "small"


def curve_cell_diameter(G: GraphApproximation, cells) -> float:
    """Euclidean diameter of the union of the curve's closed cells."""
    cells = np.asarray(cells, dtype=np.int64)
    c = G.centers[cells]
    h = G.half_widths[cells]
    reach = np.abs(c[:, None, :] - c[None, :, :]) + (h[:, None] + h[None, :])[..., None]
    return float(np.sqrt(np.sum(reach * reach, axis=2)).max())


# -- curve lifting ----------------------------------------------------------


def point_polyline_dist(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Distance from each point to the polyline (min over segments)."""
    points = np.atleast_2d(points)
    best = np.full(points.shape[0], np.inf)
    if poly.shape[0] == 1:
        return np.linalg.norm(points - poly[0], axis=1)
    for a, b in zip(poly[:-1], poly[1:]):
        d = b - a
        denom = float(np.dot(d, d))
        if denom == 0.0:
            t = np.zeros(points.shape[0])
        else:
            t = np.clip((points - a) @ d / denom, 0.0, 1.0)
        proj = a + t[:, None] * d
        np.minimum(best, np.linalg.norm(points - proj, axis=1), out=best)
    return best


def discrete_frechet(P: np.ndarray, Q: np.ndarray) -> float:
    """Discrete Fréchet distance between two ordered point sequences."""
    P = np.atleast_2d(P)
    Q = np.atleast_2d(Q)
    d = np.linalg.norm(P[:, None, :] - Q[None, :, :], axis=2)
    n, m = d.shape
    ca = np.full((n, m), np.inf)
    ca[0, 0] = d[0, 0]
    for j in range(1, m):
        ca[0, j] = max(ca[0, j - 1], d[0, j])
    for i in range(1, n):
        ca[i, 0] = max(ca[i - 1, 0], d[i, 0])
        for j in range(1, m):
            ca[i, j] = max(min(ca[i - 1, j], ca[i - 1, j - 1], ca[i, j - 1]),
                           d[i, j])
    return float(ca[n - 1, m - 1])


def _tile_chain(fm: FoldingMap, eta: np.ndarray):
    """Side-sharing tile chain traversed by the waypoint polyline."""
    base = fm.base
    mb = base.grid_extent
    step = (3.0 ** (-fm.base_level)) / 4.0
    pts = [eta[0]]
    for a, b in zip(eta[:-1], eta[1:]):
        gap = float(np.linalg.norm(b - a))
        nsteps = max(1, int(math.ceil(gap / step)))
        for s in range(1, nsteps + 1):
            pts.append(a + (b - a) * (s / nsteps))
    chain = []
    for p in pts:
        tid = _tile_containing(base, mb, p)
        if tid is None:
            raise PreconditionError("target curve leaves the space's tiles")
        if not chain or chain[-1] != tid:
            if chain and not _tiles_share_side(base, chain[-1], tid):
                mid = _bridge_tile(base, mb, chain[-1], tid, p)
                if mid is not None and mid != chain[-1]:
                    chain.append(mid)
                if not _tiles_share_side(base, chain[-1], tid):
                    raise PreconditionError(
                        "waypoints jump between non-adjacent tiles")
            chain.append(tid)
    return chain


def _tile_containing(base, mb, p):
    """Retained tile whose closed box contains p; smallest id wins ties."""
    cands = []
    for d in range(base.dim):
        x = p[d] * mb
        lo = int(math.floor(x - 1e-9))
        hi = int(math.floor(x + 1e-9))
        cands.append(sorted({max(0, min(mb - 1, lo)), max(0, min(mb - 1, hi))}))
    best = None
    for combo in itertools.product(*cands):
        tid = base.grid_to_id(np.array([combo]))[0]
        if tid >= 0 and (best is None or tid < best):
            best = int(tid)
    return best


def _tiles_share_side(base, t1, t2):
    d = np.abs(base.grid[t1] - base.grid[t2])
    return d.sum() == 1 and d.max() == 1


def _bridge_tile(base, mb, t1, t2, p):
    """Side-sharing intermediate between corner-adjacent tiles."""
    g1, g2 = base.grid[t1], base.grid[t2]
    cands = []
    for d in range(base.dim):
        g = g1.copy()
        g[d] = g2[d]
        if not np.array_equal(g, g1) and not np.array_equal(g, g2):
            tid = base.grid_to_id(g[None, :])[0]
            if tid >= 0 and _tiles_share_side(base, t1, int(tid)) \
                    and _tiles_share_side(base, int(tid), t2):
                cands.append(int(tid))
    return min(cands) if cands else None


def _shared_axis(base, t1, t2):
    diff = base.grid[t2] - base.grid[t1]
    axis = int(np.flatnonzero(diff)[0])
    return axis


def _path_within(fm: FoldingMap, local_set: np.ndarray, start_l: int,
                 goal_pred, eta: np.ndarray, tile: int):
    """Deterministic walk inside one reflected copy, pulled toward eta.

    Dijkstra over the copy's pattern cells with per-cell cost = squared
    distance of the fine-cell center to the polyline plus a small step
    charge; returns pattern-local ids from start to the first goal cell.
    """
    pat = fm.pattern
    in_set = np.zeros(pat.n, dtype=bool)
    in_set[local_set] = True
    centers = fm.fine.centers[fm.cell_at[tile]]
    cost = point_polyline_dist(centers, eta) ** 2 + 1e-9
    import heapq
    dist = {start_l: cost[start_l]}
    prev = {start_l: -1}
    heap = [(cost[start_l], start_l)]
    goal = None
    while heap:
        dv, v = heapq.heappop(heap)
        if dv > dist.get(v, np.inf):
            continue
        if goal_pred(v):
            goal = v
            break
        for w in pat.neighbors(v):
            w = int(w)
            if not in_set[w]:
                continue
            nd = dv + cost[w]
            if nd < dist.get(w, np.inf):
                dist[w] = nd
                prev[w] = v
                heapq.heappush(heap, (nd, w))
    if goal is None:
        raise CapabilityError("reflected copy is not connected to the goal")
    out = []
    v = goal
    while v != -1:
        out.append(v)
        v = prev[v]
    out.reverse()
    return out


def _face_cells(pat: GraphApproximation, axis: int, positive: bool):
    m = pat.grid_extent
    want = m - 1 if positive else 0
    return np.flatnonzero(pat.grid[:, axis] == want)


def lift_curve(gamma, eta_waypoints: Sequence, fm: FoldingMap) -> DiscreteCurve:
    """Reflect a spanning curve tile-by-tile along the tile chain of the
    target polyline; the result lies in the folded preimage of the curve and
    tracks the polyline to within 2*3^-l plus one fine-cell diameter."""
    cells = np.asarray(
        gamma.cells if isinstance(gamma, DiscreteCurve) else gamma,
        dtype=np.int64)
    if classify_curve(cells, fm) != "spanning":
        diam = curve_cell_diameter(fm.fine, cells)
        raise ClassificationError(
            "curve does not span the fundamental domain "
            f"(diameter {diam:.6g} <= {2 * 3.0 ** (-fm.base_level):.6g})",
            diameter=diam)
    eta = np.asarray([[float(x) for x in p] for p in eta_waypoints])
    folded = np.unique(fm.local_id[cells])
    delta = np.unique(np.concatenate(
        [fm.group_perms[h][folded] for h in range(fm.group_order)]))
    chain = _tile_chain(fm, eta)
    h_cur = 0  # identity
    pieces = []
    start_l = None
    for i, tile in enumerate(chain):
        local_set = np.unique(fm.group_perms[h_cur][delta])
        if start_l is None:
            centers = fm.fine.centers[fm.cell_at[tile][local_set]]
            d0 = np.linalg.norm(centers - eta[0], axis=1)
            start_l = int(local_set[int(np.lexsort((local_set, d0))[0])])
        if i + 1 < len(chain):
            nxt = chain[i + 1]
            axis = _shared_axis(fm.base, tile, nxt)
            positive = fm.base.grid[nxt][axis] > fm.base.grid[tile][axis]
            face = set(int(x) for x in _face_cells(fm.pattern, axis, positive))
            segment = _path_within(fm, local_set, start_l,
                                   lambda v: v in face, eta, tile)
            pieces.append(fm.cell_at[tile][segment])
            exit_l = segment[-1]
            flip = fm.flip_element(axis)
            h_cur = _compose_perm_index(fm, flip, h_cur)
            start_l = int(fm.group_perms[flip][exit_l])
        else:
            centers = fm.fine.centers[fm.cell_at[tile]]
            dend = np.linalg.norm(centers - eta[-1], axis=1)
            goal_l = min((float(dend[l]), int(l)) for l in local_set)[1]
            segment = _path_within(fm, local_set, start_l,
                                   lambda v: v == goal_l, eta, tile)
            pieces.append(fm.cell_at[tile][segment])
    out = []
    for piece in pieces:
        for c in piece:
            c = int(c)
            if not out or out[-1] != c:
                out.append(c)
    return DiscreteCurve(tuple(out))


def _compose_perm_index(fm: FoldingMap, h2: int, h1: int) -> int:
    cache = getattr(fm, "_compose_cache", None)
    if cache is None:
        cache = {}
        fm._compose_cache = cache
    key = (h2, h1)
    if key not in cache:
        cache[key] = fm.compose(h2, h1)
    return cache[key]
