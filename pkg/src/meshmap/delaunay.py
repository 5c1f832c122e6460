"""2D Delaunay triangulation (incremental Bowyer-Watson) plus the
point-location and circumcircle predicates used by triangle rejection and
map expansion.

The construction works on coordinates normalised to the unit box and keeps
the hull uniform by surrounding it with "ghost" triangles that share a
symbolic vertex at infinity; in-circle tests against a ghost reduce to an
orientation test against its hull edge.  Predicates are plain floating
point with a small tolerance - adequate for pixel-grid inputs with mild
jitter, not for adversarially degenerate data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

# predicate tolerance on unit-box-normalised coordinates
EPS_PRED = 1e-9
# construction predicates use tolerances RELATIVE to the magnitude of the
# determinant terms, so tiny local triangles (whose determinants are small
# numbers, not near-ties) are classified correctly while genuine
# cocircular/collinear ties fall inside the window and are handled
# inclusively
_EPS_REL = 1e-12

MERGE_EPS = 1e-6  # duplicate-vertex merge radius, pixels


@dataclass(frozen=True)
class Triangulation2D:
    """Vertices in pixel space plus CCW triangle index triples."""

    vertices: np.ndarray  # (n, 2) float64
    triangles: np.ndarray  # (m, 3) int32

    def __post_init__(self):
        object.__setattr__(self, "vertices",
                           np.ascontiguousarray(self.vertices, dtype=np.float64))
        object.__setattr__(self, "triangles",
                           np.ascontiguousarray(self.triangles, dtype=np.int32))

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]

    def triangle_areas(self) -> np.ndarray:
        a = self.vertices[self.triangles[:, 0]]
        b = self.vertices[self.triangles[:, 1]]
        c = self.vertices[self.triangles[:, 2]]
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                      - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))

    def validate(self):
        """Cheap structural checks: index ranges, orientation, no slivers."""
        t = self.triangles
        if t.size and (t.min() < 0 or t.max() >= self.vertex_count):
            raise AssertionError("triangle index out of range")
        if t.size and np.any(self.triangle_areas() <= 0):
            raise AssertionError("non-CCW or degenerate triangle")


@njit(cache=True, inline="always")
def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


@njit(cache=True, inline="always")
def _orient_mag(ax, ay, bx, by, cx, cy):
    """Orientation determinant plus the magnitude of its terms (for a
    relative near-zero test)."""
    t1 = (bx - ax) * (cy - ay)
    t2 = (by - ay) * (cx - ax)
    return t1 - t2, abs(t1) + abs(t2)


@njit(cache=True, inline="always")
def _incircle_mag(ax, ay, bx, by, cx, cy, px, py):
    """Lifted in-circle determinant plus its term magnitude."""
    adx = ax - px
    ady = ay - py
    bdx = bx - px
    bdy = by - py
    cdx = cx - px
    cdy = cy - py
    aa = adx * adx + ady * ady
    bb = bdx * bdx + bdy * bdy
    cc = cdx * cdx + cdy * cdy
    t1 = bdx * cdy - cdx * bdy
    t2 = cdx * ady - adx * cdy
    t3 = adx * bdy - bdx * ady
    det = aa * t1 + bb * t2 + cc * t3
    mag = (aa * (abs(bdx * cdy) + abs(cdx * bdy))
           + bb * (abs(cdx * ady) + abs(adx * cdy))
           + cc * (abs(adx * bdy) + abs(bdx * ady)))
    return det, mag


@njit(cache=True, inline="always")
def _is_bad(tv, pts, inf, t, px, py):
    """Does the (closed) circumdisk of triangle t contain point p?

    For a ghost triangle the circumdisk degenerates to the half-plane on
    the outside of its hull edge (plus the edge's own span).  Near-ties
    (relative to the determinant scale) count as inside, so cocircular
    configurations are retriangulated rather than left ambiguous."""
    i0 = tv[t, 0]
    i1 = tv[t, 1]
    i2 = tv[t, 2]
    if i0 != inf and i1 != inf and i2 != inf:
        det, mag = _incircle_mag(pts[i0, 0], pts[i0, 1], pts[i1, 0],
                                 pts[i1, 1], pts[i2, 0], pts[i2, 1], px, py)
        return det > -_EPS_REL * mag
    if i0 == inf:
        x, y = i1, i2
    elif i1 == inf:
        x, y = i2, i0
    else:
        x, y = i0, i1
    xx = pts[x, 0]
    xy = pts[x, 1]
    yx = pts[y, 0]
    yy = pts[y, 1]
    o, mag = _orient_mag(xx, xy, yx, yy, px, py)
    if o > _EPS_REL * mag:
        return True
    if o < -_EPS_REL * mag:
        return False
    # on the hull edge line: bad only if p projects inside the segment
    dx = yx - xx
    dy = yy - xy
    s = (px - xx) * dx + (py - xy) * dy
    return 0.0 <= s <= dx * dx + dy * dy


@njit(cache=True)
def _bowyer_watson(pts):
    """Core incremental construction over points already in insertion order.

    Returns (triangles, count, status); status 0 = ok, 1 = all collinear,
    2 = internal inconsistency (should not happen for sane inputs)."""
    n = pts.shape[0]
    inf = n
    empty = np.empty((0, 3), np.int32)

    # initial non-degenerate triple: points 0, 1 and the first off-line point
    k = -1
    for i in range(2, n):
        o, mag = _orient_mag(pts[0, 0], pts[0, 1], pts[1, 0], pts[1, 1],
                             pts[i, 0], pts[i, 1])
        if abs(o) > _EPS_REL * mag:
            k = i
            break
    if k < 0:
        return empty, 0, 1

    cap = 4 * n + 64
    tv = np.zeros((cap, 3), np.int32)
    tn = np.full((cap, 3), -1, np.int32)
    alive = np.zeros(cap, np.uint8)
    mark = np.zeros(cap, np.int64)
    bad = np.zeros(cap, np.uint8)
    free = np.empty(cap, np.int64)
    nfree = 0

    a, b, c = 0, 1, k
    if _orient(pts[a, 0], pts[a, 1], pts[b, 0], pts[b, 1],
               pts[c, 0], pts[c, 1]) < 0:
        b, c = c, b
    # real triangle 0 plus one ghost per hull edge
    tv[0, 0], tv[0, 1], tv[0, 2] = a, b, c
    tv[1, 0], tv[1, 1], tv[1, 2] = b, a, inf
    tv[2, 0], tv[2, 1], tv[2, 2] = c, b, inf
    tv[3, 0], tv[3, 1], tv[3, 2] = a, c, inf
    tn[0, 0], tn[0, 1], tn[0, 2] = 1, 2, 3
    tn[1, 0], tn[1, 1], tn[1, 2] = 0, 3, 2
    tn[2, 0], tn[2, 1], tn[2, 2] = 0, 1, 3
    tn[3, 0], tn[3, 1], tn[3, 2] = 0, 2, 1
    alive[0] = alive[1] = alive[2] = alive[3] = 1
    ntri = 4
    last_real = 0

    stack = np.empty(cap, np.int64)
    comp = np.empty(cap, np.int64)
    mark2 = np.zeros(cap, np.int64)
    bnd_a = np.empty(3 * cap, np.int64)
    bnd_b = np.empty(3 * cap, np.int64)
    bnd_own = np.empty(3 * cap, np.int64)
    bnd_out = np.empty(3 * cap, np.int64)
    bnd_slot = np.empty(3 * cap, np.int64)
    new_ids = np.empty(3 * cap, np.int64)
    gen = 0
    gen2 = 0

    for pid in range(2, n):
        if pid == k:
            continue
        px = pts[pid, 0]
        py = pts[pid, 1]

        # --- locate a seed triangle by walking from the last real one ---
        t = last_real
        steps = 0
        max_steps = 4 * ntri + 64
        while True:
            steps += 1
            if steps > max_steps:
                t = -1
                break
            i0 = tv[t, 0]
            i1 = tv[t, 1]
            i2 = tv[t, 2]
            if i0 == inf or i1 == inf or i2 == inf:
                break  # walked off the hull; p is outside near this ghost
            o0 = _orient(pts[i0, 0], pts[i0, 1], pts[i1, 0], pts[i1, 1], px, py)
            o1 = _orient(pts[i1, 0], pts[i1, 1], pts[i2, 0], pts[i2, 1], px, py)
            o2 = _orient(pts[i2, 0], pts[i2, 1], pts[i0, 0], pts[i0, 1], px, py)
            if o0 >= 0.0 and o1 >= 0.0 and o2 >= 0.0:
                break  # containing triangle found
            omin = o0
            edge = 0
            if o1 < omin:
                omin = o1
                edge = 1
            if o2 < omin:
                edge = 2
            t = tn[t, edge]
            if t < 0:
                break

        seed = -1
        if t >= 0 and _is_bad(tv, pts, inf, t, px, py):
            seed = t
        else:
            for t2 in range(ntri):
                if alive[t2] and _is_bad(tv, pts, inf, t2, px, py):
                    seed = t2
                    break
        if seed < 0:
            continue  # effectively a duplicate point; nothing to do

        # --- phase 1: classify every triangle reachable through bad ones ---
        gen += 1
        sp = 0
        stack[sp] = seed
        sp += 1
        mark[seed] = gen
        bad[seed] = 1
        while sp > 0:
            sp -= 1
            tcur = stack[sp]
            for e in range(3):
                nb = tn[tcur, e]
                if nb >= 0 and mark[nb] != gen:
                    mark[nb] = gen
                    bad[nb] = 1 if _is_bad(tv, pts, inf, nb, px, py) else 0
                    if bad[nb]:
                        stack[sp] = nb
                        sp += 1

        # --- phase 2: take the seed's bad component and demote members
        # whose boundary edges do not face p, so the fan cannot fold ---
        ncomp = 0
        nbnd = 0
        while True:
            gen2 += 1
            sp = 0
            stack[sp] = seed
            sp += 1
            mark2[seed] = gen2
            ncomp = 0
            nbnd = 0
            while sp > 0:
                sp -= 1
                tcur = stack[sp]
                comp[ncomp] = tcur
                ncomp += 1
                for e in range(3):
                    nb = tn[tcur, e]
                    nb_bad = nb >= 0 and mark[nb] == gen and bad[nb] == 1
                    if nb_bad:
                        if mark2[nb] != gen2:
                            mark2[nb] = gen2
                            stack[sp] = nb
                            sp += 1
                    else:
                        va = tv[tcur, e]
                        vb = tv[tcur, (e + 1) % 3]
                        bnd_a[nbnd] = va
                        bnd_b[nbnd] = vb
                        bnd_own[nbnd] = tcur
                        bnd_out[nbnd] = nb
                        slot = -1
                        if nb >= 0:
                            for s in range(3):
                                if tv[nb, s] == vb and tv[nb, (s + 1) % 3] == va:
                                    slot = s
                                    break
                        bnd_slot[nbnd] = slot
                        nbnd += 1
            demoted = 0
            for e in range(nbnd):
                if bnd_a[e] == inf or bnd_b[e] == inf:
                    continue
                o, mag = _orient_mag(pts[bnd_a[e], 0], pts[bnd_a[e], 1],
                                     pts[bnd_b[e], 0], pts[bnd_b[e], 1],
                                     px, py)
                if o <= _EPS_REL * mag:
                    own = bnd_own[e]
                    if own != seed and bad[own] == 1:
                        bad[own] = 0
                        demoted += 1
            if demoted == 0:
                break
        if nbnd < 3:
            return empty, 0, 2

        # --- retire the cavity, fan new triangles from p ---
        for i in range(ncomp):
            alive[comp[i]] = 0
            free[nfree] = comp[i]
            nfree += 1
        for e in range(nbnd):
            if nfree > 0:
                nfree -= 1
                tid = free[nfree]
            else:
                tid = ntri
                ntri += 1
                if ntri >= cap:
                    return empty, 0, 2
            new_ids[e] = tid
            tv[tid, 0] = bnd_a[e]
            tv[tid, 1] = bnd_b[e]
            tv[tid, 2] = pid
            tn[tid, 0] = bnd_out[e]
            tn[tid, 1] = -1
            tn[tid, 2] = -1
            alive[tid] = 1
            mark[tid] = gen
            bad[tid] = 0
            if bnd_out[e] >= 0 and bnd_slot[e] >= 0:
                tn[bnd_out[e], bnd_slot[e]] = tid
            if bnd_a[e] != inf and bnd_b[e] != inf:
                last_real = tid
        # stitch the fan: edge (b, p) of one new triangle twins edge (p, a)
        # of the new triangle whose boundary edge starts at b
        for e in range(nbnd):
            target = bnd_b[e]
            for e2 in range(nbnd):
                if bnd_a[e2] == target:
                    tn[new_ids[e], 1] = new_ids[e2]
                    tn[new_ids[e2], 2] = new_ids[e]
                    break

    count = 0
    for t in range(ntri):
        if alive[t] and tv[t, 0] != inf and tv[t, 1] != inf and tv[t, 2] != inf:
            count += 1
    out = np.empty((count, 3), np.int32)
    w = 0
    for t in range(ntri):
        if alive[t] and tv[t, 0] != inf and tv[t, 1] != inf and tv[t, 2] != inf:
            out[w, 0] = tv[t, 0]
            out[w, 1] = tv[t, 1]
            out[w, 2] = tv[t, 2]
            w += 1
    return out, count, 0


@njit(cache=True)
def _dedup_mask(pts, eps):
    """Greedy first-wins duplicate merge; returns (keep flags, representative
    index for every input point)."""
    n = pts.shape[0]
    keep = np.ones(n, np.uint8)
    rep = np.empty(n, np.int64)
    e2 = eps * eps
    for i in range(n):
        rep[i] = i
        for j in range(i):
            if keep[j]:
                dx = pts[i, 0] - pts[j, 0]
                dy = pts[i, 1] - pts[j, 1]
                if dx * dx + dy * dy <= e2:
                    keep[i] = 0
                    rep[i] = j
                    break
    return keep, rep


def dedup_points(points: np.ndarray, eps: float = MERGE_EPS):
    """Merge points closer than eps (first occurrence wins).

    Returns (unique (k, 2), index_map (n,)) where index_map[i] is the row in
    the unique array representing input point i."""
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 2)
    keep, rep = _dedup_mask(pts, eps)
    keep = keep.astype(bool)
    new_index = np.cumsum(keep) - 1
    return pts[keep], new_index[rep]


def triangulate(points: np.ndarray) -> Triangulation2D:
    """Delaunay triangulation of a 2D point set.

    Input points are merged at MERGE_EPS; the result covers the convex hull
    of the distinct points with CCW triangles.  Raises ValueError for fewer
    than 3 distinct points ("insufficient points") or an all-collinear set
    ("degenerate input").
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite input point")
    unique, _ = dedup_points(pts)
    if unique.shape[0] < 3:
        raise ValueError("insufficient points")

    lo = unique.min(axis=0)
    span = unique.max(axis=0) - lo
    scale = max(span[0], span[1])
    if scale <= 0:
        raise ValueError("insufficient points")
    norm = (unique - lo) / scale

    # lexicographic insertion order makes walks short and the result
    # independent of the caller's point order
    order = np.lexsort((norm[:, 1], norm[:, 0]))
    tris_sorted, count, status = _bowyer_watson(np.ascontiguousarray(norm[order]))
    if status == 1:
        raise ValueError("degenerate input")
    if status == 2:
        raise RuntimeError("triangulation failed (degenerate configuration)")
    triangles = order[tris_sorted.astype(np.int64)].astype(np.int32)
    return Triangulation2D(unique, triangles)


def in_circumcircle(a, b, c, p, eps: float = EPS_PRED) -> bool:
    """True iff p lies strictly inside the circumcircle of triangle abc.

    Accepts either orientation of abc; raises for a collinear triple.
    Computed on locally normalised coordinates so eps acts at unit scale.
    """
    q = np.asarray([a, b, c, p], dtype=np.float64)
    centre = q.mean(axis=0)
    scale = np.abs(q - centre).max()
    if scale <= 0:
        raise ValueError("degenerate triangle")
    qa, qb, qc, qp = (q - centre) / scale
    o = _orient(qa[0], qa[1], qb[0], qb[1], qc[0], qc[1])
    if abs(o) <= eps:
        raise ValueError("degenerate triangle")
    det, _ = _incircle_mag(qa[0], qa[1], qb[0], qb[1], qc[0], qc[1],
                           qp[0], qp[1])
    if o < 0:
        det = -det
    return det > eps


@njit(cache=True)
def _locate_kernel(vx, vy, tris, qx, qy, tol):
    nq = qx.shape[0]
    nt = tris.shape[0]
    out = np.full(nq, -1, np.int64)
    for q in range(nq):
        x = qx[q]
        y = qy[q]
        for t in range(nt):
            ax = vx[tris[t, 0]]
            ay = vy[tris[t, 0]]
            bx = vx[tris[t, 1]]
            by = vy[tris[t, 1]]
            cx = vx[tris[t, 2]]
            cy = vy[tris[t, 2]]
            # bounding-box reject before the barycentric test
            if x < min(ax, min(bx, cx)) - 1e-9 or x > max(ax, max(bx, cx)) + 1e-9:
                continue
            if y < min(ay, min(by, cy)) - 1e-9 or y > max(ay, max(by, cy)) + 1e-9:
                continue
            det = _orient(ax, ay, bx, by, cx, cy)
            if det == 0.0:
                continue
            wa = _orient(bx, by, cx, cy, x, y) / det
            wb = _orient(cx, cy, ax, ay, x, y) / det
            wc = 1.0 - wa - wb
            if wa >= -tol and wb >= -tol and wc >= -tol:
                out[q] = t
                break
    return out


def locate_batch(vertices: np.ndarray, triangles: np.ndarray,
                 points: np.ndarray, tol: float = EPS_PRED) -> np.ndarray:
    """Lowest containing triangle index per query point, -1 when outside.

    Works on any triangle soup (the projected map mesh as well as proper
    triangulations); barycentric coordinates are tested at >= -tol.
    """
    v = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 2)
    t = np.ascontiguousarray(triangles, dtype=np.int32).reshape(-1, 3)
    q = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    return _locate_kernel(np.ascontiguousarray(v[:, 0]),
                          np.ascontiguousarray(v[:, 1]), t,
                          np.ascontiguousarray(q[:, 0]),
                          np.ascontiguousarray(q[:, 1]), tol)


def locate(tri: Triangulation2D, p) -> int | None:
    """Triangle of tri containing p (ties resolved to the lowest index), or
    None when p is outside the hull."""
    idx = locate_batch(tri.vertices, tri.triangles, np.asarray(p).reshape(1, 2))
    return None if idx[0] < 0 else int(idx[0])
