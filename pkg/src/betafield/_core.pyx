# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the hot kernels in ``_core_py``.

Same signatures, same semantics; see that module for documentation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, sqrt

cnp.import_array()

BACKEND = "cython"


def greedy_net(points, seeds, double delta):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] seed_idx = np.ascontiguousarray(seeds, dtype=np.intp)
    if pts.shape[1] == 2:
        return _greedy_net_grid2d(pts, seed_idx, delta)
    return _greedy_net_brute(pts, seed_idx, delta)


def _greedy_net_grid2d(cnp.ndarray[cnp.float64_t, ndim=2] pts,
                       cnp.ndarray[cnp.intp_t, ndim=1] seed_idx, double delta):
    cdef Py_ssize_t n = pts.shape[0]
    cdef double d2min = delta * delta
    cdef double inv = 1.0 / delta
    cdef dict cells = {}
    cdef list kept = []
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] is_seed = np.zeros(n, dtype=np.uint8)
    cdef Py_ssize_t si, i, jj
    cdef long long cx, cy, ox, oy
    cdef double d2, dx, dy
    cdef bint ok
    cdef object key, bucket
    # packed int64 keys; the shift keeps coordinates positive
    cdef long long SHIFT = 1 << 30

    for si in range(seed_idx.shape[0]):
        i = seed_idx[si]
        is_seed[i] = 1
        kept.append(i)
        cx = <long long>(pts[i, 0] * inv + SHIFT)
        cy = <long long>(pts[i, 1] * inv + SHIFT)
        key = cx * 4294967296LL + cy
        bucket = cells.get(key)
        if bucket is None:
            cells[key] = [i]
        else:
            (<list>bucket).append(i)
    for i in range(n):
        if is_seed[i]:
            continue
        cx = <long long>(pts[i, 0] * inv + SHIFT)
        cy = <long long>(pts[i, 1] * inv + SHIFT)
        ok = True
        for ox in range(-1, 2):
            for oy in range(-1, 2):
                key = (cx + ox) * 4294967296LL + (cy + oy)
                bucket = cells.get(key)
                if bucket is not None:
                    for jj in <list>bucket:
                        dx = pts[i, 0] - pts[jj, 0]
                        dy = pts[i, 1] - pts[jj, 1]
                        d2 = dx * dx + dy * dy
                        if d2 < d2min:
                            ok = False
                            break
                    if not ok:
                        break
            if not ok:
                break
        if ok:
            kept.append(i)
            key = cx * 4294967296LL + cy
            bucket = cells.get(key)
            if bucket is None:
                cells[key] = [i]
            else:
                (<list>bucket).append(i)
    return np.asarray(kept, dtype=np.intp)


def _greedy_net_brute(cnp.ndarray[cnp.float64_t, ndim=2] pts,
                      cnp.ndarray[cnp.intp_t, ndim=1] seed_idx, double delta):
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t dim = pts.shape[1]
    cdef cnp.ndarray[cnp.intp_t, ndim=1] kept = np.empty(n, dtype=np.intp)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] is_seed = np.zeros(n, dtype=np.uint8)
    cdef Py_ssize_t nk = 0
    cdef double d2min = delta * delta
    cdef Py_ssize_t i, j, c
    cdef double d2, df
    cdef bint ok
    for i in range(seed_idx.shape[0]):
        is_seed[seed_idx[i]] = 1
        kept[nk] = seed_idx[i]
        nk += 1
    for i in range(n):
        if is_seed[i]:
            continue
        ok = True
        for j in range(nk):
            d2 = 0.0
            for c in range(dim):
                df = pts[i, c] - pts[kept[j], c]
                d2 += df * df
            if d2 < d2min:
                ok = False
                break
        if ok:
            kept[nk] = i
            nk += 1
    return kept[:nk].copy()


def min_dists(queries, points):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] q = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    cdef Py_ssize_t m = q.shape[0], k = p.shape[0], dim = q.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m)
    cdef Py_ssize_t i, j, c
    cdef double best, d2, df
    for i in range(m):
        best = INFINITY
        for j in range(k):
            d2 = 0.0
            for c in range(dim):
                df = q[i, c] - p[j, c]
                d2 += df * df
            if d2 < best:
                best = d2
        out[i] = sqrt(best)
    return out


def sup_min_dist(queries, points, double stop_above=INFINITY):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] q = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    cdef Py_ssize_t m = q.shape[0], k = p.shape[0], dim = q.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double best2, d2, df, sup2 = 0.0
    cdef double stop2 = stop_above * stop_above if stop_above != INFINITY else INFINITY
    for i in range(m):
        best2 = INFINITY
        for j in range(k):
            d2 = 0.0
            for c in range(dim):
                df = q[i, c] - p[j, c]
                d2 += df * df
            if d2 < best2:
                best2 = d2
                if best2 <= sup2:
                    break
        if best2 > sup2:
            sup2 = best2
            if sup2 > stop2:
                return sqrt(sup2)
    return sqrt(sup2)


def sup_dist_to_line(points, anchor, direction):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a = np.ascontiguousarray(anchor, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.ascontiguousarray(direction, dtype=np.float64)
    cdef Py_ssize_t m = pts.shape[0], dim = pts.shape[1]
    cdef Py_ssize_t i, c
    cdef double nrm = 0.0, t, d2, df, best = 0.0
    for c in range(dim):
        nrm += u[c] * u[c]
    nrm = sqrt(nrm)
    for i in range(m):
        t = 0.0
        for c in range(dim):
            t += (pts[i, c] - a[c]) * (u[c] / nrm)
        d2 = 0.0
        for c in range(dim):
            df = pts[i, c] - a[c] - t * (u[c] / nrm)
            d2 += df * df
        if d2 > best:
            best = d2
    return sqrt(best)


def proj_minmax(points, direction):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.ascontiguousarray(direction, dtype=np.float64)
    cdef Py_ssize_t m = pts.shape[0], dim = pts.shape[1]
    cdef Py_ssize_t i, c
    cdef double nrm = 0.0, t
    cdef double lo = INFINITY, hi = -INFINITY
    for c in range(dim):
        nrm += u[c] * u[c]
    nrm = sqrt(nrm)
    for i in range(m):
        t = 0.0
        for c in range(dim):
            t += pts[i, c] * u[c]
        t /= nrm
        if t < lo:
            lo = t
        if t > hi:
            hi = t
    return lo, hi


def meb(points, Py_ssize_t iters=200):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    cdef Py_ssize_t m = pts.shape[0], dim = pts.shape[1]
    if m == 0:
        raise ValueError("meb of empty set")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c = pts.mean(axis=0)
    cdef Py_ssize_t it, i, j, far
    cdef double d2, df, best
    for it in range(1, iters + 1):
        best = -1.0
        far = 0
        for i in range(m):
            d2 = 0.0
            for j in range(dim):
                df = pts[i, j] - c[j]
                d2 += df * df
            if d2 > best:
                best = d2
                far = i
        for j in range(dim):
            c[j] = c[j] + (pts[far, j] - c[j]) / (it + 1.0)
    best = 0.0
    for i in range(m):
        d2 = 0.0
        for j in range(dim):
            df = pts[i, j] - c[j]
            d2 += df * df
        if d2 > best:
            best = d2
    return np.asarray(c), sqrt(best)


def polyline_min_dists(queries, verts):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] q = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] v = np.ascontiguousarray(np.atleast_2d(verts), dtype=np.float64)
    cdef Py_ssize_t m = q.shape[0], nv = v.shape[0], dim = q.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m)
    cdef Py_ssize_t i, s, c
    cdef double best, t, ab2, d2, df
    if nv == 1:
        for i in range(m):
            d2 = 0.0
            for c in range(dim):
                df = q[i, c] - v[0, c]
                d2 += df * df
            out[i] = sqrt(d2)
        return out
    for i in range(m):
        best = INFINITY
        for s in range(nv - 1):
            ab2 = 0.0
            t = 0.0
            for c in range(dim):
                df = v[s + 1, c] - v[s, c]
                ab2 += df * df
                t += (q[i, c] - v[s, c]) * df
            if ab2 > 0.0:
                t /= ab2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            else:
                t = 0.0
            d2 = 0.0
            for c in range(dim):
                df = q[i, c] - (v[s, c] + t * (v[s + 1, c] - v[s, c]))
                d2 += df * df
            if d2 < best:
                best = d2
        out[i] = sqrt(best)
    return out


def segments_min_dists(queries, a_in, b_in):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] q = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(np.atleast_2d(a_in), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] b = np.ascontiguousarray(np.atleast_2d(b_in), dtype=np.float64)
    cdef Py_ssize_t m = q.shape[0], ns = a.shape[0], dim = q.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(m)
    cdef Py_ssize_t i, s, c
    cdef double best, t, ab2, d2, df
    for i in range(m):
        best = INFINITY
        for s in range(ns):
            ab2 = 0.0
            t = 0.0
            for c in range(dim):
                df = b[s, c] - a[s, c]
                ab2 += df * df
                t += (q[i, c] - a[s, c]) * df
            if ab2 > 0.0:
                t /= ab2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            else:
                t = 0.0
            d2 = 0.0
            for c in range(dim):
                df = q[i, c] - (a[s, c] + t * (b[s, c] - a[s, c]))
                d2 += df * df
            if d2 < best:
                best = d2
        out[i] = sqrt(best)
    return out


def pairwise_min_gap(points):
    from scipy.spatial import cKDTree
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] < 2:
        return np.inf
    d, _ = cKDTree(pts).query(pts, k=2)
    gaps = d[:, 1]
    gaps = gaps[gaps > 0]
    return float(gaps.min()) if len(gaps) else 0.0


def best_near_pair(points, center, double sep_min):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c = np.ascontiguousarray(center, dtype=np.float64)
    cdef Py_ssize_t m = pts.shape[0], dim = pts.shape[1]
    if m < 2:
        return (-1, -1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dc = np.linalg.norm(pts - c, axis=1)
    cdef cnp.ndarray[cnp.intp_t, ndim=1] order = np.lexsort((np.arange(m), dc))
    cdef double s2 = sep_min * sep_min
    cdef Py_ssize_t b, a, ia, jb, cc
    cdef double d2, df
    for b in range(1, m):
        jb = order[b]
        for a in range(b):
            ia = order[a]
            d2 = 0.0
            for cc in range(dim):
                df = pts[ia, cc] - pts[jb, cc]
                d2 += df * df
            if d2 >= s2:
                if ia < jb:
                    return (ia, jb)
                return (jb, ia)
    return (-1, -1)


def nearest_index(queries, points):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] q = np.ascontiguousarray(np.atleast_2d(queries), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] p = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    cdef Py_ssize_t m = q.shape[0], k = p.shape[0], dim = q.shape[1]
    cdef cnp.ndarray[cnp.intp_t, ndim=1] out = np.empty(m, dtype=np.intp)
    cdef Py_ssize_t i, j, c, arg
    cdef double best, d2, df
    for i in range(m):
        best = INFINITY
        arg = 0
        for j in range(k):
            d2 = 0.0
            for c in range(dim):
                df = q[i, c] - p[j, c]
                d2 += df * df
            if d2 < best:
                best = d2
                arg = j
        out[i] = arg
    return out
