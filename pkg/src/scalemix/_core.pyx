# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Reference semantics live in ``scalemix._core_py``;
this module exists because the MCMC inner loops (graph-move legality,
PG(1,0) rejection sampling, spike/slab pair sweeps, small-block
determinants) dominate chain runtime."""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport M_PI, erfc, exp, log, log1p, pow, sqrt
from libc.stdint cimport int64_t, uint8_t, uint64_t
from numpy.random cimport bitgen_t
from scipy.special.cython_special cimport ndtri

cnp.import_array()

IMPL = "cython"

cdef double PG_T = 0.64
cdef double PG_RATE = M_PI * M_PI / 8.0
cdef double PG_P_LEFT = 2.0 * erfc(1.0 / sqrt(2.0 * PG_T))
cdef double PG_P_RIGHT = (4.0 / M_PI) * exp(-PG_RATE * PG_T)
cdef double PG_LEFT_FRAC = PG_P_LEFT / (PG_P_LEFT + PG_P_RIGHT)


# ---------------------------------------------------------------------------
# bitset adjacency

cdef cnp.ndarray _pack_words(object adj):
    cdef const cnp.uint8_t[:, :] a = np.ascontiguousarray(adj, dtype=np.uint8)
    cdef int q = a.shape[0]
    cdef int width = (q + 63) >> 6
    words = np.zeros((q, width), dtype=np.uint64)
    cdef uint64_t[:, ::1] w = words
    cdef int u, v
    for u in range(q):
        for v in range(q):
            if a[u, v] and u != v:
                w[u, v >> 6] |= (<uint64_t>1) << (v & 63)
    return words


cdef inline bint _get_bit(uint64_t[:, ::1] w, int u, int v):
    return (w[u, v >> 6] >> (v & 63)) & 1


cdef int _mcs_words(uint64_t[:, ::1] bits, int q, int width,
                    int[::1] order, uint64_t[::1] numbered, int[::1] weight):
    """MCS with lowest-index tie break; returns 1 iff chordal."""
    cdef int i, v, u, k, best, best_w
    cdef int step
    cdef uint64_t m, low, bad
    for v in range(q):
        weight[v] = 0
    for k in range(width):
        numbered[k] = 0
    for step in range(q):
        best = -1
        best_w = -1
        for v in range(q):
            if not ((numbered[v >> 6] >> (v & 63)) & 1) and weight[v] > best_w:
                best = v
                best_w = weight[v]
        v = best
        # earlier-selected neighbors must form a clique
        for k in range(width):
            m = bits[v, k] & numbered[k]
            while m:
                low = m & (~m + 1)
                u = (k << 6) + _ctz(low)
                m ^= low
                for i in range(width):
                    bad = (bits[v, i] & numbered[i]) & ~bits[u, i]
                    if i == (u >> 6):
                        bad &= ~((<uint64_t>1) << (u & 63))
                    if bad:
                        return 0
        order[step] = v
        numbered[v >> 6] |= (<uint64_t>1) << (v & 63)
        for k in range(width):
            m = bits[v, k] & ~numbered[k]
            while m:
                low = m & (~m + 1)
                weight[(k << 6) + _ctz(low)] += 1
                m ^= low
    return 1


cdef inline int _ctz(uint64_t x):
    cdef int n = 0
    while not (x & 1):
        x >>= 1
        n += 1
    return n


def is_chordal(adj):
    cdef int q = adj.shape[0]
    if q == 0:
        return True
    words = _pack_words(adj)
    order = np.empty(q, dtype=np.int32)
    numbered = np.empty((q + 63) >> 6, dtype=np.uint64)
    weight = np.empty(q, dtype=np.int32)
    return bool(_mcs_words(words, q, (q + 63) >> 6, order, numbered, weight))


cdef list _row_to_tuple(uint64_t[:, ::1] rows, int r, int width):
    cdef list out = []
    cdef int k, base
    cdef uint64_t m, low
    for k in range(width):
        m = rows[r, k]
        base = k << 6
        while m:
            low = m & (~m + 1)
            out.append(base + _ctz(low))
            m ^= low
    return out


def decompose(adj):
    """(cliques, separators) in perfect order, or None if not chordal."""
    cdef int q = adj.shape[0]
    if q == 0:
        return [], []
    cdef int width = (q + 63) >> 6
    words_arr = _pack_words(adj)
    cdef uint64_t[:, ::1] bits = words_arr
    order_arr = np.empty(q, dtype=np.int32)
    cdef int[::1] order = order_arr
    numbered_arr = np.zeros(width, dtype=np.uint64)
    cdef uint64_t[::1] numbered = numbered_arr
    weight_arr = np.empty(q, dtype=np.int32)
    if not _mcs_words(bits, q, width, order, numbered_arr, weight_arr):
        return None
    # candidate cliques: vertex + earlier-selected neighbors
    cand_arr = np.zeros((q, width), dtype=np.uint64)
    cdef uint64_t[:, ::1] cand = cand_arr
    cdef int step, v, k
    for k in range(width):
        numbered[k] = 0
    for step in range(q):
        v = order[step]
        for k in range(width):
            cand[step, k] = bits[v, k] & numbered[k]
        cand[step, v >> 6] |= (<uint64_t>1) << (v & 63)
        numbered[v >> 6] |= (<uint64_t>1) << (v & 63)
    # subset-filter to maximal cliques (candidate order = perfect order)
    keep_arr = np.ones(q, dtype=np.uint8)
    cdef uint8_t[::1] keep = keep_arr
    cdef int i, j
    cdef bint subset, equal
    for i in range(q):
        for j in range(q):
            if i == j:
                continue
            subset = True
            equal = True
            for k in range(width):
                if cand[i, k] & ~cand[j, k]:
                    subset = False
                    break
                if cand[i, k] != cand[j, k]:
                    equal = False
            if subset and not equal:
                keep[i] = 0
                break
    union_arr = np.zeros(width, dtype=np.uint64)
    cdef uint64_t[::1] union_ = union_arr
    sep_arr = np.zeros((1, width), dtype=np.uint64)
    cdef uint64_t[:, ::1] sep = sep_arr
    cdef list cliques = []
    cdef list seps = []
    cdef bint first = True, inside, nonempty
    cdef int jj
    for i in range(q):
        if not keep[i]:
            continue
        if not first:
            nonempty = False
            for k in range(width):
                sep[0, k] = cand[i, k] & union_[k]
                if sep[0, k]:
                    nonempty = True
            if nonempty:
                # running intersection property check
                inside = False
                for jj in range(i):
                    if not keep[jj]:
                        continue
                    inside = True
                    for k in range(width):
                        if sep[0, k] & ~cand[jj, k]:
                            inside = False
                            break
                    if inside:
                        break
                if not inside:
                    raise RuntimeError("perfect-sequence bookkeeping violated")
            seps.append(tuple(_row_to_tuple(sep, 0, width)))
        first = False
        for k in range(width):
            union_[k] |= cand[i, k]
        cliques.append(tuple(_row_to_tuple(cand, i, width)))
    return cliques, seps


cdef void _component_labels(uint64_t[:, ::1] bits, int q, int width, int[::1] comp):
    cdef int v, u, k, i, cid = 0
    cdef bint grew
    seen_arr = np.zeros(width, dtype=np.uint64)
    reach_arr = np.zeros(width, dtype=np.uint64)
    cdef uint64_t[::1] seen = seen_arr
    cdef uint64_t[::1] reach = reach_arr
    cdef uint64_t m, low
    for v in range(q):
        comp[v] = -1
    for v in range(q):
        if comp[v] >= 0:
            continue
        for k in range(width):
            reach[k] = 0
        reach[v >> 6] = (<uint64_t>1) << (v & 63)
        grew = True
        while grew:
            grew = False
            for k in range(width):
                seen[k] = reach[k]
            for k in range(width):
                m = seen[k]
                while m:
                    low = m & (~m + 1)
                    u = (k << 6) + _ctz(low)
                    m ^= low
                    for i in range(width):
                        if bits[u, i] & ~reach[i]:
                            reach[i] |= bits[u, i]
                            grew = True
        for k in range(width):
            m = reach[k]
            while m:
                low = m & (~m + 1)
                comp[(k << 6) + _ctz(low)] = cid
                m ^= low
        cid += 1


cdef bint _add_legal_words(uint64_t[:, ::1] bits, int q, int width, int u, int v,
                           uint64_t[::1] blocked, uint64_t[::1] seen,
                           uint64_t[::1] frontier, uint64_t[::1] nxt):
    """Addition of (u, v) keeps chordality iff N(u) & N(v) separates u, v."""
    cdef int k, w, i
    cdef uint64_t m, low
    cdef bint any_frontier = True
    for k in range(width):
        blocked[k] = bits[u, k] & bits[v, k]
        seen[k] = 0
        frontier[k] = 0
    seen[u >> 6] = (<uint64_t>1) << (u & 63)
    frontier[u >> 6] = seen[u >> 6]
    while any_frontier:
        for k in range(width):
            nxt[k] = 0
        for k in range(width):
            m = frontier[k]
            while m:
                low = m & (~m + 1)
                w = (k << 6) + _ctz(low)
                m ^= low
                for i in range(width):
                    nxt[i] |= bits[w, i]
        if (nxt[v >> 6] >> (v & 63)) & 1:
            return False
        any_frontier = False
        for k in range(width):
            frontier[k] = nxt[k] & ~seen[k] & ~blocked[k]
            if frontier[k]:
                any_frontier = True
            seen[k] |= frontier[k]
    return True


def add_is_legal(adj, int u, int v):
    cdef int q = adj.shape[0]
    cdef int width = (q + 63) >> 6
    words_arr = _pack_words(adj)
    cdef uint64_t[:, ::1] bits = words_arr
    if _get_bit(bits, u, v):
        raise ValueError("edge already present")
    comp_arr = np.empty(q, dtype=np.int32)
    cdef int[::1] comp = comp_arr
    _component_labels(bits, q, width, comp)
    if comp[u] != comp[v]:
        return True
    scratch = np.zeros((4, width), dtype=np.uint64)
    return bool(_add_legal_words(bits, q, width, u, v,
                                 scratch[0], scratch[1], scratch[2], scratch[3]))


def legal_adds(adj):
    cdef int q = adj.shape[0]
    cdef int width = (q + 63) >> 6
    words_arr = _pack_words(adj)
    cdef uint64_t[:, ::1] bits = words_arr
    comp_arr = np.empty(q, dtype=np.int32)
    cdef int[::1] comp = comp_arr
    _component_labels(bits, q, width, comp)
    out_arr = np.empty((q * (q - 1) // 2 if q > 1 else 0, 2), dtype=np.int64)
    cdef int64_t[:, ::1] out = out_arr
    scratch = np.zeros((4, width), dtype=np.uint64)
    cdef uint64_t[::1] s0 = scratch[0]
    cdef uint64_t[::1] s1 = scratch[1]
    cdef uint64_t[::1] s2 = scratch[2]
    cdef uint64_t[::1] s3 = scratch[3]
    cdef int u, v
    cdef Py_ssize_t m = 0
    for u in range(q):
        for v in range(u + 1, q):
            if _get_bit(bits, u, v):
                continue
            if comp[u] != comp[v] or _add_legal_words(bits, q, width, u, v, s0, s1, s2, s3):
                out[m, 0] = u
                out[m, 1] = v
                m += 1
    return out_arr[:m].copy()


# ---------------------------------------------------------------------------
# Polya-Gamma PG(1, 0): exact alternating-series accept/reject (tilt 0)

cdef inline double _unif(bitgen_t* bg):
    return bg.next_double(bg.state)


cdef inline double _expo(bitgen_t* bg):
    return -log(1.0 - bg.next_double(bg.state))


cdef inline double _pg_coef(int n, double x):
    cdef double half = n + 0.5
    if x <= PG_T:
        return M_PI * half * pow(2.0 / (M_PI * x), 1.5) * exp(-2.0 * half * half / x)
    return M_PI * half * exp(-half * half * M_PI * M_PI * x / 2.0)


cdef double _pg_one(bitgen_t* bg):
    cdef double x, s, y, e1, e2
    cdef int n
    while True:
        if _unif(bg) < PG_LEFT_FRAC:
            while True:
                e1 = _expo(bg)
                e2 = _expo(bg)
                if e1 * e1 <= 2.0 * e2 / PG_T:
                    break
            x = PG_T / ((1.0 + PG_T * e1) * (1.0 + PG_T * e1))
        else:
            x = PG_T + _expo(bg) / PG_RATE
        s = _pg_coef(0, x)
        y = _unif(bg) * s
        n = 0
        while True:
            n += 1
            if n & 1:
                s -= _pg_coef(n, x)
                if y <= s:
                    return x / 4.0
            else:
                s += _pg_coef(n, x)
                if y > s:
                    break


def pg_ones(object rng, Py_ssize_t count):
    cdef bitgen_t* bg = <bitgen_t*> PyCapsule_GetPointer(
        rng.bit_generator.capsule, "BitGenerator")
    out_arr = np.empty(count)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(count):
        out[i] = _pg_one(bg)
    return out_arr


# ---------------------------------------------------------------------------
# small-block determinant

def logdet_eye_plus(gram, double rho):
    cdef const double[:, ::1] g = np.ascontiguousarray(gram, dtype=np.float64)
    cdef int m = g.shape[0]
    if m == 0:
        return 0.0
    if m == 1:
        return log1p(g[0, 0] / rho)
    if m > 64:
        chol = np.linalg.cholesky(np.eye(m) + np.asarray(gram) / rho)
        return 2.0 * float(np.sum(np.log(np.diag(chol))))
    cdef double buf[4096]
    cdef int i, j, k
    cdef double acc, out = 0.0
    for i in range(m):
        for j in range(i + 1):
            acc = g[i, j] / rho
            if i == j:
                acc += 1.0
            for k in range(j):
                acc -= buf[i * m + k] * buf[j * m + k]
            if i == j:
                if acc <= 0.0:
                    raise ValueError("block not positive definite")
                buf[i * m + i] = sqrt(acc)
                out += log(acc)
            else:
                buf[i * m + j] = acc / buf[j * m + j]
    return out


# ---------------------------------------------------------------------------
# spike/slab sweep over partial-correlation entries (mixed model hot loop)

def gamma_pair_sweep(double[:, ::1] gamma, double[:, ::1] ainv,
                     uint8_t[:, ::1] incl, double[::1] theta,
                     double[:, ::1] gram, double n_obs, double slab_prob,
                     double rw_sd, double logdet_gamma, object rng):
    cdef bitgen_t* bg = <bitgen_t*> PyCapsule_GetPointer(
        rng.bit_generator.capsule, "BitGenerator")
    cdef int p = gamma.shape[0]
    cdef double half_n = 0.5 * n_obs
    cdef double log_w_ratio = log(slab_prob) - log1p(-slab_prob)
    cdef int64_t c_on_p = 0, c_on_a = 0, c_off_p = 0, c_off_a = 0, c_rw_p = 0, c_rw_a = 0
    col_u_arr = np.empty(p)
    col_v_arr = np.empty(p)
    cdef double[::1] col_u = col_u_arr
    cdef double[::1] col_v = col_v_arr
    cdef int u, v, i, j
    cdef double auu, avv, auv, s, lo, hi, t_cur, t_new, dt, ratio, log_acc
    cdef double lik_coef, c, det_k, scale
    cdef bint accepted
    for u in range(p):
        for v in range(u + 1, p):
            auu = ainv[u, u]
            avv = ainv[v, v]
            auv = ainv[u, v]
            s = sqrt(auu * avv)
            lo = -1.0 / (auv + s)
            hi = 1.0 / (s - auv)
            t_cur = gamma[u, v]
            lik_coef = theta[u] * theta[v] * gram[u, v]
            accepted = False
            if not incl[u, v]:
                c_on_p += 1
                t_new = lo + _unif(bg) * (hi - lo)
                dt = t_new
                ratio = (1.0 + dt * auv) ** 2 - dt * dt * auu * avv
                if ratio > 1e-12:
                    log_acc = log_w_ratio - 0.6931471805599453 \
                        + half_n * log(ratio) - lik_coef * dt
                    if log(_unif(bg)) < log_acc:
                        accepted = True
                        incl[u, v] = 1
                        incl[v, u] = 1
                        c_on_a += 1
            elif _unif(bg) < 0.5:
                c_off_p += 1
                dt = -t_cur
                t_new = 0.0
                ratio = (1.0 + dt * auv) ** 2 - dt * dt * auu * avv
                if ratio > 1e-12:
                    log_acc = -log_w_ratio + 0.6931471805599453 \
                        + half_n * log(ratio) - lik_coef * dt
                    if log(_unif(bg)) < log_acc:
                        accepted = True
                        incl[u, v] = 0
                        incl[v, u] = 0
                        c_off_a += 1
            else:
                c_rw_p += 1
                t_new = t_cur + rw_sd * ndtri(_unif(bg))
                dt = t_new - t_cur
                if lo + t_cur < t_new < hi + t_cur:
                    ratio = (1.0 + dt * auv) ** 2 - dt * dt * auu * avv
                    if ratio > 1e-12:
                        log_acc = half_n * log(ratio) - lik_coef * dt
                        if log(_unif(bg)) < log_acc:
                            accepted = True
                            c_rw_a += 1
            if not accepted or dt == 0.0:
                if accepted:
                    gamma[u, v] = t_new
                    gamma[v, u] = t_new
                continue
            gamma[u, v] = t_new
            gamma[v, u] = t_new
            logdet_gamma += log(ratio)
            c = auv + 1.0 / dt
            det_k = auu * avv - c * c
            for i in range(p):
                col_u[i] = ainv[i, u]
                col_v[i] = ainv[i, v]
            for i in range(p):
                for j in range(p):
                    ainv[i, j] -= (avv * col_u[i] * col_u[j]
                                   - c * (col_u[i] * col_v[j] + col_v[i] * col_u[j])
                                   + auu * col_v[i] * col_v[j]) / det_k
    return logdet_gamma, (c_on_p, c_on_a, c_off_p, c_off_a, c_rw_p, c_rw_a)
