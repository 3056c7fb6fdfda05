"""Pure-Python twins of the compiled kernels in ``scalemix._core``.

Selected by :mod:`scalemix.backend` when the extension is unavailable or when
``SCALEMIX_PURE_PYTHON=1``.  Graph routines use Python-int bitsets (one int
per adjacency row), which keeps the fallback usable at realistic sizes; the
stochastic kernels are vectorised over NumPy where the algorithm allows it.

Both backends expose the same functions with the same semantics:

- ``is_chordal(adj)``
- ``decompose(adj)`` -> ``(cliques, separators)`` or ``None`` if not chordal
- ``legal_adds(adj)`` -> array of addable (u, v) pairs, u < v, lexicographic
- ``add_is_legal(adj, u, v)``
- ``pg_ones(rng, count)`` -> exact PG(1, 0) draws
- ``logdet_eye_plus(gram, rho)`` -> log det(I + gram / rho)
- ``gamma_pair_sweep(...)`` -> one spike/slab sweep over all pairs
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtri

IMPL = "python"

# ---------------------------------------------------------------------------
# bitset adjacency helpers


def _pack(adj):
    """Symmetric 0/1 adjacency matrix -> list of per-row Python-int bitsets."""
    a = np.ascontiguousarray(np.asarray(adj, dtype=np.uint8))
    packed = np.packbits(a, axis=1, bitorder="little")
    return [int.from_bytes(row.tobytes(), "little") for row in packed]


def _iter_bits(mask):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _mcs(bits, q):
    """Maximum cardinality search, lowest-index tie break.

    Returns (selection order, chordal flag).  The reversed order is a perfect
    elimination ordering iff the graph is chordal (Tarjan-Yannakakis), which
    is equivalent to every vertex's earlier-selected neighbors forming a
    clique; that is what gets checked here.
    """
    weight = [0] * q
    order = []
    numbered = 0
    chordal = True
    for _ in range(q):
        best, best_w = -1, -1
        for v in range(q):
            if not (numbered >> v) & 1 and weight[v] > best_w:
                best, best_w = v, weight[v]
        v = best
        earlier = bits[v] & numbered
        for u in _iter_bits(earlier):
            if earlier & ~(bits[u] | (1 << u)):
                chordal = False
                break
        if not chordal:
            break
        order.append(v)
        numbered |= 1 << v
        for u in _iter_bits(bits[v] & ~numbered):
            weight[u] += 1
    return order, chordal


def is_chordal(adj):
    q = adj.shape[0]
    if q == 0:
        return True
    bits = _pack(adj)
    _, ok = _mcs(bits, q)
    return ok


def _decompose_bits(bits, q):
    order, ok = _mcs(bits, q)
    if not ok:
        return None
    numbered = 0
    candidates = []  # (representative selection index, clique bitset)
    for idx, v in enumerate(order):
        candidates.append((idx, (bits[v] & numbered) | (1 << v)))
        numbered |= 1 << v
    # keep maximal candidates only; every maximal clique is the candidate of
    # its last-selected member, so candidate order = perfect sequence order
    cliques = []
    for idx, c in candidates:
        if not any(c != o and c & ~o == 0 for _, o in candidates):
            cliques.append((idx, c))
    cliques.sort()
    seps = []
    union = 0
    out_cliques = []
    for j, (_, c) in enumerate(cliques):
        if j > 0:
            s = c & union
            # running intersection property: separator inside an earlier clique
            if s and not any(s & ~o == 0 for _, o in cliques[:j]):
                raise RuntimeError("perfect-sequence bookkeeping violated")
            seps.append(tuple(_iter_bits(s)))
        union |= c
        out_cliques.append(tuple(_iter_bits(c)))
    return out_cliques, seps


def decompose(adj):
    """(cliques, separators) as sorted vertex tuples, or None if not chordal."""
    q = adj.shape[0]
    if q == 0:
        return [], []
    return _decompose_bits(_pack(adj), q)


def _components(bits, q):
    comp = [-1] * q
    cid = 0
    for start in range(q):
        if comp[start] >= 0:
            continue
        seen = 1 << start
        frontier = seen
        while frontier:
            nxt = 0
            for u in _iter_bits(frontier):
                nxt |= bits[u]
            frontier = nxt & ~seen
            seen |= frontier
        for u in _iter_bits(seen):
            comp[u] = cid
        cid += 1
    return comp


def _add_legal_bits(bits, u, v):
    # addition keeps chordality iff N(u) & N(v) separates u from v
    blocked = bits[u] & bits[v]
    target = 1 << v
    seen = 1 << u
    frontier = seen
    while frontier:
        nxt = 0
        for w in _iter_bits(frontier):
            nxt |= bits[w]
        if nxt & target:
            return False
        frontier = nxt & ~seen & ~blocked
        seen |= frontier
    return True


def add_is_legal(adj, u, v):
    bits = _pack(adj)
    if (bits[u] >> v) & 1:
        raise ValueError("edge already present")
    comp = _components(bits, adj.shape[0])
    if comp[u] != comp[v]:
        return True
    return _add_legal_bits(bits, u, v)


def legal_adds(adj):
    q = adj.shape[0]
    bits = _pack(adj)
    comp = _components(bits, q)
    out = []
    for u in range(q):
        row = bits[u]
        for v in range(u + 1, q):
            if (row >> v) & 1:
                continue
            if comp[u] != comp[v] or _add_legal_bits(bits, u, v):
                out.append((u, v))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


# ---------------------------------------------------------------------------
# Polya-Gamma PG(1, 0): exact alternating-series accept/reject (tilt 0).
# Proposal: mixture of an inverse-Gaussian-type piece on (0, t] and an
# exponential tail on (t, inf) for the Jacobi-type variable J*(1,0); the
# returned value is J*/4.

_PG_T = 0.64
_PG_RATE = math.pi * math.pi / 8.0
_PG_P_LEFT = 2.0 * math.erfc(1.0 / math.sqrt(2.0 * _PG_T))
_PG_P_RIGHT = (4.0 / math.pi) * math.exp(-_PG_RATE * _PG_T)
_PG_LEFT_FRAC = _PG_P_LEFT / (_PG_P_LEFT + _PG_P_RIGHT)


def _pg_coef(n, x):
    """Series coefficient a_n(x) of the J*(1,0) density, piecewise in x."""
    x = np.asarray(x)
    half = n + 0.5
    small = x <= _PG_T
    out = np.empty_like(x)
    xs = x[small]
    out[small] = math.pi * half * (2.0 / (math.pi * xs)) ** 1.5 * np.exp(
        -2.0 * half * half / xs
    )
    xl = x[~small]
    out[~small] = math.pi * half * np.exp(-half * half * math.pi**2 * xl / 2.0)
    return out


def pg_ones(rng, count):
    out = np.empty(count)
    todo = np.arange(count)
    while todo.size:
        m = todo.size
        x = np.empty(m)
        left = rng.random(m) < _PG_LEFT_FRAC
        n_left = int(left.sum())
        if n_left:
            e = np.empty(n_left)
            rem = np.arange(n_left)
            while rem.size:
                e1 = rng.standard_exponential(rem.size)
                e2 = rng.standard_exponential(rem.size)
                ok = e1 * e1 <= 2.0 * e2 / _PG_T
                e[rem[ok]] = e1[ok]
                rem = rem[~ok]
            x[left] = _PG_T / (1.0 + _PG_T * e) ** 2
        if m - n_left:
            x[~left] = _PG_T + rng.standard_exponential(m - n_left) / _PG_RATE
        s = _pg_coef(0, x)
        y = rng.random(m) * s
        undecided = np.ones(m, dtype=bool)
        accepted = np.zeros(m, dtype=bool)
        n = 0
        while undecided.any():
            n += 1
            idx = np.flatnonzero(undecided)
            term = _pg_coef(n, x[idx])
            if n % 2 == 1:
                s[idx] -= term
                hit = y[idx] <= s[idx]
                accepted[idx[hit]] = True
            else:
                s[idx] += term
                hit = y[idx] > s[idx]
            undecided[idx[hit]] = False
        out[todo[accepted]] = x[accepted] / 4.0
        todo = todo[~accepted]
    return out


# ---------------------------------------------------------------------------
# small-block determinant


def logdet_eye_plus(gram, rho):
    """log det(I + gram / rho) via Cholesky; gram must be symmetric PSD."""
    m = gram.shape[0]
    if m == 0:
        return 0.0
    if m == 1:
        return math.log1p(float(gram[0, 0]) / rho)
    chol = np.linalg.cholesky(np.eye(m) + gram / rho)
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


# ---------------------------------------------------------------------------
# spike/slab sweep over partial-correlation entries (mixed model hot loop)


def gamma_pair_sweep(
    gamma,
    ainv,
    incl,
    theta,
    gram,
    n_obs,
    slab_prob,
    rw_sd,
    logdet_gamma,
    rng,
):
    """One sweep of per-pair toggle + within-slab refresh moves on Gamma.

    ``gamma`` (unit-diagonal PD matrix), ``ainv`` (its inverse) and ``incl``
    (uint8 inclusion indicators) are updated in place.  The Gaussian
    likelihood enters through ``theta`` and the data Gram matrix ``gram``;
    the determinant ratio of a symmetric pair update is
    ``(1 + dt*A_uv)^2 - dt^2*A_uu*A_vv``, whose positivity over the proposal
    interval is exactly the positive-definiteness constraint, so accepted
    moves are PD by construction.

    Returns ``(logdet_gamma, moves)`` where moves counts
    (on_prop, on_acc, off_prop, off_acc, rw_prop, rw_acc).
    """
    p = gamma.shape[0]
    half_n = 0.5 * n_obs
    log_w_ratio = math.log(slab_prob) - math.log1p(-slab_prob)
    counts = [0, 0, 0, 0, 0, 0]
    for u in range(p):
        for v in range(u + 1, p):
            auu = float(ainv[u, u])
            avv = float(ainv[v, v])
            auv = float(ainv[u, v])
            s = math.sqrt(auu * avv)
            lo = -1.0 / (auv + s)  # negative
            hi = 1.0 / (s - auv)  # positive
            t_cur = float(gamma[u, v])
            lik_coef = float(theta[u]) * float(theta[v]) * float(gram[u, v])
            if not incl[u, v]:
                # toggle on: draw slab value uniformly on the PD interval
                counts[0] += 1
                t_new = lo + rng.random() * (hi - lo)
                dt = t_new
                ratio = (1.0 + dt * auv) ** 2 - dt * dt * auu * avv
                if ratio <= 1e-12:
                    continue
                log_acc = (
                    log_w_ratio - math.log(2.0) + half_n * math.log(ratio) - lik_coef * dt
                )
                if math.log(rng.random()) >= log_acc:
                    continue
                counts[1] += 1
                incl[u, v] = incl[v, u] = 1
            else:
                if rng.random() < 0.5:
                    # toggle off: deterministic down-proposal to exact zero
                    counts[2] += 1
                    dt = -t_cur
                    ratio = (1.0 + dt * auv) ** 2 - dt * dt * auu * avv
                    if ratio <= 1e-12:
                        continue
                    log_acc = (
                        -log_w_ratio
                        + math.log(2.0)
                        + half_n * math.log(ratio)
                        - lik_coef * dt
                    )
                    if math.log(rng.random()) >= log_acc:
                        continue
                    counts[3] += 1
                    incl[u, v] = incl[v, u] = 0
                    t_new = 0.0
                else:
                    # within-slab random walk, auto-reject outside PD interval
                    counts[4] += 1
                    t_new = t_cur + rw_sd * ndtri(rng.random())
                    dt = t_new - t_cur
                    if not (lo + t_cur < t_new < hi + t_cur):
                        continue
                    ratio = (1.0 + dt * auv) ** 2 - dt * dt * auu * avv
                    if ratio <= 1e-12:
                        continue
                    log_acc = half_n * math.log(ratio) - lik_coef * dt
                    if math.log(rng.random()) >= log_acc:
                        continue
                    counts[5] += 1
            # accepted: apply the symmetric rank-2 update to gamma / ainv
            gamma[u, v] = gamma[v, u] = t_new
            if dt == 0.0:
                continue
            logdet_gamma += math.log(ratio)
            c = auv + 1.0 / dt
            det_k = auu * avv - c * c
            col_u = ainv[:, u].copy()
            col_v = ainv[:, v].copy()
            upd = (
                avv * np.outer(col_u, col_u)
                - c * (np.outer(col_u, col_v) + np.outer(col_v, col_u))
                + auu * np.outer(col_v, col_v)
            )
            ainv -= upd / det_k
    return logdet_gamma, tuple(counts)
