# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: extended value iteration, episode rollout, Dykstra.

Signatures and results match :mod:`envpoison._kernels_py`.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef void _optimistic_row(const double[:] p, double radius, const long[:] order,
                          double[:] out) noexcept nogil:
    cdef Py_ssize_t n = p.shape[0], j, k
    cdef double total = 0.0, excess, take
    for k in range(n):
        out[k] = p[k]
    k = order[0]
    out[k] = p[k] + radius / 2.0
    if out[k] > 1.0:
        out[k] = 1.0
    for j in range(n):
        total += out[j]
    excess = total - 1.0
    j = n - 1
    while j >= 1 and excess > 0.0:
        k = order[j]
        take = out[k] if out[k] < excess else excess
        out[k] -= take
        excess -= take
        j -= 1


def optimistic_kernel(p_hat, radius, order):
    p = np.ascontiguousarray(p_hat, dtype=np.float64)
    # wraparound is off: no negative indices on Python objects here
    n_next = p.shape[p.ndim - 1]
    lead = p.shape[:p.ndim - 1]
    flat = p.reshape(-1, n_next)
    rad = np.array(np.broadcast_to(np.asarray(radius, dtype=np.float64), lead)).reshape(-1)
    cdef long[:] o = np.ascontiguousarray(order, dtype=np.int64)
    out = np.empty_like(flat)
    cdef double[:, :] fv = flat
    cdef double[:, :] ov = out
    cdef double[:] rv = rad
    cdef Py_ssize_t i
    for i in range(flat.shape[0]):
        _optimistic_row(fv[i], rv[i], o, ov[i])
    return out.reshape(p.shape)


def evi(p_hat, radius, r_opt, double tau, double tol, long max_iter):
    cdef double[:, :, :] p = np.ascontiguousarray(p_hat, dtype=np.float64)
    cdef double[:, :] d = np.ascontiguousarray(radius, dtype=np.float64)
    cdef double[:, :] r = np.ascontiguousarray(r_opt, dtype=np.float64)
    cdef Py_ssize_t n_s = p.shape[0], n_a = p.shape[1]
    cdef Py_ssize_t s, a, k
    cdef long it
    u_arr = np.zeros(n_s)
    new_arr = np.zeros(n_s)
    pol_arr = np.zeros(n_s, dtype=np.int64)
    row_arr = np.zeros(n_s)
    cdef double[:] u = u_arr
    cdef double[:] new = new_arr
    cdef long[:] pol = pol_arr
    cdef double[:] row = row_arr
    cdef long[:] order
    cdef double q, best, dot, mn, dmax = 0.0, dmin = 0.0
    for it in range(1, max_iter + 1):
        order = np.argsort(-u_arr, kind="stable").astype(np.int64)
        for s in range(n_s):
            best = -1e308
            for a in range(n_a):
                _optimistic_row(p[s, a], d[s, a], order, row)
                dot = 0.0
                for k in range(n_s):
                    dot += row[k] * u[k]
                q = r[s, a] + (1.0 - tau) * dot + tau * u[s]
                if q > best:
                    best = q
                    pol[s] = a
            new[s] = best
        dmax = -1e308
        dmin = 1e308
        mn = 1e308
        for s in range(n_s):
            dot = new[s] - u[s]
            if dot > dmax:
                dmax = dot
            if dot < dmin:
                dmin = dot
            if new[s] < mn:
                mn = new[s]
        for s in range(n_s):
            u[s] = new[s] - mn
        if dmax - dmin < tol:
            return pol_arr, u_arr, 0.5 * (dmax + dmin), it, True
    return pol_arr, u_arr, 0.5 * (dmax + dmin), max_iter, False


def run_segment(policy, cdf, rewards, long state, uniforms, long start, long stop,
                nu, n_k, counts_sas, reward_sums, out_s, out_a, out_r, out_next):
    cdef long[:] pol = policy
    cdef const double[:, :, :] c = cdf
    cdef const double[:, :] rw = rewards
    cdef const double[:] uni = uniforms
    cdef long[:, :] nuv = nu
    cdef long[:, :] nkv = n_k
    cdef long[:, :, :] cnt = counts_sas
    cdef double[:, :] rs = reward_sums
    cdef long[:] os_ = out_s
    cdef long[:] oa = out_a
    cdef double[:] orw = out_r
    cdef long[:] on = out_next
    cdef Py_ssize_t n_s = c.shape[2]
    cdef long t = start, a, nxt, floor
    cdef double u, r
    cdef bint over = False
    with nogil:
        while t < stop:
            a = pol[state]
            u = uni[t]
            nxt = 0
            while nxt < n_s and c[state, a, nxt] <= u:
                nxt += 1
            if nxt >= n_s:
                nxt = n_s - 1
            r = rw[state, a]
            os_[t] = state
            oa[t] = a
            orw[t] = r
            on[t] = nxt
            cnt[state, a, nxt] += 1
            rs[state, a] += r
            nuv[state, a] += 1
            floor = nkv[state, a] if nkv[state, a] > 1 else 1
            over = nuv[state, a] >= floor
            state = nxt
            t += 1
            if over:
                break
    return t, state, bool(over)


def dykstra(base, g, h, g_eq, h_eq, lower, upper, double tol, long max_iter):
    x_arr = np.array(base, dtype=np.float64)
    cdef double[:] x = x_arr
    cdef double[:, :] G = np.ascontiguousarray(g, dtype=np.float64).reshape(-1, x_arr.shape[0])
    cdef double[:] H = np.ascontiguousarray(h, dtype=np.float64).reshape(-1)
    cdef double[:, :] E = np.ascontiguousarray(g_eq, dtype=np.float64).reshape(-1, x_arr.shape[0])
    cdef double[:] F = np.ascontiguousarray(h_eq, dtype=np.float64).reshape(-1)
    cdef double[:] lo = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[:] hi = np.ascontiguousarray(upper, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], m = G.shape[0], k = E.shape[0], i, j
    gn_arr = np.einsum("ij,ij->i", np.asarray(G), np.asarray(G))
    ge_arr = np.einsum("ij,ij->i", np.asarray(E), np.asarray(E))
    cdef double[:] gn = gn_arr
    cdef double[:] ge = ge_arr
    c_arr = np.zeros(m)
    ce_arr = np.zeros(k)
    yb_arr = np.zeros(n)
    prev_arr = np.zeros(n)
    cdef double[:] cc = c_arr
    cdef double[:] ce = ce_arr
    cdef double[:] yb = yb_arr
    cdef double[:] prev = prev_arr
    cdef double dot, viol, z, step, worst
    cdef long sweep
    for sweep in range(1, max_iter + 1):
        for j in range(n):
            prev[j] = x[j]
        for i in range(m):
            if gn[i] == 0.0:
                continue
            dot = 0.0
            for j in range(n):
                dot += G[i, j] * (x[j] + cc[i] * G[i, j])
            viol = dot - H[i]
            step = viol / gn[i] if viol > 0 else 0.0
            for j in range(n):
                x[j] = x[j] + (cc[i] - step) * G[i, j]
            cc[i] = step
        for i in range(k):
            if ge[i] == 0.0:
                continue
            dot = 0.0
            for j in range(n):
                dot += E[i, j] * (x[j] + ce[i] * E[i, j])
            step = (dot - F[i]) / ge[i]
            for j in range(n):
                x[j] = x[j] + (ce[i] - step) * E[i, j]
            ce[i] = step
        for j in range(n):
            z = x[j] + yb[j]
            x[j] = z
            if x[j] < lo[j]:
                x[j] = lo[j]
            if x[j] > hi[j]:
                x[j] = hi[j]
            yb[j] = z - x[j]
        worst = 0.0
        for j in range(n):
            if fabs(x[j] - prev[j]) > worst:
                worst = fabs(x[j] - prev[j])
        if worst < tol:
            viol = 0.0
            for i in range(m):
                dot = 0.0
                for j in range(n):
                    dot += G[i, j] * x[j]
                if dot - H[i] > viol:
                    viol = dot - H[i]
            for i in range(k):
                dot = 0.0
                for j in range(n):
                    dot += E[i, j] * x[j]
                if fabs(dot - F[i]) > viol:
                    viol = fabs(dot - F[i])
            if viol < tol:
                return x_arr, sweep, True
    return x_arr, max_iter, False
