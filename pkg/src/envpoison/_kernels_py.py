"""Pure-Python (numpy) versions of the hot loops.

Same signatures and results as the compiled ``_kernels`` module; used when
the extension is not built or ``ENVPOISON_PURE_PYTHON`` is set.
"""
import numpy as np


def optimistic_kernel(p_hat, radius, order):
    """Move up to ``radius / 2`` of each row's mass onto the highest-value state.

    ``order`` lists states by decreasing value (ties by index).  Mass is
    removed from the lowest-valued states first.  Works on (..., S) arrays.
    """
    s_best = order[0]
    q = p_hat[..., order].copy()
    q[..., 0] = np.minimum(1.0, p_hat[..., s_best] + radius / 2.0)
    excess = q.sum(axis=-1) - 1.0
    # removal at sorted position j (j >= 1): what is left after later positions
    tail = q[..., 1:]
    after = np.cumsum(tail[..., ::-1], axis=-1)[..., ::-1] - tail
    take = np.clip(excess[..., None] - after, 0.0, tail)
    q[..., 1:] = tail - take
    out = np.empty_like(q)
    out[..., order] = q
    return out


def evi(p_hat, radius, r_opt, tau, tol, max_iter):
    """Extended value iteration over the l1 confidence set.

    Returns ``(policy, u, gain, iterations, converged)``.  The update is
    ``u(s) <- max_a r(s,a) + (1 - tau) * max_p p . u + tau * u(s)``; it
    stops when ``span(u_new - u) < tol``.
    """
    n_s = p_hat.shape[0]
    u = np.zeros(n_s)
    idx = np.arange(n_s)
    policy = np.zeros(n_s, dtype=np.int64)
    diff = np.zeros(n_s)
    for it in range(1, max_iter + 1):
        order = np.argsort(-u, kind="stable")
        p_opt = optimistic_kernel(p_hat, radius, order)
        q = r_opt + (1.0 - tau) * (p_opt @ u) + tau * u[:, None]
        policy = np.argmax(q, axis=1)
        new = q[idx, policy]
        diff = new - u
        u = new - new.min()
        if diff.max() - diff.min() < tol:
            return policy, u, 0.5 * (diff.max() + diff.min()), it, True
    return policy, u, 0.5 * (diff.max() + diff.min()), max_iter, False


def run_segment(policy, cdf, rewards, state, uniforms, start, stop,
                nu, n_k, counts_sas, reward_sums,
                out_s, out_a, out_r, out_next):
    """Play ``policy`` from ``state`` for steps ``start..stop-1``.

    Stops early, after recording the step, when the in-episode count of
    the visited pair reaches ``max(1, n_k)``.  Returns
    ``(next_index, state, episode_over)``.
    """
    n_s = cdf.shape[2]
    t = start
    while t < stop:
        a = policy[state]
        nxt = int(np.searchsorted(cdf[state, a], uniforms[t], side="right"))
        if nxt >= n_s:
            nxt = n_s - 1
        r = rewards[state, a]
        out_s[t] = state
        out_a[t] = a
        out_r[t] = r
        out_next[t] = nxt
        counts_sas[state, a, nxt] += 1
        reward_sums[state, a] += r
        nu[state, a] += 1
        over = nu[state, a] >= max(1, n_k[state, a])
        state = nxt
        t += 1
        if over:
            return t, state, True
    return t, state, False


def dykstra(base, g, h, g_eq, h_eq, lower, upper, tol, max_iter):
    """Euclidean projection of ``base`` onto {g x <= h, g_eq x = h_eq, lower <= x <= upper}.

    Cyclic Dykstra with one correction term per set.  Returns
    ``(x, sweeps, converged)``; converged means the iterate moved less than
    ``tol`` over a sweep and violates no set by more than ``tol``.
    """
    x = np.array(base, dtype=float)
    m = g.shape[0]
    k = g_eq.shape[0]
    gn = np.einsum("ij,ij->i", g, g)
    gen = np.einsum("ij,ij->i", g_eq, g_eq)
    c = np.zeros(m)
    c_eq = np.zeros(k)
    y_box = np.zeros_like(x)
    for sweep in range(1, max_iter + 1):
        prev = x.copy()
        for i in range(m):
            if gn[i] == 0.0:
                continue
            z = x + c[i] * g[i]
            viol = g[i] @ z - h[i]
            c[i] = viol / gn[i] if viol > 0 else 0.0
            x = z - c[i] * g[i]
        for i in range(k):
            if gen[i] == 0.0:
                continue
            z = x + c_eq[i] * g_eq[i]
            c_eq[i] = (g_eq[i] @ z - h_eq[i]) / gen[i]
            x = z - c_eq[i] * g_eq[i]
        z = x + y_box
        x = np.minimum(np.maximum(z, lower), upper)
        y_box = z - x
        if np.max(np.abs(x - prev)) < tol:
            viol = 0.0
            if m:
                viol = max(viol, float(np.max(g @ x - h)))
            if k:
                viol = max(viol, float(np.max(np.abs(g_eq @ x - h_eq))))
            if viol < tol:
                return x, sweep, True
    return x, max_iter, False
