"""Compiled inner loops: chain sampling and log-domain forward-backward."""
import numpy as np
from numba import njit

NEG_INF = -np.inf


@njit(cache=True, nogil=True)
def _logaddexp(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + np.log1p(np.exp(b - a))
    return b + np.log1p(np.exp(a - b))


@njit(cache=True, nogil=True)
def sample_chain(cum_mu, cum_rows, succ_to, uniforms, states_out, edges_out):
    """Walk the chain using one uniform per step (inverse CDF)."""
    n_states = cum_mu.shape[0]
    q = cum_rows.shape[1]
    u0 = uniforms[0]
    s = n_states - 1
    for k in range(n_states):
        if u0 < cum_mu[k]:
            s = k
            break
    states_out[0] = s
    for t in range(1, uniforms.shape[0]):
        u = uniforms[t]
        k_sel = q - 1
        for k in range(q):
            if u < cum_rows[s, k]:
                k_sel = k
                break
        # never step onto a zero-probability edge through the fallback
        while k_sel > 0 and cum_rows[s, k_sel] == cum_rows[s, k_sel - 1]:
            k_sel -= 1
        edges_out[t - 1] = s * q + k_sel
        s = succ_to[s, k_sel]
        states_out[t] = s


@njit(cache=True, nogil=True)
def forward_backward(log_metrics, logp, logmu, efrom, eto, n_states,
                     log_pairwise, log_single):
    """Normalized log-domain smoother over a trellis.

    ``log_metrics[t, e]`` is the log-likelihood of observation ``t+1`` on
    edge ``e``.  Fills ``log_pairwise[t, e] = log P(S_t=i_e, S_{t+1}=j_e | obs)``
    and ``log_single[t, i] = log P(S_t = i | obs)`` for ``t = 0..n-1``.
    Every step is shifted by its largest edge term before exponentiating.
    Returns the log-likelihood of the sequence up to the dropped constants.
    """
    n = log_metrics.shape[0]
    n_edges = log_metrics.shape[1]
    la = np.empty((n + 1, n_states))
    acc = np.empty(n_states)
    v = np.empty(n_edges)

    m = NEG_INF
    for i in range(n_states):
        m = _logaddexp(m, logmu[i])
    for i in range(n_states):
        la[0, i] = logmu[i] - m

    loglik = 0.0
    for t in range(1, n + 1):
        vmax = NEG_INF
        for e in range(n_edges):
            v[e] = la[t - 1, efrom[e]] + logp[e] + log_metrics[t - 1, e]
            if v[e] > vmax:
                vmax = v[e]
        if vmax == NEG_INF:
            raise FloatingPointError("numerical underflow in forward pass")
        for i in range(n_states):
            acc[i] = 0.0
        total = 0.0
        for e in range(n_edges):
            w = np.exp(v[e] - vmax)
            acc[eto[e]] += w
            total += w
        lt = np.log(total)
        loglik += vmax + lt
        for i in range(n_states):
            la[t, i] = np.log(acc[i]) - lt

    lb = np.zeros(n_states)
    for t in range(n, 0, -1):
        # w_e = log p_e + metric + beta_t(j); beta_{t-1}(i) sums w over i's edges
        wmax = NEG_INF
        pmax = NEG_INF
        for e in range(n_edges):
            v[e] = logp[e] + log_metrics[t - 1, e] + lb[eto[e]]
            if v[e] > wmax:
                wmax = v[e]
            pv = v[e] + la[t - 1, efrom[e]]
            if pv > pmax:
                pmax = pv
        if wmax == NEG_INF or pmax == NEG_INF:
            raise FloatingPointError("numerical underflow in backward pass")
        for i in range(n_states):
            acc[i] = 0.0
        btotal = 0.0
        ptotal = 0.0
        for e in range(n_edges):
            w = np.exp(v[e] - wmax)
            acc[efrom[e]] += w
            btotal += w
            pv = v[e] + la[t - 1, efrom[e]]
            log_pairwise[t - 1, e] = pv - pmax
            ptotal += np.exp(pv - pmax)
        lpt = np.log(ptotal)
        for e in range(n_edges):
            log_pairwise[t - 1, e] -= lpt
        lbt = np.log(btotal)
        for i in range(n_states):
            lb[i] = np.log(acc[i]) - lbt

        smax = NEG_INF
        for i in range(n_states):
            acc[i] = la[t - 1, i] + lb[i]
            if acc[i] > smax:
                smax = acc[i]
        stotal = 0.0
        for i in range(n_states):
            stotal += np.exp(acc[i] - smax)
        ls = smax + np.log(stotal)
        for i in range(n_states):
            log_single[t - 1, i] = acc[i] - ls
    return loglik
