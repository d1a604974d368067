"""Jitted inner loop for token allocation and table-count resampling.

One call processes one document: every token is reallocated by the
collapsed conditional (optionally weighted by the response likelihood),
then the document's table counts are resampled. Arrays are the raw
capacity-padded buffers owned by HdpState; columns at or beyond K must
be zero on entry and remain zero for unused slots on exit.

Draw order per token is part of the sampler's determinism contract and
is mirrored by the pure-Python reference ops in ``sampler``:
coefficient draw for the new-topic candidate (labelled documents only),
then the selection uniform, then the stick-break uniform when a new
topic is chosen. numba executes numpy Generator methods bit-identically
to numpy itself, so the two paths consume one shared stream.
"""

import numpy as np
from numba import njit

FAMILY_GAUSSIAN = 0
FAMILY_BINOMIAL = 1


@njit(cache=True)
def _log_sigmoid(x):
    if x >= 0.0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


@njit(cache=True)
def doc_gibbs_pass(
    d,
    start,
    end,
    tokens,
    z,
    n_dk,
    c_kw,
    c_k,
    m_dk,
    beta,
    beta_new_box,
    eta,
    k_box,
    alpha,
    gamma,
    alpha_w,
    V,
    y,
    labelled,
    family,
    delta,
    zeta,
    supervised,
    update_tables,
    table_printed,
    rng_state,
    rng_model,
):
    """Gibbs-update tokens [start, end) of document d, then its table row.

    Returns the index of the first token whose allocation weights were
    all zero or non-finite, or -1 on success. Allocations of -1 mark
    unassigned tokens (incremental seeding); they are not decremented.
    """
    K = k_box[0]
    beta_new = beta_new_box[0]
    n_d = end - start
    inv_nd = 1.0 / n_d
    wgt = np.empty(K + n_d + 1)
    ll = np.empty(K + n_d + 1)
    respond = supervised and labelled
    sqrt_zeta = np.sqrt(zeta)

    for j in range(start, end):
        w = tokens[j]
        k_old = z[j]
        if k_old >= 0:
            n_dk[d, k_old] -= 1
            c_kw[k_old, w] -= 1
            c_k[k_old] -= 1
        eta_new = 0.0
        if respond:
            eta_new = rng_model.standard_normal() * sqrt_zeta

        denom_w = V * alpha_w
        for k in range(K):
            f_k = (c_kw[k, w] + alpha_w) / (c_k[k] + denom_w)
            wgt[k] = (n_dk[d, k] + alpha * beta[k]) * f_k
        wgt[K] = alpha * beta_new / V

        if respond:
            s_dot = 0.0
            for k in range(K):
                s_dot += eta[k] * n_dk[d, k]
            mx = -np.inf
            for k in range(K + 1):
                e_k = eta_new if k == K else eta[k]
                rho = (s_dot + e_k) * inv_nd
                if family == FAMILY_GAUSSIAN:
                    r = y - rho
                    ll[k] = -(r * r) / (2.0 * delta)
                else:
                    ll[k] = _log_sigmoid(rho) if y > 0.5 else _log_sigmoid(-rho)
                if ll[k] > mx:
                    mx = ll[k]
            for k in range(K + 1):
                wgt[k] *= np.exp(ll[k] - mx)

        total = 0.0
        for k in range(K + 1):
            total += wgt[k]
        if not np.isfinite(total) or total <= 0.0:
            k_box[0] = K
            beta_new_box[0] = beta_new
            return j

        u = rng_state.random() * total
        acc = 0.0
        k_sel = K
        for k in range(K + 1):
            acc += wgt[k]
            if u < acc:
                k_sel = k
                break

        if k_sel == K:
            u2 = rng_state.random()
            b = 1.0 - u2 ** (1.0 / gamma)
            piece = b * beta_new
            beta[K] = piece
            beta_new = beta_new - piece
            if supervised:
                if not labelled:
                    eta_new = rng_model.standard_normal() * sqrt_zeta
                eta[K] = eta_new
            K += 1

        z[j] = k_sel
        n_dk[d, k_sel] += 1
        c_kw[k_sel, w] += 1
        c_k[k_sel] += 1
        if respond:
            s_dot += eta[k_sel]

    if update_tables:
        for k in range(K):
            n = n_dk[d, k]
            if n == 0:
                m_dk[d, k] = 0
                continue
            ab = alpha * beta[k]
            if table_printed:
                m = 0
                for i in range(1, n + 1):
                    if rng_state.random() >= ab / (ab + i):
                        m += 1
            else:
                m = 1
                for i in range(1, n):
                    if rng_state.random() < ab / (ab + i):
                        m += 1
            m_dk[d, k] = m

    k_box[0] = K
    beta_new_box[0] = beta_new
    return -1
