"""Pure-numpy CTC kernels: log-space forward-backward and prefix scoring.

Twin of the compiled extension; same signatures, same conventions:
log-probabilities everywhere, impossible events are -inf, blank index is
passed in (0 by vocabulary layout).
"""

import numpy as np

NEG_INF = -np.inf


def ctc_required_frames(labels):
    """Minimum frame count that can realize the label sequence."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0
    repeats = int(np.sum(labels[1:] == labels[:-1]))
    return int(labels.size + repeats)


def ctc_forward_backward(logprobs, labels, blank=0):
    """Negative log-likelihood of ``labels`` plus gradient wrt ``logprobs``.

    logprobs: (T, V) per-frame log-softmax scores; labels: (U,) without
    blanks. Returns (nll, grad) with grad = d nll / d logprobs; an
    unrealizable label sequence yields (inf, zeros).
    """
    lp = np.asarray(logprobs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    T, V = lp.shape
    U = labels.size
    grad = np.zeros_like(lp)
    if T < ctc_required_frames(labels):
        return np.inf, grad

    if U == 0:
        nll = -float(lp[:, blank].sum())
        grad[:, blank] = -1.0
        return nll, grad

    S = 2 * U + 1
    aug = np.full(S, blank, dtype=np.int64)
    aug[1::2] = labels
    # same-label transitions s-2 -> s are illegal for blanks and repeats
    can_skip = np.zeros(S, dtype=bool)
    can_skip[3::2] = aug[3::2] != aug[1:-2:2]

    emit = lp[:, aug]  # (T, S)

    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    alpha[0, 1] = emit[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        stay = prev
        step = np.concatenate(([NEG_INF], prev[:-1]))
        move = np.logaddexp(stay, step)
        skip = np.concatenate(([NEG_INF, NEG_INF], prev[:-2]))
        move = np.where(can_skip, np.logaddexp(move, skip), move)
        alpha[t] = move + emit[t]

    if S > 1:
        total = np.logaddexp(alpha[T - 1, S - 1], alpha[T - 1, S - 2])
    else:
        total = alpha[T - 1, S - 1]
    if total == NEG_INF:
        return np.inf, grad

    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = emit[T - 1, S - 1]
    beta[T - 1, S - 2] = emit[T - 1, S - 2]
    # skip transitions mirrored: s -> s+2 legal when label at s+2 differs
    can_skip_fwd = np.zeros(S, dtype=bool)
    can_skip_fwd[1:-2:2] = aug[1:-2:2] != aug[3::2]
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1]
        stay = nxt
        step = np.concatenate((nxt[1:], [NEG_INF]))
        move = np.logaddexp(stay, step)
        skip = np.concatenate((nxt[2:], [NEG_INF, NEG_INF]))
        move = np.where(can_skip_fwd, np.logaddexp(move, skip), move)
        beta[t] = move + emit[t]

    # gamma[t, s] = ln P(paths through (t, s)); emission at t counted once
    gamma = alpha + beta - emit
    occ = np.exp(gamma - total)  # posterior occupancy, rows sum to 1
    for s in range(S):
        grad[:, aug[s]] -= occ[:, s]
    return -float(total), grad


def ctc_prefix_initial(logprobs, blank=0):
    """State for the empty prefix: (T, 2) log-probs [non-blank, blank]."""
    lp = np.asarray(logprobs, dtype=np.float64)
    T = lp.shape[0]
    r = np.full((T, 2), NEG_INF)
    r[:, 1] = np.cumsum(lp[:, blank])
    return r


def ctc_prefix_extend(logprobs, r_prev, last, cands, prefix_len, blank=0, eos=3):
    """Extend a prefix by each candidate token, scoring all at once.

    logprobs: (T, V); r_prev: (T, 2) state of the current prefix; last:
    final token of the prefix (-1 when empty); cands: (C,) candidate
    tokens, blank excluded, eos allowed; prefix_len: characters in the
    prefix. Returns (r_new (C, T, 2), psi (C,)) where psi[c] is the
    absolute log prefix probability of prefix+cand (for eos: the log
    probability that the complete sequence equals the prefix).
    """
    lp = np.asarray(logprobs, dtype=np.float64)
    r_prev = np.asarray(r_prev, dtype=np.float64)
    cands = np.asarray(cands, dtype=np.int64)
    T = lp.shape[0]
    C = cands.size
    if np.any(cands == blank):
        raise ValueError("blank cannot extend a CTC prefix")

    r_new = np.full((C, T, 2), NEG_INF)
    psi = np.full(C, NEG_INF)
    r_sum = np.logaddexp(r_prev[:, 0], r_prev[:, 1])  # (T,)
    seq_end = r_sum[T - 1]

    x = lp[:, cands].T  # (C, T)
    # phi: mass that may precede the new token at each frame
    phi = np.tile(r_sum, (C, 1))
    if last >= 0:
        same = cands == last
        phi[same] = r_prev[:, 1]

    if prefix_len == 0:
        r_new[:, 0, 0] = x[:, 0]
        log_psi = x[:, 0].copy()
    else:
        log_psi = np.full(C, NEG_INF)

    start = max(prefix_len, 1)
    for t in range(start, T):
        r_new[:, t, 0] = np.logaddexp(r_new[:, t - 1, 0], phi[:, t - 1]) + x[:, t]
        r_new[:, t, 1] = (
            np.logaddexp(r_new[:, t - 1, 0], r_new[:, t - 1, 1]) + lp[t, blank]
        )
        log_psi = np.logaddexp(log_psi, phi[:, t - 1] + x[:, t])

    psi[:] = log_psi
    is_eos = cands == eos
    psi[is_eos] = seq_end
    return r_new, psi
