"""CTC loss (autodiff node over the kernel's analytic gradient) and the
incremental prefix scorer used during joint decoding."""

from __future__ import annotations

import numpy as np

from . import _kernels
from .tensor import Tensor, _make, as_tensor


def ctc_loss(logprobs, labels, blank=0):
    """Negative log-likelihood of ``labels`` under per-frame ``logprobs``.

    logprobs: Tensor (T', V) of log-softmax scores (V includes blank at
    index ``blank``); labels: int sequence without blank/sos/eos. The sum
    over all collapsing alignments runs in log space inside the kernel;
    the kernel's analytic gradient backs the autodiff node. Unrealizable
    labels (alignment needs more than T' frames) give an infinite loss
    with no gradient path.
    """
    logprobs = as_tensor(logprobs)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {labels.shape}")
    T, V = logprobs.shape
    if labels.size and (labels.min() < 0 or labels.max() >= V):
        raise ValueError("label id out of vocabulary range")
    if np.any(labels == blank):
        raise ValueError("labels must not contain blank")

    nll, grad = _kernels.ctc_forward_backward(logprobs.data, labels, blank)
    if not np.isfinite(nll):
        return Tensor(np.inf)

    def backward(g):
        logprobs._accumulate(float(g) * grad)

    return _make(np.float64(nll), (logprobs,), backward)


def ctc_realizable(labels, num_frames):
    return _kernels.ctc_required_frames(labels) <= num_frames


class CtcPrefixScorer:
    """Incremental prefix scoring over one utterance's CTC posteriors.

    State per hypothesis is the (T', 2) array of log-probabilities of the
    prefix ending in non-blank / blank, plus the accumulated prefix score;
    extending by a token returns the score increment
    ln P(prefix+token, ...) - ln P(prefix, ...).
    """

    def __init__(self, logprobs, blank=0, eos=3):
        self.lp = np.asarray(logprobs, dtype=np.float64)
        if self.lp.ndim != 2:
            raise ValueError("logprobs must be (T', V)")
        self.blank = blank
        self.eos = eos
        self.T = self.lp.shape[0]

    def initial_state(self):
        """(state, accumulated score) for the empty prefix."""
        return _kernels.ctc_prefix_initial(self.lp, self.blank), 0.0

    def extend(self, state, psi_prev, prefix, cands):
        """Score every candidate extension of ``prefix`` at once.

        prefix: token ids already emitted (characters only); cands: (C,)
        candidates (no blank; eos allowed). Returns (states (C, T', 2),
        incremental scores (C,), absolute scores (C,)).
        """
        cands = np.asarray(cands, dtype=np.int64)
        if np.any(cands == self.blank):
            raise ValueError("blank cannot extend a CTC prefix")
        last = prefix[-1] if len(prefix) else -1
        r_new, psi = _kernels.ctc_prefix_extend(
            self.lp, state, last, cands, len(prefix), self.blank, self.eos
        )
        # -inf - -inf would be nan; a dead prefix stays dead
        inc = np.where(np.isneginf(psi), -np.inf, psi - psi_prev)
        return r_new, inc, psi
