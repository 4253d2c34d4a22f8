"""Hot numeric loops with optional JIT compilation.

Two kernels dominate runtime at scale: the scoring-rule grid search
(candidates x hips) and the focal keypoint loss and its gradient
(keypoints x pixels). Both ship in two semantically identical flavors, a
numba ``@njit`` one and a pure-numpy one. The numpy path is selected by
setting ``HIPMETRICS_NO_NUMBA=1`` (or when numba is not importable);
``benchmarks/bench_kernels.py`` times them side by side.

Callers pass pre-clamped probabilities; the kernels return raw sums and
per-cell derivatives of sum(terms), leaving the -1/N scaling to the caller
so both flavors stay bit-for-bit comparable.
"""

from __future__ import annotations

import os

import numpy as np


def _flag_disables_numba() -> bool:
    return os.environ.get("HIPMETRICS_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and not _flag_disables_numba()
BACKEND = "numba" if USE_NUMBA else "numpy"


# focal loss --------------------------------------------------------------


def focal_terms_sum_numpy(p: np.ndarray, y: np.ndarray, gamma: float) -> float:
    pos = (1.0 - p) ** gamma * np.log(p)
    neg = p ** gamma * np.log1p(-p)
    return float(np.where(y == 1, pos, neg).sum())


def focal_terms_grad_numpy(p: np.ndarray, y: np.ndarray, gamma: float) -> np.ndarray:
    pos = -gamma * (1.0 - p) ** (gamma - 1.0) * np.log(p) + (1.0 - p) ** gamma / p
    neg = gamma * p ** (gamma - 1.0) * np.log1p(-p) - p ** gamma / (1.0 - p)
    return np.where(y == 1, pos, neg)


def _focal_terms_sum_loops(p, y, gamma):
    # p, y are 1-D views; callers ravel before dispatch
    total = 0.0
    for i in range(p.shape[0]):
        pi = p[i]
        if y[i] == 1:
            total += (1.0 - pi) ** gamma * np.log(pi)
        else:
            total += pi ** gamma * np.log1p(-pi)
    return total


def _focal_terms_grad_loops(p, y, gamma):
    out = np.empty(p.shape[0], dtype=np.float64)
    for i in range(p.shape[0]):
        pi = p[i]
        if y[i] == 1:
            out[i] = -gamma * (1.0 - pi) ** (gamma - 1.0) * np.log(pi) + (1.0 - pi) ** gamma / pi
        else:
            out[i] = gamma * pi ** (gamma - 1.0) * np.log1p(-pi) - pi ** gamma / (1.0 - pi)
    return out


# scoring grid search ------------------------------------------------------
#
# class_idx: (N, 3) int64 with 0=normal, 1=borderline, 2=ddh per angle.
# labels:    (N,)   int64 binary ground truth.
# tables:    (C, 3, 3) int64 score lookup, tables[c, angle, class].
# sum_ddh:   (C,)   int64 maximal total per candidate.
# Returns (C, max_total) float64 kappa of "total >= t" vs labels for
# t = 1..sum_ddh[c]; cells beyond a candidate's range hold NaN.


def scoring_grid_kappa_numpy(
    class_idx: np.ndarray,
    labels: np.ndarray,
    tables: np.ndarray,
    sum_ddh: np.ndarray,
    max_total: int,
) -> np.ndarray:
    n = labels.shape[0]
    n_pos = int(labels.sum())
    n_neg = n - n_pos
    pos = labels == 1
    kappas = np.full((tables.shape[0], max_total), np.nan)
    for c in range(tables.shape[0]):
        t0, t1, t2 = tables[c, 0], tables[c, 1], tables[c, 2]
        totals = t0[class_idx[:, 0]] + t1[class_idx[:, 1]] + t2[class_idx[:, 2]]
        hist_pos = np.bincount(totals[pos], minlength=max_total + 1)
        hist_neg = np.bincount(totals[~pos], minlength=max_total + 1)
        # suffix sums: counts with total >= t
        suf_pos = np.cumsum(hist_pos[::-1])[::-1]
        suf_neg = np.cumsum(hist_neg[::-1])[::-1]
        for t in range(1, int(sum_ddh[c]) + 1):
            tp = int(suf_pos[t])
            fp = int(suf_neg[t])
            fn = n_pos - tp
            tn = n_neg - fp
            po = (tp + tn) / n
            pe = ((tp + fn) / n) * ((tp + fp) / n) + ((fp + tn) / n) * ((fn + tn) / n)
            kappas[c, t - 1] = (po - pe) / (1.0 - pe)
    return kappas


def _scoring_grid_kappa_loops(class_idx, labels, tables, sum_ddh, max_total):
    n = labels.shape[0]
    n_pos = 0
    for i in range(n):
        n_pos += labels[i]
    n_neg = n - n_pos
    n_cand = tables.shape[0]
    kappas = np.full((n_cand, max_total), np.nan)
    hist_pos = np.zeros(max_total + 1, dtype=np.int64)
    hist_neg = np.zeros(max_total + 1, dtype=np.int64)
    for c in range(n_cand):
        hist_pos[:] = 0
        hist_neg[:] = 0
        for i in range(n):
            total = (
                tables[c, 0, class_idx[i, 0]]
                + tables[c, 1, class_idx[i, 1]]
                + tables[c, 2, class_idx[i, 2]]
            )
            if labels[i] == 1:
                hist_pos[total] += 1
            else:
                hist_neg[total] += 1
        suf_pos = 0
        suf_neg = 0
        # walk thresholds from the top so suffix counts accumulate
        for t in range(max_total, 0, -1):
            suf_pos += hist_pos[t]
            suf_neg += hist_neg[t]
            if t > sum_ddh[c]:
                continue
            tp = suf_pos
            fp = suf_neg
            fn = n_pos - tp
            tn = n_neg - fp
            po = (tp + tn) / n
            pe = ((tp + fn) / n) * ((tp + fp) / n) + ((fp + tn) / n) * ((fn + tn) / n)
            kappas[c, t - 1] = (po - pe) / (1.0 - pe)
    return kappas


if USE_NUMBA:
    focal_terms_sum = numba.njit(cache=True)(_focal_terms_sum_loops)
    focal_terms_grad = numba.njit(cache=True)(_focal_terms_grad_loops)
    scoring_grid_kappa = numba.njit(cache=True)(_scoring_grid_kappa_loops)
else:
    focal_terms_sum = focal_terms_sum_numpy
    focal_terms_grad = focal_terms_grad_numpy
    scoring_grid_kappa = scoring_grid_kappa_numpy


def njit_variants():
    """Compiled kernel triple for benchmarking, or None without numba."""
    if not _HAVE_NUMBA:
        return None
    return (
        numba.njit(cache=True)(_focal_terms_sum_loops),
        numba.njit(cache=True)(_focal_terms_grad_loops),
        numba.njit(cache=True)(_scoring_grid_kappa_loops),
    )
