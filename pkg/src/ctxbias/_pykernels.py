"""Pure-Python versions of the hot kernels.

Semantics must match _ckernels bit for bit: the fused score expression keeps
the same association order, and the edit-distance fill is integer-exact.
"""

from __future__ import annotations

import numpy as np


def fuse_scores(ac_base, row, fst_comp, lm_base, lv, lam, mu):
    """Candidate totals for one hypothesis across all extension tokens.

    totals[k] = (ac_base + row[k]) + lam*fst_comp[k] + mu*(lm_base + lv[k])
    with the LM term dropped entirely when lv is None. fst_comp is the
    candidate's full boosting component (boost times matched-piece count).
    """
    if lv is None:
        return (ac_base + row) + lam * fst_comp
    return (ac_base + row) + lam * fst_comp + mu * (lm_base + lv)


def levenshtein_fill(a, b):
    """Unit-cost edit-distance DP table for token id sequences a and b.

    dist[i, j] = distance between a[:i] and b[:j].
    """
    n = len(a)
    m = len(b)
    dist = np.empty((n + 1, m + 1), dtype=np.int32)
    for j in range(m + 1):
        dist[0, j] = j
    for i in range(1, n + 1):
        dist[i, 0] = i
        ai = a[i - 1]
        row_prev = dist[i - 1]
        row_cur = dist[i]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            best = row_prev[j - 1] + cost
            up = row_prev[j] + 1
            if up < best:
                best = up
            left = row_cur[j - 1] + 1
            if left < best:
                best = left
            row_cur[j] = best
    return dist
