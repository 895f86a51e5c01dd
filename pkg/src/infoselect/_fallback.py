"""Pure numpy versions of the kernels in ``_core.pyx``."""

import numpy as np
from scipy.spatial.distance import cdist

_CHUNK_ELEMS = 1 << 22


def facility_scores(x, cur, assign, weights, selected):
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    cur = np.asarray(cur, dtype=float)
    assign = np.asarray(assign, dtype=np.intp)
    weights = np.asarray(weights, dtype=float)
    selected = np.asarray(selected, dtype=bool)
    base = np.full(n, np.inf)
    has = assign >= 0
    base[has] = weights[assign[has]] * cur[has]
    out = np.full(n, np.inf)
    cand = np.flatnonzero(~selected)
    step = max(1, _CHUNK_ELEMS // max(n, 1))
    for start in range(0, cand.size, step):
        js = cand[start:start + step]
        d = cdist(x[js], x)
        take = (d < cur) | ((d == cur) & (js[:, None] < assign))
        contrib = np.where(take, weights[js][:, None] * d, base)
        out[js] = contrib.sum(axis=1)
    return out


def nearest_selected(x, sel):
    x = np.asarray(x, dtype=float)
    sel = np.asarray(sel, dtype=np.intp)
    n = x.shape[0]
    assign = np.full(n, -1, dtype=np.intp)
    dist = np.full(n, np.inf)
    if sel.size == 0:
        return assign, dist
    step = max(1, _CHUNK_ELEMS // max(sel.size, 1))
    for start in range(0, n, step):
        d = cdist(x[start:start + step], x[sel])
        pos = np.argmin(d, axis=1)
        assign[start:start + step] = sel[pos]
        dist[start:start + step] = d[np.arange(d.shape[0]), pos]
    return assign, dist
