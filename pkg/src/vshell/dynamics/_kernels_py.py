"""NumPy versions of the particle kernels, bit-identical to the compiled ones."""

import numpy as np


def set_threads(n):
    pass


def get_threads():
    return 1


def sort_order(r, order):
    # stable relative to the previous order, like the insertion sort
    order[:] = order[np.argsort(r[order], kind="stable")]
    return order


def enclosed_mass(r, weight, order):
    n = order.size
    out = np.empty(n)
    if n == 0:
        return out
    rs = r[order]
    cs = np.cumsum(weight[order])
    new = np.empty(n, dtype=bool)
    new[0] = True
    np.not_equal(rs[1:], rs[:-1], out=new[1:])
    start = np.flatnonzero(new)
    end = np.append(start[1:], n) - 1
    before = np.where(start > 0, cs[np.maximum(start - 1, 0)], 0.0)
    group = np.cumsum(new) - 1
    value = before + 0.5 * (cs[end] - before)
    out[order] = value[group]
    return out


def kick(w, r, L, m, Mc, h):
    acc = L / (r * r * r) - (m + Mc) / (r * r)
    w += h * acc


def drift(r, w, h):
    r += h * w
    return float(r.min()) if r.size else np.inf
