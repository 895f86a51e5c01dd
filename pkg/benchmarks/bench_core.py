"""Time the compiled facility-location kernels against the numpy fallback.

    python benchmarks/bench_core.py --sizes 500 2000 5000 --picks 20
"""

import argparse
import time

import numpy as np

from infoselect import _fallback

try:
    from infoselect import _core
except ImportError:
    _core = None


def greedy(mod, x, picks):
    n = x.shape[0]
    cur = np.full(n, np.inf)
    assign = np.full(n, -1, dtype=np.intp)
    w = np.ones(n)
    selected = np.zeros(n, dtype=bool)
    order = []
    for _ in range(picks):
        j = int(np.argmin(mod.facility_scores(x, cur, assign, w, selected)))
        d = np.sqrt(((x - x[j]) ** 2).sum(axis=1))
        take = (d < cur) | ((d == cur) & (j < assign))
        cur = np.where(take, d, cur)
        assign = np.where(take, j, assign)
        selected[j] = True
        order.append(j)
    mod.nearest_selected(x, np.sort(np.array(order, dtype=np.intp)))
    return order


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 2000, 5000])
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--picks", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    backends = [("numpy", _fallback)] + ([("cython", _core)] if _core is not None else [])
    if _core is None:
        print("compiled core not built; timing the numpy fallback only")
    print(f"{'n':>7} " + " ".join(f"{name:>10}" for name, _ in backends) + "   speedup")
    rng = np.random.default_rng(args.seed)
    for n in args.sizes:
        x = rng.standard_normal((n, args.dim))
        results = [best_of(lambda m=mod: greedy(m, x, args.picks), args.repeat) for _, mod in backends]
        orders = {tuple(o) for _, o in results}
        if len(orders) != 1:
            raise SystemExit(f"backends disagree at n={n}")
        row = f"{n:>7} " + " ".join(f"{t:>9.3f}s" for t, _ in results)
        if len(results) == 2:
            row += f"   {results[0][0] / results[1][0]:6.1f}x"
        print(row)


if __name__ == "__main__":
    main()
