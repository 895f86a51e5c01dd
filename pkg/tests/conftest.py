import mpmath as mp
import numpy as np
import pytest

from infoselect.kernel import KernelSpec, gram

FAMILY_SPECS = {
    "linear": KernelSpec("linear"),
    "rbf": KernelSpec("rbf", gamma=0.5),
    "cosine": KernelSpec("cosine"),
    "polynomial": KernelSpec("polynomial", degree=2, coef0=1.0),
}


def random_instance(rng, family="rbf", n_max=60, d=None):
    """Random points, a Gram matrix and a random mask with 1 <= M < N."""
    n = int(rng.integers(4, n_max + 1))
    d = int(rng.integers(2, 6)) if d is None else d
    x = rng.standard_normal((n, d))
    k = gram(FAMILY_SPECS[family], x)
    m = int(rng.integers(1, n))
    sel = np.sort(rng.choice(n, size=m, replace=False))
    return x, k, sel


def mp_schur_diag(k, sel, dps=40):
    """Oracle: diagonal of K/K_SS by symmetric elimination of S in extended precision.

    Selected points whose conditional variance has fallen to the float64
    rounding floor of K are not eliminated (they add nothing to the span).
    """
    with mp.workdps(dps):
        n = k.shape[0]
        floor = mp.mpf(n * np.finfo(float).eps * float(np.max(np.abs(np.diag(k)))))
        cols = {int(j): [mp.mpf(float(v)) for v in k[:, j]] for j in sel}
        diag = [mp.mpf(float(v)) for v in np.diag(k)]
        todo = set(cols)
        while todo:
            j = max(sorted(todo), key=lambda t: diag[t])
            if diag[j] <= floor:
                break
            todo.discard(j)
            cj, piv = cols.pop(j), diag[j]
            for a in range(n):
                diag[a] -= cj[a] ** 2 / piv
            for t in todo:
                f, ct = cj[t] / piv, cols[t]
                for a in range(n):
                    ct[a] -= f * cj[a]
        return np.array([float(d) for d in diag])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = []


def pytest_runtest_makereport(item, call):
    if call.when != "call" or item.get_closest_marker("acceptance") is None:
        return
    doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
    _ACCEPTANCE.append((item.name, call.excinfo is None, doc))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, doc in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {doc}  [{name}]")
