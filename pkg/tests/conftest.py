from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(p, rng, cond=50.0):
    """Random SPD matrix with eigenvalues spread over [1, cond]."""
    Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    lam = np.geomspace(1.0, cond, p)
    S = (Q * lam) @ Q.T
    return 0.5 * (S + S.T)


def random_weights(p, rng, scale=1.0):
    w = rng.normal(size=p) * scale
    return w - (w.sum() - 1.0) / p


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record a sub-check of an acceptance criterion: ``acceptance(number, ok, detail)``."""
    store = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(number, ok, detail):
        store.setdefault(number, []).append((bool(ok), detail))
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        parts = store[number]
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{d} [{'ok' if ok else 'FAIL'}]" for ok, d in parts)
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {detail}")
