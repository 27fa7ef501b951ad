import numpy as np
import pytest

ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rel_error(analytic, numeric, floor=1e-6):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    return float(np.max(np.abs(analytic - numeric)
                        / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)))


def finite_difference(loss_fn, params, step=1e-5):
    """Central differences of ``loss_fn(params)`` for every entry of every array."""
    grads = {}
    for key, arr in params.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + step
            up = loss_fn(params)
            flat[i] = old - step
            down = loss_fn(params)
            flat[i] = old
            gflat[i] = (up - down) / (2 * step)
        grads[key] = g
    return grads
