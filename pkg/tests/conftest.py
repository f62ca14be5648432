"""Shared test utilities: finite-difference checking and tiny model factories."""

import numpy as np
import pytest

from blindiq import ops

# Filled by tests/test_acceptance.py; printed once per run.
ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        name, status = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"criterion {num:2d} [{status}] {name}")


@pytest.fixture(autouse=True)
def _reset_default_dtype():
    yield
    ops.set_default_dtype(np.float32)


def rel_err(a: float, b: float, floor: float = 1e-6) -> float:
    return abs(a - b) / max(floor, abs(a), abs(b))


def central_diff(fn, x0: float, h: float = 1e-6) -> float:
    return (fn(x0 + h) - fn(x0 - h)) / (2.0 * h)


def check_param_grads(loss_fn, param: np.ndarray, analytic: np.ndarray,
                      h: float = 1e-6, tol: float = 1e-4,
                      sample: int | None = None, rng=None) -> None:
    """Compare analytic parameter gradients against central differences.

    ``loss_fn()`` re-evaluates the scalar loss using the current contents of
    ``param`` (mutated in place around each probed component).  For large
    tensors, ``sample`` limits the probe to that many random components.
    """
    flat = param.reshape(-1)
    grad = np.asarray(analytic).reshape(-1)
    assert flat.shape == grad.shape
    idx = np.arange(flat.size)
    if sample is not None and flat.size > sample:
        rng = rng or np.random.default_rng(0)
        idx = rng.choice(flat.size, size=sample, replace=False)
    for i in idx:
        orig = flat[i]
        flat[i] = orig + h
        up = loss_fn()
        flat[i] = orig - h
        down = loss_fn()
        flat[i] = orig
        numeric = (up - down) / (2.0 * h)
        assert rel_err(grad[i], numeric) < tol, (
            f"component {i}: analytic {grad[i]!r} vs numeric {numeric!r}"
        )
