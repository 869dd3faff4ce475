import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from edgirls.dataio import gen_gaussian, observe, sample_pairs
from edgirls.basis import num_pairs

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_instance(n=12, r=2, m=None, seed=0, with_replacement=False):
    """Gaussian cloud plus a random sample set (all pairs when m is None)."""
    P = gen_gaussian(n, r, seed)
    m = num_pairs(n) if m is None else m
    s = observe(P, sample_pairs(n, m, seed + 1, with_replacement), with_replacement)
    return P, s


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str = "") -> None:
    """Store a pass/fail verdict for the end-of-run acceptance summary."""
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {k:2d}: {detail}")
