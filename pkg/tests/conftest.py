import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def bernoulli_bits(size, q, seed):
    return (np.random.default_rng(seed).random(size) < q).astype(np.uint8)


# criterion name -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
