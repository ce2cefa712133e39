import numpy as np
import pytest

from periflux.estimators import cached_basis


@pytest.fixture(scope="session")
def basis_for():
    """``basis_for(profile, kind, n, m, eps=0.2, L=2.0)`` -> ``(grid, basis)``, cached."""

    def get(profile, kind, n, m, eps=0.2, L=2.0):
        if profile == "straight":
            eps = 0.0
        return cached_basis(profile, kind, 1.0, eps, L, n, n, m)

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance():
    """Record ``(number, title, ok, detail)``; printed at the end of the run."""

    def record(number, title, ok, detail=""):
        _ACCEPTANCE.append((number, title, bool(ok), detail))
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}  {detail}"
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
