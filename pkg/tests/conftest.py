from __future__ import annotations

import pytest

from salesrebate import MarketParams, optimal_price

# Filled by tests/test_acceptance.py; printed once at the end of the run.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture
def figure_params():
    """θ = 5 with σ = 1 split evenly by variance."""
    return MarketParams(5.0, 0.6, 0.8)


@pytest.fixture
def figure_price(figure_params):
    return optimal_price(figure_params)


def split(sigma_eps: float, theta: float = 5.0, sigma_total: float = 1.0) -> MarketParams:
    return MarketParams.from_total(theta, sigma_total, sigma_eps)
