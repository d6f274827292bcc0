"""Shared parameter checks, error types and exact closed-form counts."""
from __future__ import annotations

DEFAULT_BUDGET = 10**7


class FractalError(ValueError):
    """Base class for domain errors raised by this package."""


class ParameterError(FractalError):
    pass


class BudgetExceeded(FractalError):
    pass


def check_params(n: int, m: int) -> None:
    if not isinstance(n, int) or isinstance(n, bool) or n < 3:
        raise ParameterError(f"N must be an integer >= 3, got {n!r}")
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise ParameterError(f"m must be an integer >= 1, got {m!r}")


def node_count(n: int, m: int) -> int:
    """|V_{N,m}| = N + N^2 (1 - (2N-2)^(m-1)) / (1 - (2N-2)), exact."""
    check_params(n, m)
    q = 2 * n - 2
    # (1 - q^(m-1)) / (1 - q) == 1 + q + ... + q^(m-2), always an exact integer
    return n + n * n * ((q ** (m - 1) - 1) // (q - 1))


def face_count(n: int, m: int) -> int:
    check_params(n, m)
    return n * (2 * n - 2) ** (m - 1)


def check_budget(count: int, budget: int | None, what: str) -> None:
    limit = DEFAULT_BUDGET if budget is None else budget
    if count > limit:
        raise BudgetExceeded(f"{what}: {count} items exceeds enumeration budget {limit}")
