"""Cumulative distribution and quantiles of the F distribution.

``P(F <= x) = I_u(d1/2, d2/2)`` with ``u = d1·x / (d1·x + d2)``, where ``I`` is the regularized incomplete beta
function. Quantiles invert that relation with a bracketing root solve in ``u`` (or in ``1 - u`` for upper
probabilities, which keeps full relative precision in the right tail).
"""

import logging
from collections.abc import Callable

import numpy as np
from scipy import optimize, special

from funcpattern.exceptions import ContractError, ConvergenceError

logger = logging.getLogger(__name__)

ROOT_RTOL = 4.0 * np.finfo(float).eps
ROOT_MAXITER = 200


def _check_dof(d1: float, d2: float) -> None:
    if not (d1 >= 1 and d2 >= 1 and np.isfinite(d1) and np.isfinite(d2)):
        raise ContractError(f"F degrees of freedom must be at least 1, got ({d1!r}, {d2!r})")


def f_cdf(x: float, d1: float, d2: float) -> float:
    """Probability that an F(d1, d2) variate is at most ``x``.

    Example:
        >>> round(f_cdf(1.0, 1, 1), 12)
        0.5
    """
    _check_dof(d1, d2)
    if x <= 0:
        return 0.0
    if np.isinf(x):
        return 1.0
    return float(special.betainc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2)))


def f_quantile(d1: float, d2: float, p: float) -> float:
    """Inverse CDF of the F(d1, d2) distribution.

    Args:
        d1: Numerator degrees of freedom, at least 1.
        d2: Denominator degrees of freedom, at least 1.
        p: Probability in ``(0, 1)``.

    Returns:
        The ``x`` with ``P(F <= x) = p``.

    Raises:
        ContractError: If the arguments are out of range.
        ConvergenceError: If the root solve fails; ``diagnostics`` holds the inputs and the last iterate.

    Example:
        >>> round(f_quantile(1, 1, 0.5), 10)
        1.0
        >>> round(f_quantile(1, 60, 0.95), 4)
        4.0012
    """
    _check_dof(d1, d2)
    if not 0.0 < p < 1.0:
        raise ContractError(f"Probability must lie in (0, 1), got {p!r}")
    a, b = d1 / 2.0, d2 / 2.0

    if p <= 0.5:
        # Solve I_u(a, b) = p for u.
        root = _solve(lambda u: float(special.betainc(a, b, u)) - p, d1, d2, p)
        return float(d2 * root / (d1 * (1.0 - root)))
    # Solve I_v(b, a) = 1 - p for v = 1 - u.
    root = _solve(lambda v: float(special.betainc(b, a, v)) - (1.0 - p), d1, d2, p)
    return float(d2 * (1.0 - root) / (d1 * root))


def _solve(func: Callable[[float], float], d1: float, d2: float, p: float) -> float:
    try:
        root, result = optimize.brentq(
            func, 0.0, 1.0, xtol=1e-300, rtol=ROOT_RTOL, maxiter=ROOT_MAXITER, full_output=True
        )
    except (RuntimeError, ValueError) as e:
        raise ConvergenceError(
            f"F quantile root solve failed for d1={d1!r}, d2={d2!r}, p={p!r}: {e}", {"d1": d1, "d2": d2, "p": p}
        ) from e
    if not result.converged or not 0.0 < root < 1.0:
        raise ConvergenceError(
            f"F quantile root solve did not converge for d1={d1!r}, d2={d2!r}, p={p!r}",
            {"d1": d1, "d2": d2, "p": p, "iterations": result.iterations, "root": root, "flag": result.flag},
        )
    logger.debug("F(%g, %g) quantile at p=%g: %d iterations", d1, d2, p, result.iterations)
    return float(root)
