"""Functional principal component analysis on basis coefficients.

With curves ``y(t) = aᵀΘ(t)`` and Gram matrix ``J``, the covariance operator's eigenproblem reduces to the
symmetric matrix eigenproblem of ``J^{1/2} S J^{1/2}`` where ``S`` is the sample covariance of the coefficient
rows. Eigenfunction coefficients are ``J^{-1/2} v``, which makes them orthonormal in L2.
"""

import logging
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any, NamedTuple, Optional, Union

import numpy as np
from scipy import linalg

from funcpattern.basis import CoefficientMatrix, GramMatrix, symmetric_sqrt
from funcpattern.exceptions import ContractError, SelectionError

logger = logging.getLogger(__name__)

NULL_EIGENVALUE_RATIO = 1e-12


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenvalues and eigenfunctions of a sample covariance operator.

    Attributes:
        eigenvalues: Non-increasing, non-negative ``η_j``.
        eigen_coefficients: Row ``j`` holds the basis coefficients of eigenfunction ``f_j``.
        gram: Gram matrix defining the inner product.
        null_mask: True where ``η_j < 1e-12·η_1`` (numerically zero).
        centered: Whether the sample mean was removed before forming the covariance.
        n_samples: Number of coefficient rows used.
    """

    eigenvalues: np.ndarray
    eigen_coefficients: np.ndarray
    gram: np.ndarray
    null_mask: np.ndarray
    centered: bool
    n_samples: int

    @property
    def n_components(self) -> int:
        return int(self.eigenvalues.size)

    def to_dict(self) -> dict[str, Any]:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "eigen_coefficients": self.eigen_coefficients.tolist(),
            "gram": self.gram.tolist(),
            "null_mask": self.null_mask.tolist(),
            "centered": self.centered,
            "n_samples": self.n_samples,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EigenSystem":
        return cls(
            np.asarray(data["eigenvalues"], dtype=float),
            np.asarray(data["eigen_coefficients"], dtype=float),
            np.asarray(data["gram"], dtype=float),
            np.asarray(data["null_mask"], dtype=bool),
            bool(data["centered"]),
            int(data["n_samples"]),
        )


class MultivariateRows(NamedTuple):
    """Per-unit concatenation of the coefficient blocks of all variates, with the matching Gram matrix."""

    rows: np.ndarray
    gram: np.ndarray


def _rows(
    coeffs: Union[CoefficientMatrix, np.ndarray], group: Union[int, str, None], variate: Union[int, str, None]
) -> np.ndarray:
    if isinstance(coeffs, CoefficientMatrix):
        return coeffs.select(group, variate)
    rows = np.atleast_2d(np.asarray(coeffs, dtype=float))
    if rows.shape[0] == 0:
        raise SelectionError("Coefficient selection is empty")
    return rows


def _gram_entries(gram: Union[GramMatrix, np.ndarray]) -> np.ndarray:
    return gram.entries if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=float)


def mean_function(
    coeffs: Union[CoefficientMatrix, np.ndarray],
    group: Union[int, str, None] = None,
    variate: Union[int, str, None] = None,
) -> np.ndarray:
    """Mean coefficient vector of the rows selected by ``group`` and/or ``variate``.

    Raises:
        SelectionError: If nothing is selected.

    Example:
        >>> mean_function(np.array([[1.0, -2.0], [-1.0, 2.0]])).tolist()
        [0.0, 0.0]
    """
    return np.asarray(_rows(coeffs, group, variate).mean(axis=0))


def covariance_eigen(
    coeffs: Union[CoefficientMatrix, np.ndarray],
    gram: Union[GramMatrix, np.ndarray],
    center: bool = True,
    group: Union[int, str, None] = None,
    variate: Union[int, str, None] = None,
) -> EigenSystem:
    """Eigen-decompose the sample covariance operator of the selected curves.

    The covariance divides by ``n - 1`` when centering and by ``n`` otherwise. Eigenvalues are clipped at 0; those
    below ``1e-12`` times the largest are flagged in ``null_mask``.

    Raises:
        SelectionError: If fewer than two rows are selected.
        ContractError: If the Gram matrix size differs from the coefficient length.
        ConditioningError: If the Gram matrix is singular.
    """
    rows = _rows(coeffs, group, variate)
    entries = _gram_entries(gram)
    if rows.shape[0] < 2:
        raise SelectionError(f"Covariance needs at least 2 curves, got {rows.shape[0]}")
    if entries.shape != (rows.shape[1], rows.shape[1]):
        raise ContractError(f"Gram matrix of shape {entries.shape} does not match {rows.shape[1]} coefficients")

    n = rows.shape[0]
    deviations = rows - rows.mean(axis=0) if center else rows
    covariance = deviations.T @ deviations / (n - 1 if center else n)
    half = symmetric_sqrt(entries)
    inverse_half = symmetric_sqrt(entries, inverse=True)
    operator = half @ covariance @ half
    eigenvalues, eigenvectors = linalg.eigh((operator + operator.T) / 2.0)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    eigen_coefficients = (inverse_half @ eigenvectors[:, order]).T

    if eigenvalues[0] > 0:
        null_mask = eigenvalues < NULL_EIGENVALUE_RATIO * eigenvalues[0]
    else:
        null_mask = np.ones_like(eigenvalues, dtype=bool)
    if null_mask.any():
        logger.warning("%d of %d eigenvalues are numerically zero", int(null_mask.sum()), eigenvalues.size)
    return EigenSystem(eigenvalues, eigen_coefficients, entries, null_mask, center, n)


def kl_truncate(
    sample_coeffs: np.ndarray, mean_coeffs: np.ndarray, eig: EigenSystem, j_max: int
) -> tuple[np.ndarray, np.ndarray]:
    """Project a curve on the leading eigenfunctions and rebuild it from them.

    Returns:
        ``(scores, reconstruction)``: the ``j_max`` inner products of ``sample - mean`` with ``f_1..f_{j_max}``, and
        the coefficients of ``mean + Σ_j scores_j·f_j``.

    Raises:
        ContractError: If ``j_max`` is out of range or shapes disagree.
    """
    if not 1 <= j_max <= eig.n_components:
        raise ContractError(f"j_max must lie in [1, {eig.n_components}], got {j_max!r}")
    deviation = np.asarray(sample_coeffs, dtype=float) - np.asarray(mean_coeffs, dtype=float)
    if deviation.shape != (eig.gram.shape[0],):
        raise ContractError(f"Coefficient vector of shape {deviation.shape} does not match the eigensystem")
    leading = eig.eigen_coefficients[:j_max]
    scores = leading @ eig.gram @ deviation
    return scores, np.asarray(mean_coeffs, dtype=float) + scores @ leading


def multivariate_rows(
    coeffs: CoefficientMatrix, gram: GramMatrix, group: Union[int, str, None] = None
) -> MultivariateRows:
    """Stack every unit's variate blocks side by side for multivariate FPCA.

    Each row is ``[a_{g,1,k}, ..., a_{g,D,k}]``; the returned Gram matrix is block-diagonal with one ``J`` per variate.
    """
    if gram.entries.shape[0] != coeffs.Q:
        raise ContractError("Gram matrix does not match the coefficient basis")
    block = coeffs.coefficients if group is None else coeffs.coefficients[[_group_position(coeffs, group)]]
    rows = np.transpose(block, (0, 2, 1, 3)).reshape(-1, coeffs.D * coeffs.Q)
    return MultivariateRows(rows, linalg.block_diag(*([gram.entries] * coeffs.D)))


def scores(rows: np.ndarray, mean_coeffs: Optional[np.ndarray], eig: EigenSystem) -> np.ndarray:
    """Scores of many curves on every eigenfunction: shape ``(n_rows, n_components)``."""
    centered = np.asarray(rows, dtype=float) - (0.0 if mean_coeffs is None else mean_coeffs)
    return np.asarray(centered @ eig.gram @ eig.eigen_coefficients.T)


def _group_position(coeffs: CoefficientMatrix, group: Union[int, str]) -> int:
    if isinstance(group, str):
        if group not in coeffs.group_labels:
            raise SelectionError(f"Unknown group {group!r}")
        return coeffs.group_labels.index(group)
    if not 0 <= group < len(coeffs.group_labels):
        raise SelectionError(f"Unknown group {group!r}")
    return int(group)
