"""Function-on-scalar FANOVA with a zero-sum constraint on the group effects.

For variate ``d`` the model is ``y_{g,d,k}(t) = μ_d(t) + α_{d,g}(t) + ε(t)`` with ``Σ_g α_{d,g}(t) = 0``. Writing every
curve and every coefficient function in one B-spline basis turns the problem into a matrix least-squares problem
``min ‖(ZB - A)J^{1/2}‖``: ``Z`` is the 0/1 design (one block per variate, each closed by the constraint row
``[0, 1, ..., 1]`` whose target is a zero row of ``A``), ``A`` holds the smoothed coefficient rows and ``J`` is the
Gram matrix. The normal equations ``(ZᵀZ) B J = Zᵀ A J`` reduce to ``(ZᵀZ) B = Zᵀ A`` once ``J`` is known to be
positive definite, so each variate block is solved with one Cholesky factor of ``ZᵀZ``; the Kronecker product
``(ZᵀZ) ⊗ J`` is never formed.
"""

import logging
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import linalg

from funcpattern.basis import BSplineBasis, CoefficientMatrix, GramMatrix, evaluate_coefficients
from funcpattern.exceptions import ConditioningError, ContractError
from funcpattern.funcdata import TimeGrid

logger = logging.getLogger(__name__)

GRAND_MEAN = "grand_mean"


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Block-diagonal FANOVA design.

    Each variate block has ``(G+1)·K + 1`` rows (groups 0..G with K units each, then the constraint row) and
    ``G + 2`` columns (grand mean, then groups 0..G).

    Example:
        >>> build_design(1, 1, 1).entries.astype(int).tolist()
        [[1, 1, 0], [1, 0, 1], [0, 1, 1]]
    """

    entries: np.ndarray
    G: int
    K: int
    D: int

    @property
    def block_rows(self) -> int:
        return (self.G + 1) * self.K + 1

    @property
    def block_columns(self) -> int:
        return self.G + 2

    @property
    def block(self) -> np.ndarray:
        """The design block shared by every variate."""
        return np.asarray(self.entries[: self.block_rows, : self.block_columns])

    @property
    def row_index(self) -> list[tuple[int, int, int]]:
        """``(variate, group, unit)`` per row; the constraint row of a block has group and unit ``-1``."""
        index = []
        for d in range(self.D):
            index.extend((d, g, k) for g in range(self.G + 1) for k in range(self.K))
            index.append((d, -1, -1))
        return index

    @property
    def column_index(self) -> list[tuple[int, str]]:
        """``(variate, name)`` per column, names being ``grand_mean`` and ``group_<g>``."""
        names = [GRAND_MEAN, *(f"group_{g}" for g in range(self.G + 1))]
        return [(d, name) for d in range(self.D) for name in names]


def build_design(G: int, K: int, D: int) -> DesignMatrix:
    """Build the constrained FANOVA design for ``G+1`` groups, ``K`` units per group and ``D`` variates.

    Raises:
        ContractError: If ``G < 1``, ``K < 1`` or ``D < 1``.
    """
    if G < 1 or K < 1 or D < 1:
        raise ContractError(f"Design needs G >= 1, K >= 1 and D >= 1, got G={G}, K={K}, D={D}")
    block = np.zeros(((G + 1) * K + 1, G + 2))
    for g in range(G + 1):
        block[g * K : (g + 1) * K, 0] = 1.0  # noqa: E203
        block[g * K : (g + 1) * K, 1 + g] = 1.0  # noqa: E203
    block[-1, 1:] = 1.0
    return DesignMatrix(linalg.block_diag(*([block] * D)), G, K, D)


@dataclass(frozen=True, eq=False)
class FanovaModel:
    """Estimated coefficient functions.

    Attributes:
        B: ``D·(G+2) × Q`` matrix; per variate block, row 0 is the grand mean ``μ_d`` and rows ``1..G+1`` are the
            group effects ``α_{d,0..G}``.
        basis: Basis the rows are expressed in.
        group_labels: ``G+1`` group ids, control first.
        variate_labels: ``D`` variate ids.
    """

    B: np.ndarray
    basis: BSplineBasis
    group_labels: tuple[str, ...]
    variate_labels: tuple[str, ...]

    def __post_init__(self) -> None:
        expected = (len(self.variate_labels) * (len(self.group_labels) + 1), self.basis.n_basis)
        if self.B.shape != expected:
            raise ContractError(f"Coefficient matrix must have shape {expected}, got {self.B.shape}")

    @property
    def G(self) -> int:
        return len(self.group_labels) - 1

    @property
    def D(self) -> int:
        return len(self.variate_labels)

    def grand_means(self) -> np.ndarray:
        """Grand-mean coefficients, ``(D, Q)``."""
        return np.asarray(self.B.reshape(self.D, self.G + 2, -1)[:, 0])

    def effects(self) -> np.ndarray:
        """Group-effect coefficients, ``(D, G+1, Q)``."""
        return np.asarray(self.B.reshape(self.D, self.G + 2, -1)[:, 1:])

    def to_dict(self) -> dict[str, Any]:
        return {
            "B": self.B.tolist(),
            "basis": self.basis.to_dict(),
            "groups": list(self.group_labels),
            "variates": list(self.variate_labels),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FanovaModel":
        return cls(
            np.asarray(data["B"], dtype=float),
            BSplineBasis.from_dict(data["basis"]),
            tuple(data["groups"]),
            tuple(data["variates"]),
        )


def _cholesky(matrix: np.ndarray, name: str) -> tuple[np.ndarray, bool]:
    try:
        return linalg.cho_factor(matrix)  # type: ignore[no-any-return]
    except linalg.LinAlgError as e:
        raise ConditioningError(f"{name} is not positive definite: {e}", {"matrix": name}) from e


def fit_fanova(A: CoefficientMatrix, Z: DesignMatrix, J: GramMatrix) -> FanovaModel:
    """Least-squares fit of the constrained FANOVA model.

    Args:
        A: Smoothed coefficient rows of the dataset.
        Z: Design built for the same ``G``, ``K`` and ``D``.
        J: Gram matrix of ``A``'s basis.

    Raises:
        ContractError: If the sizes of ``A``, ``Z`` and ``J`` disagree.
        ConditioningError: If ``ZᵀZ`` or ``J`` is singular.
    """
    if (A.G, A.K, A.D) != (Z.G, Z.K, Z.D):
        raise ContractError(
            f"Coefficients are for G={A.G}, K={A.K}, D={A.D}; design is for G={Z.G}, K={Z.K}, D={Z.D}"
        )
    if J.entries.shape != (A.Q, A.Q) or J.basis != A.basis:
        raise ContractError("Gram matrix does not belong to the coefficient basis")

    block = Z.block
    ztz_factor = _cholesky(block.T @ block, "ZᵀZ")
    _cholesky(J.entries, "Gram matrix")
    rows = A.design_rows().reshape(A.D, Z.block_rows, A.Q)
    B = np.vstack([linalg.cho_solve(ztz_factor, block.T @ rows[d]) for d in range(A.D)])
    logger.debug("Fitted FANOVA model: D=%d, G=%d, K=%d, Q=%d", A.D, A.G, A.K, A.Q)
    return FanovaModel(B, A.basis, A.group_labels, A.variate_labels)


def fitted_rows(model: FanovaModel, Z: DesignMatrix) -> np.ndarray:
    """Fitted coefficient rows ``Z·B``, stacked like `CoefficientMatrix.design_rows`."""
    return np.asarray(Z.entries @ model.B)


@dataclass(frozen=True, eq=False)
class FanovaKernels:
    """Grand means and group effects sampled on a grid.

    Attributes:
        grand_mean: ``(D, n)`` values of ``μ_d``.
        effects: ``(D, G+1, n)`` values of ``α_{d,g}``.
    """

    grid: TimeGrid
    grand_mean: np.ndarray
    effects: np.ndarray
    group_labels: tuple[str, ...]
    variate_labels: tuple[str, ...]

    def columns(self) -> list[str]:
        return ["t", "variate", "group", "value"]

    def rows(self) -> list[list[Any]]:
        """Plot-ready long format; grand-mean rows carry the group name ``grand_mean``."""
        out: list[list[Any]] = []
        for d, variate in enumerate(self.variate_labels):
            labelled = [(GRAND_MEAN, self.grand_mean[d])]
            labelled.extend((group, self.effects[d, g]) for g, group in enumerate(self.group_labels))
            for group, values in labelled:
                out.extend([t, variate, group, v] for t, v in zip(self.grid.points.tolist(), values.tolist()))
        return out


def extract_kernels(model: FanovaModel, grid: TimeGrid) -> FanovaKernels:
    """Evaluate the fitted grand means and group effects on ``grid``."""
    return FanovaKernels(
        grid,
        evaluate_coefficients(model.grand_means(), model.basis, grid.points),
        evaluate_coefficients(model.effects(), model.basis, grid.points),
        model.group_labels,
        model.variate_labels,
    )
