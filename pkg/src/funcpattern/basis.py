"""Clamped B-spline bases, their Gram matrices, and penalized least-squares smoothing.

A basis of order ``m`` (degree ``m - 1``) on ``[0, T]`` has a clamped knot vector: ``m`` copies of 0, the interior
knots, ``m`` copies of T. Its ``Q = len(interior_knots) + m`` functions form a partition of unity on the whole
closed interval. Evaluation uses scipy's de Boor recurrence with the identity matrix as coefficients, which
returns every basis function at once.
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Union

import numpy as np
from scipy import linalg
from scipy.interpolate import BSpline

from funcpattern.exceptions import ConditioningError, ConfigError, ContractError, DomainError, GridError, SelectionError
from funcpattern.funcdata import FunctionalDataset, TimeGrid

logger = logging.getLogger(__name__)

DOMAIN_TOL = 1e-12
PENALTIES = ("l2", "curvature")


@dataclass(frozen=True, eq=False)
class BSplineBasis:
    """Clamped B-spline basis.

    Attributes:
        order: Polynomial degree plus one (4 for cubic splines).
        interior_knots: Strictly increasing knots inside ``(0, T)``.
        T: Right end of the domain.

    Example:
        >>> basis = BSplineBasis.uniform(6, order=4)
        >>> basis.n_basis, basis.interior_knots
        (6, (0.3333333333333333, 0.6666666666666666))
        >>> basis.knots.tolist()[:5]
        [0.0, 0.0, 0.0, 0.0, 0.3333333333333333]
    """

    order: int
    interior_knots: tuple[float, ...] = ()
    T: float = 1.0

    def __post_init__(self) -> None:
        knots = tuple(float(k) for k in self.interior_knots)
        object.__setattr__(self, "interior_knots", knots)
        object.__setattr__(self, "T", float(self.T))
        if int(self.order) != self.order or self.order < 2:
            raise GridError(f"B-spline order must be an integer of at least 2, got {self.order!r}")
        if not self.T > 0:
            raise GridError(f"Basis domain end must be positive, got {self.T!r}")
        array = np.asarray(knots)
        if array.size and (not np.all(np.isfinite(array)) or array[0] <= 0 or array[-1] >= self.T):
            raise GridError(f"Interior knots must lie strictly inside (0, {self.T!r})")
        if np.any(np.diff(array) <= 0):
            raise GridError("Interior knots must be strictly increasing")

    @classmethod
    def uniform(cls, n_basis: int, order: int = 4, T: float = 1.0) -> "BSplineBasis":
        """Basis with ``n_basis`` functions and evenly spaced interior knots."""
        n_interior = n_basis - order
        if n_interior < 0:
            raise GridError(f"A basis of order {order} needs at least {order} functions, got {n_basis}")
        return cls(order, tuple(np.linspace(0.0, T, n_interior + 2)[1:-1]), T)

    @classmethod
    def from_quantiles(
        cls, n_basis: int, times: Union[Sequence[float], np.ndarray], order: int = 4, T: float = 1.0
    ) -> "BSplineBasis":
        """Basis whose interior knots sit at quantiles of the observed sample times.

        Raises:
            GridError: If the times do not yield enough distinct interior quantiles.
        """
        n_interior = n_basis - order
        if n_interior < 0:
            raise GridError(f"A basis of order {order} needs at least {order} functions, got {n_basis}")
        samples = np.asarray(times, dtype=float)
        knots = np.unique(np.quantile(samples, np.linspace(0.0, 1.0, n_interior + 2)[1:-1]))
        knots = knots[(knots > 0) & (knots < T)]
        if knots.size != n_interior:
            raise GridError(f"Sample times give only {knots.size} distinct interior knots, {n_interior} needed")
        return cls(order, tuple(knots), T)

    @property
    def n_basis(self) -> int:
        """Number of basis functions, Q."""
        return len(self.interior_knots) + self.order

    @property
    def degree(self) -> int:
        return self.order - 1

    @property
    def knots(self) -> np.ndarray:
        """Full clamped knot vector."""
        return np.r_[[0.0] * self.order, self.interior_knots, [self.T] * self.order]

    @cached_property
    def _spline(self) -> BSpline:
        return BSpline(self.knots, np.eye(self.n_basis), self.degree, extrapolate=False)

    def spline(self, derivative: int = 0) -> BSpline:
        """Vector-valued spline whose components are the basis functions (or their derivatives)."""
        return self._spline if derivative == 0 else self._spline.derivative(derivative)

    def greville_abscissae(self) -> np.ndarray:
        """Knot averages; evaluating a function there gives its Schoenberg variation-diminishing coefficients."""
        knots = self.knots
        return np.array([knots[i + 1 : i + self.order].mean() for i in range(self.n_basis)])  # noqa: E203

    def to_dict(self) -> dict[str, Any]:
        return {"order": self.order, "interior_knots": list(self.interior_knots), "T": self.T, "n_basis": self.n_basis}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BSplineBasis":
        try:
            return cls(int(data["order"]), tuple(data["interior_knots"]), float(data["T"]))
        except KeyError as e:
            raise ContractError(f"Basis description lacks {e.args[0]!r}") from None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BSplineBasis):
            return NotImplemented
        return (self.order, self.interior_knots, self.T) == (other.order, other.interior_knots, other.T)

    __hash__ = None  # type: ignore[assignment]


def _in_domain(basis: BSplineBasis, times: Union[float, Sequence[float], np.ndarray]) -> np.ndarray:
    points = np.atleast_1d(np.asarray(times, dtype=float))
    tol = DOMAIN_TOL * basis.T
    outside = ~((points >= -tol) & (points <= basis.T + tol))
    if outside.any():
        raise DomainError(f"Time {points[outside][0]!r} lies outside the basis domain [0, {basis.T!r}]")
    return np.clip(points, 0.0, basis.T)


def basis_matrix(
    basis: BSplineBasis, times: Union[Sequence[float], np.ndarray], derivative: int = 0
) -> np.ndarray:
    """Evaluate every basis function (or a derivative of it) at ``times``.

    Returns:
        Array of shape ``(len(times), Q)``.

    Raises:
        DomainError: If a time lies outside ``[0, T]``.
    """
    return np.asarray(basis.spline(derivative)(_in_domain(basis, times)))


def eval_basis(basis: BSplineBasis, t: float) -> np.ndarray:
    """Evaluate the Q basis functions at one time point.

    Raises:
        DomainError: If ``t`` lies outside ``[0, T]``.

    Example:
        >>> basis = BSplineBasis.uniform(8)
        >>> eval_basis(basis, 0.0)[:3].round(12).tolist()
        [1.0, 0.0, 0.0]
        >>> bool(abs(eval_basis(basis, 0.37).sum() - 1.0) < 1e-12)
        True
    """
    return basis_matrix(basis, [t])[0]


def evaluate_coefficients(
    coefficients: np.ndarray, basis: BSplineBasis, times: Union[Sequence[float], np.ndarray]
) -> np.ndarray:
    """Evaluate functions given by coefficient vectors (last axis Q) at ``times``."""
    return np.asarray(coefficients) @ basis_matrix(basis, times).T


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Matrix of inner products ``∫ θ_i^(m)(t) θ_j^(m)(t) dt`` for one basis.

    Attributes:
        entries: Symmetric positive semi-definite ``Q × Q`` array.
        basis: Basis the matrix belongs to.
        derivative: Derivative order ``m`` (0 for the plain L2 Gram matrix).
    """

    entries: np.ndarray
    basis: BSplineBasis
    derivative: int = 0

    def sqrt(self) -> np.ndarray:
        """Symmetric square root."""
        return symmetric_sqrt(self.entries)

    def inverse_sqrt(self) -> np.ndarray:
        """Inverse of the symmetric square root.

        Raises:
            ConditioningError: If the matrix is singular.
        """
        return symmetric_sqrt(self.entries, inverse=True)


def gram_matrix(basis: BSplineBasis, derivative: int = 0) -> GramMatrix:
    """Integrate products of basis functions over ``[0, T]``.

    Each knot span gets an ``order``-point Gauss-Legendre rule, which is exact for the piecewise-polynomial
    products involved.

    Example:
        >>> J = gram_matrix(BSplineBasis.uniform(10))
        >>> round(float(J.entries.sum()), 12)
        1.0
    """
    nodes, weights = np.polynomial.legendre.leggauss(basis.order)
    breaks = np.unique(basis.knots)
    half = (breaks[1:] - breaks[:-1]) / 2.0
    mid = (breaks[1:] + breaks[:-1]) / 2.0
    points = (mid[:, None] + half[:, None] * nodes).ravel()
    point_weights = (half[:, None] * weights).ravel()
    values = basis_matrix(basis, points, derivative)
    entries = (values * point_weights[:, None]).T @ values
    return GramMatrix((entries + entries.T) / 2.0, basis, derivative)


def penalty_matrix(basis: BSplineBasis, penalty: str = "l2") -> GramMatrix:
    """Roughness penalty for smoothing: the Gram matrix (``l2``) or the curvature matrix (``curvature``)."""
    if penalty not in PENALTIES:
        raise ConfigError(f"Unknown penalty {penalty!r}; expected one of {PENALTIES}")
    return gram_matrix(basis, 0 if penalty == "l2" else 2)


def symmetric_sqrt(matrix: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Square root (or inverse square root) of a symmetric PSD matrix via eigen-decomposition.

    Negative eigenvalues from rounding are clipped to 0.

    Raises:
        ConditioningError: If ``inverse`` is requested for a singular matrix.
    """
    eigenvalues, eigenvectors = linalg.eigh(matrix)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    if inverse:
        if eigenvalues.min() <= 1e-14 * max(eigenvalues.max(), 1e-300):
            raise ConditioningError(
                "Gram matrix is singular; its inverse square root does not exist",
                {"min_eigenvalue": float(eigenvalues.min()), "max_eigenvalue": float(eigenvalues.max())},
            )
        roots = 1.0 / np.sqrt(eigenvalues)
    else:
        roots = np.sqrt(eigenvalues)
    return np.asarray((eigenvectors * roots) @ eigenvectors.T)


def smooth_curves(
    values: np.ndarray, grid: TimeGrid, basis: BSplineBasis, ridge: float = 0.0, penalty: str = "l2"
) -> np.ndarray:
    """Fit basis coefficients to many curves sampled on one grid.

    Solves ``(ΦᵀΦ + ridge·P) a = Φᵀy`` for every row ``y`` of ``values``, where ``Φ`` is the basis evaluated on the
    grid and ``P`` the penalty matrix.

    Args:
        values: Array of shape ``(m, n)`` (or ``(n,)``) aligned with ``grid``.
        grid: Sample times; must span the basis domain.
        basis: Basis to project on.
        ridge: Non-negative penalty weight.
        penalty: ``"l2"`` (Gram matrix) or ``"curvature"`` (integrated squared second derivative).

    Returns:
        Coefficients of shape ``(m, Q)`` (or ``(Q,)``).

    Raises:
        ConditioningError: If the normal equations are singular, e.g. ``ridge = 0`` with fewer distinct grid
            points per span than the basis needs.
        ContractError: If shapes or domains disagree.
    """
    if ridge < 0:
        raise ConfigError(f"ridge must be non-negative, got {ridge!r}")
    if grid.T != basis.T:
        raise ContractError(f"Grid ends at {grid.T!r} but the basis domain ends at {basis.T!r}")
    data = np.asarray(values, dtype=float)
    single = data.ndim == 1
    data = np.atleast_2d(data)
    if data.shape[-1] != len(grid):
        raise ContractError(f"Curves have {data.shape[-1]} points for a grid of {len(grid)}")

    phi = basis_matrix(basis, grid.points)
    lhs = phi.T @ phi
    if ridge > 0:
        lhs = lhs + ridge * penalty_matrix(basis, penalty).entries
    elif np.linalg.matrix_rank(phi) < basis.n_basis:
        raise ConditioningError(
            f"Basis of {basis.n_basis} functions is not identifiable from {len(grid)} grid points; "
            "use a positive ridge",
            {"rank": int(np.linalg.matrix_rank(phi)), "n_basis": basis.n_basis},
        )
    try:
        factor = linalg.cho_factor(lhs)
    except linalg.LinAlgError as e:
        raise ConditioningError(f"Smoothing normal equations are singular ({e}); use a positive ridge") from e
    coefficients = linalg.cho_solve(factor, phi.T @ data.T).T
    return np.asarray(coefficients[0] if single else coefficients)


def smooth_curve(
    values: Union[Sequence[float], np.ndarray],
    grid: TimeGrid,
    basis: BSplineBasis,
    ridge: float = 0.0,
    penalty: str = "l2",
) -> np.ndarray:
    """Fit the coefficient vector of one curve; see `smooth_curves`.

    Example:
        >>> grid = TimeGrid.uniform(50)
        >>> basis = BSplineBasis.uniform(8)
        >>> np.allclose(smooth_curve(np.full(50, 3.0), grid, basis), 3.0)
        True
    """
    return smooth_curves(np.asarray(values, dtype=float).reshape(-1), grid, basis, ridge, penalty)


@dataclass(frozen=True, eq=False)
class CoefficientMatrix:
    """Basis coefficients of every curve of a dataset.

    ``coefficients[g, d, k]`` is the coefficient vector ``a_{g,d,k}`` of unit ``k`` of group ``g`` on variate ``d``.
    """

    coefficients: np.ndarray
    basis: BSplineBasis
    group_labels: tuple[str, ...]
    variate_labels: tuple[str, ...]
    unit_labels: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        coefficients = np.array(self.coefficients, dtype=float)
        if coefficients.ndim != 4 or coefficients.shape[3] != self.basis.n_basis:
            raise ContractError(
                f"Coefficients must have shape (groups, variates, units, {self.basis.n_basis}), "
                f"got {coefficients.shape}"
            )
        if coefficients.shape[:2] != (len(self.group_labels), len(self.variate_labels)):
            raise ContractError("Coefficient labels do not match the array shape")
        if not np.all(np.isfinite(coefficients)):
            raise ContractError("Coefficients must be finite")
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def G(self) -> int:
        return len(self.group_labels) - 1

    @property
    def D(self) -> int:
        return len(self.variate_labels)

    @property
    def K(self) -> int:
        return int(self.coefficients.shape[2])

    @property
    def Q(self) -> int:
        return self.basis.n_basis

    def rows(self) -> np.ndarray:
        """All coefficient rows, ``(N, Q)``, in (group, variate, unit) order."""
        return self.coefficients.reshape(-1, self.Q)

    def select(self, group: Union[int, str, None] = None, variate: Union[int, str, None] = None) -> np.ndarray:
        """Rows of one group and/or variate.

        Raises:
            SelectionError: If the selection matches no row.
        """
        block = self.coefficients
        if group is not None:
            g = _index(group, self.group_labels)
            block = block[g : g + 1]  # noqa: E203
        if variate is not None:
            d = _index(variate, self.variate_labels)
            block = block[:, d : d + 1]  # noqa: E203
        rows = block.reshape(-1, self.Q)
        if rows.shape[0] == 0:
            raise SelectionError("Coefficient selection is empty")
        return rows

    def design_rows(self) -> np.ndarray:
        """Rows stacked like the FANOVA design: per variate, groups 0..G with K units each, then a zero row."""
        blocks = []
        for d in range(self.D):
            blocks.append(self.coefficients[:, d].reshape(-1, self.Q))
            blocks.append(np.zeros((1, self.Q)))
        return np.vstack(blocks)

    def evaluate(self, times: Union[Sequence[float], np.ndarray]) -> np.ndarray:
        """Evaluate every curve at ``times``: shape ``(G+1, D, K, len(times))``."""
        return evaluate_coefficients(self.coefficients, self.basis, times)

    def columns(self) -> list[str]:
        return ["group", "variate", "unit", *(f"c{q + 1}" for q in range(self.Q))]

    def table_rows(self) -> list[list[Any]]:
        return [
            [group, variate, unit, *self.coefficients[g, d, k].tolist()]
            for g, group in enumerate(self.group_labels)
            for d, variate in enumerate(self.variate_labels)
            for k, unit in enumerate(self.unit_labels[g])
        ]


def _index(key: Union[int, str], labels: Sequence[str]) -> int:
    if isinstance(key, (int, np.integer)) and not isinstance(key, bool) and 0 <= key < len(labels):
        return int(key)
    if key in labels:
        return list(labels).index(str(key))
    raise SelectionError(f"Unknown label {key!r}; expected one of {list(labels)}")


def smooth_dataset(
    dataset: FunctionalDataset, basis: BSplineBasis, ridge: float = 0.0, penalty: str = "l2"
) -> CoefficientMatrix:
    """Smooth every curve of a dataset into basis coefficients."""
    n_points = len(dataset.grid)
    coefficients = smooth_curves(dataset.values.reshape(-1, n_points), dataset.grid, basis, ridge, penalty)
    logger.debug("Smoothed %d curves onto %d basis functions (ridge=%g)", dataset.N, basis.n_basis, ridge)
    return CoefficientMatrix(
        coefficients.reshape(*dataset.values.shape[:3], basis.n_basis),
        basis,
        dataset.group_labels,
        dataset.variate_labels,
        dataset.unit_labels,
    )
