"""Covariance matrices of Gaussian states and the symplectic algebra on them.

Conventions
-----------
* Quadratures are ordered mode-major, ``(x1, p1, x2, p2, ..., xN, pN)``.
* The vacuum has unit variance in every quadrature (shot noise = 1), so a
  covariance matrix ``sigma`` is physical iff every symplectic eigenvalue is
  at least 1.
"""

from __future__ import annotations

import dataclasses
from typing import Iterable, Sequence

import numpy as np

from .config import get_tolerances
from .exceptions import (
    DimensionError,
    IllConditionedError,
    LabelError,
    NotPositiveDefiniteError,
    NumericalDegeneracyError,
    PartitionError,
    UnphysicalStateError,
)

__all__ = [
    "CovarianceMatrix",
    "Bipartition",
    "BipartiteBlocks",
    "ModeMap",
    "ValidationVerdict",
    "symplectic_form",
    "validate",
    "symplectic_eigenvalues",
    "split_blocks",
    "schur_complement",
    "select_modes",
    "apply_mode_map",
    "vacuum",
    "thermal",
    "squeezed_vacuum",
    "two_mode_squeezed_vacuum",
    "direct_sum",
    "random_symplectic",
    "random_physical_cm",
    "xxpp_to_xpxp",
    "xpxp_to_xxpp",
]


def _n_modes_of(matrix: np.ndarray) -> int:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {matrix.shape}")
    if matrix.shape[0] == 0 or matrix.shape[0] % 2:
        raise DimensionError(
            f"expected a 2N x 2N matrix with N >= 1, got {matrix.shape[0]} rows"
        )
    return matrix.shape[0] // 2


def _readonly(array) -> np.ndarray:
    out = np.array(array, dtype=float, copy=True)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Second moments of an N-mode Gaussian state.

    Parameters
    ----------
    matrix : array_like, shape (2N, 2N)
        Symmetrized quadrature covariances in ``xpxp`` order.
    labels : sequence of str, optional
        One human-readable name per mode (``"a11"``, ``"B"``, ...).

    Construction only checks the shape. Use :func:`validate` (or
    :meth:`checked`) to enforce symmetry and physicality.
    """

    matrix: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        matrix = _readonly(self.matrix)
        n = _n_modes_of(matrix)
        object.__setattr__(self, "matrix", matrix)
        if self.labels is not None:
            labels = tuple(str(lab) for lab in self.labels)
            if len(labels) != n:
                raise DimensionError(f"{len(labels)} labels given for {n} modes")
            if len(set(labels)) != n:
                raise LabelError("mode labels must be unique")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def checked(cls, matrix, labels=None) -> "CovarianceMatrix":
        """Build and validate, raising :class:`UnphysicalStateError` on failure."""
        cm = cls(matrix, labels)
        validate(cm).raise_for_failures()
        return cm

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def mode_labels(self) -> tuple[str, ...]:
        """Labels, defaulting to the decimal mode index."""
        if self.labels is None:
            return tuple(str(i) for i in range(self.n_modes))
        return self.labels

    def index(self, key) -> int:
        """Mode index for a label or an integer index."""
        if isinstance(key, (int, np.integer)) and not isinstance(key, bool):
            if not 0 <= key < self.n_modes:
                raise LabelError(f"mode index {key} out of range for {self.n_modes} modes")
            return int(key)
        key = str(key)
        labels = self.mode_labels
        if key in labels:
            return labels.index(key)
        raise LabelError(f"unknown mode label {key!r}")

    def indices(self, keys: Iterable) -> tuple[int, ...]:
        return tuple(self.index(k) for k in keys)

    def __eq__(self, other):
        if not isinstance(other, CovarianceMatrix):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.matrix, other.matrix)

    __hash__ = None

    def __repr__(self):
        return f"CovarianceMatrix(n_modes={self.n_modes}, labels={self.labels})"


def symplectic_form(n_modes: int) -> np.ndarray:
    """Block-diagonal ``Omega`` with N blocks ``[[0, 1], [-1, 0]]``."""
    if n_modes < 1:
        raise DimensionError("n_modes must be positive")
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclasses.dataclass(frozen=True)
class Bipartition:
    """Ordered pair of disjoint, nonempty mode sets.

    ``steering`` is the party performing measurements (m), ``steered`` the
    party whose conditional state is tested (n). Order inside each tuple is
    kept: it fixes the row order of the extracted blocks.
    """

    steering: tuple[int, ...]
    steered: tuple[int, ...]

    def __post_init__(self):
        steering = tuple(int(i) for i in self.steering)
        steered = tuple(int(i) for i in self.steered)
        if not steering or not steered:
            raise PartitionError("both parties must be nonempty")
        if len(set(steering)) != len(steering) or len(set(steered)) != len(steered):
            raise PartitionError("repeated mode inside a party")
        if set(steering) & set(steered):
            raise PartitionError(
                f"parties overlap on modes {sorted(set(steering) & set(steered))}"
            )
        if min(steering + steered) < 0:
            raise PartitionError("negative mode index")
        object.__setattr__(self, "steering", steering)
        object.__setattr__(self, "steered", steered)

    def reversed(self) -> "Bipartition":
        return Bipartition(self.steered, self.steering)

    def check(self, n_modes: int) -> "Bipartition":
        top = max(self.steering + self.steered)
        if top >= n_modes:
            raise PartitionError(f"mode index {top} out of range for {n_modes} modes")
        return self

    def describe(self, labels: Sequence[str] | None = None) -> str:
        """Render as ``(a,b)->(c)``."""
        name = (lambda i: labels[i]) if labels is not None else str
        left = ",".join(name(i) for i in self.steering)
        right = ",".join(name(i) for i in self.steered)
        return f"({left})->({right})"


@dataclasses.dataclass(frozen=True, eq=False)
class BipartiteBlocks:
    """``sigma`` rearranged as ``[[M, C], [C.T, N]]``."""

    M: np.ndarray
    N: np.ndarray
    C: np.ndarray

    def assemble(self) -> np.ndarray:
        return np.block([[self.M, self.C], [self.C.T, self.N]])


@dataclasses.dataclass(frozen=True, eq=False)
class ModeMap:
    """Real change of mode basis, applied identically to x and p.

    Parameters
    ----------
    coefficients : array_like, shape (M, N)
        Row ``i`` expresses new mode ``i`` as a combination of the N old
        modes. Rows must be orthonormal.
    labels : sequence of str, optional
        Labels for the M new modes.
    """

    coefficients: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        coeffs = _readonly(self.coefficients)
        if coeffs.ndim != 2 or coeffs.shape[0] == 0:
            raise DimensionError("mode-map coefficients must be a nonempty 2-D array")
        tol = get_tolerances().orthonormality
        gram = coeffs @ coeffs.T
        err = np.max(np.abs(gram - np.eye(coeffs.shape[0])))
        if err > tol:
            raise ValueError(f"mode-map rows are not orthonormal (max deviation {err:.3g})")
        object.__setattr__(self, "coefficients", coeffs)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != coeffs.shape[0]:
                raise DimensionError("one label per output mode required")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def merge(cls, groups: Sequence[Sequence[int]], n_modes: int, labels=None) -> "ModeMap":
        """Map merging each group of old modes into one equally weighted mode."""
        coeffs = np.zeros((len(groups), n_modes))
        for row, group in enumerate(groups):
            group = list(group)
            if not group:
                raise PartitionError("empty merge group")
            coeffs[row, group] = 1.0 / np.sqrt(len(group))
        return cls(coeffs, labels)

    @property
    def n_in(self) -> int:
        return self.coefficients.shape[1]

    @property
    def n_out(self) -> int:
        return self.coefficients.shape[0]

    @property
    def quadrature_matrix(self) -> np.ndarray:
        """The 2M x 2N matrix acting on quadrature vectors."""
        return np.kron(self.coefficients, np.eye(2))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class Failure:
    kind: str  # "asymmetric" | "not_positive_definite" | "unphysical"
    message: str
    value: float


@dataclasses.dataclass(frozen=True)
class ValidationVerdict:
    """Outcome of :func:`validate`.

    ``failures`` lists every violated invariant; the verdict is truthy
    iff it is empty.
    """

    n_modes: int
    failures: tuple[Failure, ...]
    asymmetry: float
    min_eigenvalue: float
    min_symplectic_eigenvalue: float | None

    @property
    def valid(self) -> bool:
        return not self.failures

    def __bool__(self):
        return self.valid

    def raise_for_failures(self):
        if self.failures:
            raise UnphysicalStateError(
                "; ".join(f.message for f in self.failures), verdict=self
            )

    def as_dict(self) -> dict:
        return {
            "valid": self.valid,
            "n_modes": self.n_modes,
            "asymmetry": self.asymmetry,
            "min_eigenvalue": self.min_eigenvalue,
            "min_symplectic_eigenvalue": self.min_symplectic_eigenvalue,
            "failures": [dataclasses.asdict(f) for f in self.failures],
        }


def validate(cm) -> ValidationVerdict:
    """Check symmetry, positive definiteness and the uncertainty principle.

    Accepts a :class:`CovarianceMatrix` or a bare array.
    """
    matrix = cm.matrix if isinstance(cm, CovarianceMatrix) else np.asarray(cm, dtype=float)
    n = _n_modes_of(matrix)
    tol = get_tolerances()
    failures = []

    scale = max(np.max(np.abs(matrix)), np.finfo(float).tiny)
    asym = float(np.max(np.abs(matrix - matrix.T)) / scale)
    if asym > tol.symmetry:
        failures.append(
            Failure("asymmetric", f"asymmetric: relative asymmetry {asym:.3g}", asym)
        )

    sym = 0.5 * (matrix + matrix.T)
    min_eig = float(np.linalg.eigvalsh(sym)[0])
    nu_min = None
    if min_eig <= 0:
        failures.append(
            Failure(
                "not_positive_definite",
                f"not positive definite: min eigenvalue {min_eig:.6g}",
                min_eig,
            )
        )
    else:
        nu_min = float(symplectic_eigenvalues(sym)[0])
        if nu_min < 1 - tol.physicality:
            failures.append(
                Failure(
                    "unphysical",
                    f"unphysical: min symplectic eigenvalue {nu_min:.6g}",
                    nu_min,
                )
            )
    return ValidationVerdict(n, tuple(failures), asym, min_eig, nu_min)


# ---------------------------------------------------------------------------
# Symplectic spectrum and blocks
# ---------------------------------------------------------------------------


def _pair_spectra(eigs: np.ndarray):
    """Pair the +/- eigenvalues of a stack of ``i Omega sigma`` matrices.

    ``eigs`` has shape (batch, 2n). Returns ``(nu, bad, residue)``: the
    (batch, n) ascending moduli, a mask of items that failed to pair, and the
    worst relative residue per item.
    """
    tol = get_tolerances().pairing
    n = eigs.shape[-1] // 2
    scale = np.maximum(1.0, np.max(np.abs(eigs), axis=-1))
    imag = np.max(np.abs(eigs.imag), axis=-1) / scale
    real = np.sort(eigs.real, axis=-1)
    neg, pos = -real[..., :n][..., ::-1], real[..., n:]
    mismatch = np.max(np.abs(pos - neg), axis=-1) / scale
    residue = np.maximum(imag, mismatch)
    bad = (residue > tol) | (neg[..., 0] <= 0)
    return 0.5 * (pos + neg), bad, residue


def _spectra_batch(sigmas: np.ndarray):
    n = sigmas.shape[-1] // 2
    omega = symplectic_form(n)
    # eig(i Omega sigma) = i * eig(Omega sigma); the real problem is cheaper
    return _pair_spectra(1j * np.linalg.eigvals(omega @ sigmas))


def symplectic_eigenvalues(sigma) -> np.ndarray:
    """Symplectic spectrum of a positive-definite ``sigma``.

    The eigenvalues of ``i Omega sigma`` come in pairs ``+/-nu``; each
    ``nu`` is returned once, ascending.

    Raises
    ------
    NotPositiveDefiniteError
        If ``sigma`` is not positive definite.
    NumericalDegeneracyError
        If the eigenvalues cannot be paired within the pairing tolerance.
    """
    sigma = np.asarray(sigma, dtype=float)
    _n_modes_of(sigma)
    try:
        np.linalg.cholesky(0.5 * (sigma + sigma.T))
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("matrix is not positive definite") from None
    nu, bad, residue = _spectra_batch(sigma[None])
    if bad[0]:
        raise NumericalDegeneracyError(
            f"eigenvalues of i*Omega*sigma do not pair as +/-nu (residue {residue[0]:.3g})"
        )
    return nu[0]


def _quadrature_indices(modes: Sequence[int]) -> np.ndarray:
    modes = np.asarray(modes, dtype=int)
    return np.stack([2 * modes, 2 * modes + 1], axis=-1).reshape(*modes.shape[:-1], -1)


def split_blocks(cm: CovarianceMatrix, part: Bipartition) -> BipartiteBlocks:
    """Extract ``M`` (steering), ``N`` (steered) and ``C`` (correlations)."""
    part.check(cm.n_modes)
    a = _quadrature_indices(part.steering)
    b = _quadrature_indices(part.steered)
    s = cm.matrix
    return BipartiteBlocks(
        M=s[np.ix_(a, a)].copy(), N=s[np.ix_(b, b)].copy(), C=s[np.ix_(a, b)].copy()
    )


def _schur_batch(M: np.ndarray, N: np.ndarray, C: np.ndarray):
    """Vectorized ``N - C.T M^-1 C`` with a per-item conditioning mask.

    Returns ``(complements, ok)``. Items with ``ok == False`` have an
    ill-conditioned or non-PD ``M``; their complement rows are NaN.
    """
    limit = get_tolerances().condition
    w = np.linalg.eigvalsh(M)
    ok = (w[..., 0] > 0) & (w[..., -1] <= limit * np.where(w[..., 0] > 0, w[..., 0], 1.0))
    M_safe = np.where(ok[:, None, None], M, np.eye(M.shape[-1]))
    X = np.linalg.solve(M_safe, C)
    S = N - np.swapaxes(C, -1, -2) @ X
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    S[~ok] = np.nan
    return S, ok


def schur_complement(blocks: BipartiteBlocks) -> np.ndarray:
    """Conditional covariance ``N - C.T M^-1 C`` of the steered party.

    Raises :class:`IllConditionedError` when ``M`` is not positive definite
    or its condition number exceeds the configured limit; the state is never
    regularized.
    """
    S, ok = _schur_batch(blocks.M[None], blocks.N[None], blocks.C[None])
    if not ok[0]:
        w = np.linalg.eigvalsh(blocks.M)
        cond = np.inf if w[0] <= 0 else w[-1] / w[0]
        raise IllConditionedError(f"steering block condition number {cond:.3g} too large")
    return S[0]


# ---------------------------------------------------------------------------
# Mode selection and basis changes
# ---------------------------------------------------------------------------


def select_modes(cm: CovarianceMatrix, keep: Sequence) -> CovarianceMatrix:
    """Reduced state on ``keep`` (labels or indices), in the given order.

    Tracing out Gaussian modes is row/column deletion.
    """
    if len(keep) == 0:
        raise PartitionError("keep set is empty")
    idx = cm.indices(keep)
    if len(set(idx)) != len(idx):
        raise PartitionError("repeated mode in keep set")
    q = _quadrature_indices(idx)
    labels = None if cm.labels is None else tuple(cm.labels[i] for i in idx)
    out = CovarianceMatrix(cm.matrix[np.ix_(q, q)], labels)
    if validate(cm) and not validate(out):
        raise UnphysicalStateError("partial trace produced an unphysical state")
    return out


def apply_mode_map(cm: CovarianceMatrix, mode_map: ModeMap) -> CovarianceMatrix:
    """Covariance matrix in the new mode basis, ``L sigma L.T``."""
    if mode_map.n_in != cm.n_modes:
        raise DimensionError(
            f"mode map expects {mode_map.n_in} modes, state has {cm.n_modes}"
        )
    L = mode_map.quadrature_matrix
    out = L @ cm.matrix @ L.T
    return CovarianceMatrix(0.5 * (out + out.T), mode_map.labels)


# ---------------------------------------------------------------------------
# Standard states and random generators
# ---------------------------------------------------------------------------


def vacuum(n_modes: int, labels=None) -> CovarianceMatrix:
    return CovarianceMatrix(np.eye(2 * n_modes), labels)


def thermal(variance: float) -> CovarianceMatrix:
    return CovarianceMatrix(variance * np.eye(2))


def squeezed_vacuum(r: float) -> CovarianceMatrix:
    """Single mode squeezed in x: ``diag(e^-2r, e^2r)``."""
    return CovarianceMatrix(np.diag([np.exp(-2 * r), np.exp(2 * r)]))


def two_mode_squeezed_vacuum(r: float) -> CovarianceMatrix:
    """Two-mode squeezed vacuum with squeezing parameter ``r``."""
    a, c = np.cosh(2 * r), np.sinh(2 * r)
    Z = np.diag([1.0, -1.0])
    return CovarianceMatrix(np.block([[a * np.eye(2), c * Z], [c * Z, a * np.eye(2)]]))


def direct_sum(*cms: CovarianceMatrix) -> CovarianceMatrix:
    """Tensor product of independent states."""
    from scipy.linalg import block_diag

    return CovarianceMatrix(block_diag(*(cm.matrix for cm in cms)))


def xxpp_to_xpxp(matrix) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    n = _n_modes_of(matrix)
    perm = np.arange(2 * n).reshape(2, n).T.ravel()
    return matrix[np.ix_(perm, perm)]


def xpxp_to_xxpp(matrix) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    n = _n_modes_of(matrix)
    perm = np.arange(2 * n).reshape(n, 2).T.ravel()
    return matrix[np.ix_(perm, perm)]


def _passive_symplectic(n, rng):
    from scipy.stats import unitary_group

    U = unitary_group.rvs(n, random_state=rng) if n > 1 else np.exp(
        2j * np.pi * rng.random()
    ) * np.ones((1, 1))
    X, Y = U.real, U.imag
    return xxpp_to_xpxp(np.block([[X, -Y], [Y, X]]))


def random_symplectic(n_modes: int, rng=None, max_squeezing: float = 1.0) -> np.ndarray:
    """Random symplectic matrix from a Bloch-Messiah product ``O1 D O2``."""
    rng = np.random.default_rng(rng)
    r = rng.uniform(-max_squeezing, max_squeezing, n_modes)
    D = np.diag(np.exp(np.repeat(r, 2) * np.tile([1.0, -1.0], n_modes)))
    return _passive_symplectic(n_modes, rng) @ D @ _passive_symplectic(n_modes, rng)


def random_physical_cm(
    n_modes: int, rng=None, max_squeezing: float = 1.0, max_thermal: float = 2.0, pure=False
) -> CovarianceMatrix:
    """Random physical state ``S.T diag(nu, nu) S`` with ``nu >= 1``."""
    rng = np.random.default_rng(rng)
    S = random_symplectic(n_modes, rng, max_squeezing)
    nu = np.ones(n_modes) if pure else rng.uniform(1.0, max_thermal, n_modes)
    sigma = S.T @ np.diag(np.repeat(nu, 2)) @ S
    return CovarianceMatrix(0.5 * (sigma + sigma.T))
