"""
Smallest eigenpairs of the generalized symmetric problem K w = λ M w.

Shift-invert Lanczos (ARPACK through scipy.sparse.linalg.eigsh) on a sparse LU of
K − σM, followed by block inverse iteration with Rayleigh–Ritz until every returned
pair meets the residual tolerance. The extra block columns let numerically repeated
eigenvalues show up with their full multiplicity.
"""

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from core.config import settings
from core.exceptions import (
    ConvergenceError,
    EigenvectorCrossingError,
    FactorizationError,
    InvalidInputError,
)
from core.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class EigenPairs:
    """
    Ascending eigenvalues with M-orthonormal eigenvector columns.

    multiplicity_groups holds half-open index ranges [start, stop) of numerically
    equal eigenvalues. The last range may extend past len(pairs) when its cluster
    continues beyond the computed pairs. sign_fixed marks vectors whose sign was set
    by a reference.
    """
    lambdas: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    multiplicity_groups: tuple[tuple[int, int], ...]
    sign_fixed: np.ndarray | None = None

    def __len__(self) -> int:
        return self.lambdas.size

    def group_of(self, index: int) -> tuple[int, int]:
        for group in self.multiplicity_groups:
            if group[0] <= index < group[1]:
                return group
        raise IndexError(index)

    def is_simple(self, index: int) -> bool:
        start, stop = self.group_of(index)
        return stop - start == 1

    def head(self, k: int) -> "EigenPairs":
        """The first k pairs; cluster ranges keep their true extent."""
        fixed = None if self.sign_fixed is None else self.sign_fixed[:k]
        return EigenPairs(self.lambdas[:k], self.vectors[:, :k], self.residuals[:k],
                          _clip_groups(self.multiplicity_groups, k), fixed)


def multiplicity_groups(lambdas: np.ndarray, cluster_tol: float | None = None) -> tuple[tuple[int, int], ...]:
    """Split sorted eigenvalues into runs whose consecutive relative gaps are below cluster_tol."""
    tol = settings.cluster_tol if cluster_tol is None else cluster_tol
    groups, start = [], 0
    for i in range(1, lambdas.size):
        scale = max(abs(lambdas[i]), abs(lambdas[i - 1]), np.finfo(float).tiny)
        if (lambdas[i] - lambdas[i - 1]) / scale >= tol:
            groups.append((start, i))
            start = i
    if lambdas.size:
        groups.append((start, lambdas.size))
    return tuple(groups)


def _residuals(K, M, lambdas, vectors, sigma) -> np.ndarray:
    KV = K @ vectors
    MV = M @ vectors
    res = np.linalg.norm(KV - MV * lambdas, axis=0)
    scale = np.maximum(np.abs(lambdas), abs(sigma))
    scale = np.where(scale > 0.0, scale, 1.0) * np.linalg.norm(MV, axis=0)
    return res / scale


def _factorize(K, M, sigma: float):
    shifted = K - sigma * M
    try:
        return spla.splu(sp.csc_matrix(shifted))
    except RuntimeError as e:
        raise FactorizationError(
            f"factorization of K - {sigma}·M failed ({e}); is the Dirichlet boundary empty?") from e


def _rayleigh_ritz(K, M, X):
    """Ritz pairs of (K, M) on span(X), M-orthonormal."""
    A = X.T @ (K @ X)
    B = X.T @ (M @ X)
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    try:
        theta, Y = sla.eigh(A, B)
    except sla.LinAlgError:
        # the block lost rank; orthonormalize in the M inner product first
        Q = _m_orthonormalize(M, X)
        theta, Y = sla.eigh(Q.T @ (K @ Q))
        return theta, Q @ Y
    return theta, X @ Y


def _m_orthonormalize(M, X):
    Q, _ = np.linalg.qr(X)
    G = Q.T @ (M @ Q)
    w, V = np.linalg.eigh(0.5 * (G + G.T))
    keep = w > 1e-14 * w.max()
    return Q @ (V[:, keep] / np.sqrt(w[keep]))


def smallest_eigenpairs(K, M, k: int, tol: float | None = None, sigma: float = 0.0,
                        seed: int = 0, cluster_tol: float | None = None,
                        max_iter: int | None = None) -> EigenPairs:
    """
    The k smallest eigenpairs of K w = λ M w (K, M symmetric, M positive definite).

    With sigma = 0 (default) K must be positive definite, and every returned
    eigenvalue is checked to be positive. A negative sigma handles singular K,
    e.g. pure Neumann problems.
    """
    tol = settings.eigen_tol if tol is None else tol
    max_iter = settings.eigen_max_iter if max_iter is None else max_iter
    n = K.shape[0]
    if K.shape != M.shape or K.shape != (n, n):
        raise InvalidInputError(f"K and M must be square of equal size, got {K.shape} and {M.shape}")
    if not 1 <= k <= n:
        raise InvalidInputError(f"requested {k} eigenpairs of a {n}-dimensional problem")

    rng = np.random.default_rng(seed)
    block = min(n, k + max(2, k // 2))
    if n <= max(2 * block + 2, 40):
        pairs = dense_eigen_oracle(K, M)
        lambdas, vectors = pairs.lambdas[:k], pairs.vectors[:, :k]
        _check_positive(lambdas, sigma)
        residuals = _residuals(K, M, lambdas, vectors, sigma)
        groups = multiplicity_groups(pairs.lambdas, cluster_tol)
        return EigenPairs(lambdas, vectors, residuals, _clip_groups(groups, k))

    lu = _factorize(K, M, sigma)
    op_inv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)

    # one pair past k tells whether the last cluster continues
    need = min(k + 1, block)
    nev = min(block, n - 2)
    try:
        theta, X = spla.eigsh(K, k=nev, M=M, sigma=sigma, which="LM", OPinv=op_inv,
                              tol=tol * 1e-2, v0=rng.standard_normal(n),
                              ncv=min(n - 1, max(2 * nev + 1, 20)))
    except spla.ArpackNoConvergence as e:
        logger.debug("eigsh.no_convergence", found=len(e.eigenvalues))
        X = e.eigenvectors if e.eigenvectors.size else np.empty((n, 0))

    # extra random columns catch copies of repeated eigenvalues Lanczos missed
    X = np.column_stack([X, rng.standard_normal((n, block + 2 - X.shape[1]))])
    lambdas = vectors = residuals = None
    for sweep in range(max_iter):
        theta, V = _rayleigh_ritz(K, M, X)
        order = np.argsort(theta)
        theta, V = theta[order], V[:, order]
        lambdas, vectors = theta[:block], V[:, :block]
        residuals = _residuals(K, M, lambdas, vectors, sigma)
        if sweep >= 2 and np.all(residuals[:need] <= tol):
            break
        X = lu.solve(np.asarray(M @ V))
        X /= np.linalg.norm(X, axis=0)
    else:
        raise ConvergenceError(
            f"eigenpairs did not reach tolerance {tol:g} after {max_iter} sweeps "
            f"(worst residual {residuals[:need].max():.3g})")

    logger.debug("eigensolver.converged", k=k, sweeps=sweep + 1, worst_residual=float(residuals[:k].max()))
    _check_positive(lambdas[:k], sigma)
    groups = multiplicity_groups(lambdas[:need], cluster_tol)
    return EigenPairs(lambdas[:k], vectors[:, :k], residuals[:k],
                      _clip_groups(groups, k))


def _clip_groups(groups, k):
    """Drop groups starting at or past k. The last kept group may end past k."""
    return tuple(g for g in groups if g[0] < k)


def _check_positive(lambdas, sigma):
    if sigma == 0.0 and np.any(lambdas <= 0.0):
        raise FactorizationError(
            f"non-positive eigenvalue {lambdas.min():.6g}: K is not positive definite "
            "on the free dofs (missing Dirichlet boundary?)")


def dense_eigen_oracle(K, M) -> EigenPairs:
    """Full spectrum by Cholesky reduction of M and a dense symmetric eigensolve."""
    n = K.shape[0]
    if n > settings.dense_oracle_max_dim:
        raise InvalidInputError(
            f"dense oracle limited to dimension {settings.dense_oracle_max_dim}, got {n}")
    Kd = K.toarray() if sp.issparse(K) else np.asarray(K, dtype=float)
    Md = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    try:
        lambdas, vectors = sla.eigh(0.5 * (Kd + Kd.T), 0.5 * (Md + Md.T))
    except sla.LinAlgError as e:
        raise FactorizationError(f"dense reduction failed: {e}") from e
    residuals = _residuals(Kd, Md, lambdas, vectors, 0.0)
    return EigenPairs(lambdas, vectors, residuals, multiplicity_groups(lambdas))


def rayleigh_quotient(K, M, u: np.ndarray) -> float:
    u = np.asarray(u, dtype=float)
    denom = float(u @ (M @ u))
    if not np.any(u) or denom == 0.0:
        raise InvalidInputError("Rayleigh quotient of the zero vector")
    return float(u @ (K @ u)) / denom


def apply_sign_convention(pairs: EigenPairs, reference, M_ref,
                          min_overlap: float | None = None) -> EigenPairs:
    """
    Flip every simple eigenvector whose M_ref-inner product with its reference is
    negative. Clustered vectors are left untouched and reported unfixed.
    """
    min_overlap = settings.sign_overlap_min if min_overlap is None else min_overlap
    ref = reference.vectors if isinstance(reference, EigenPairs) else np.asarray(reference)
    if ref.ndim == 1:
        ref = ref[:, None]
    if ref.shape[1] != len(pairs) or ref.shape[0] != pairs.vectors.shape[0]:
        raise InvalidInputError(
            f"reference has shape {ref.shape}, eigenvectors {pairs.vectors.shape}")

    vectors = pairs.vectors.copy()
    fixed = np.zeros(len(pairs), dtype=bool)
    for i in range(len(pairs)):
        if not pairs.is_simple(i):
            continue
        v, r = vectors[:, i], ref[:, i]
        Mr = M_ref @ r
        inner = float(v @ Mr)
        overlap = inner / np.sqrt(float(v @ (M_ref @ v)) * float(r @ Mr))
        if abs(overlap) < min_overlap:
            raise EigenvectorCrossingError(i, overlap)
        if inner < 0.0:
            vectors[:, i] = -v
        fixed[i] = True
    return replace(pairs, vectors=vectors, sign_fixed=fixed)
