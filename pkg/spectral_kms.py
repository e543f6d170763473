"""
Spectral KMS Analyzer - spectral radius, Perron eigenvectors and KMS existence verdicts
Decides whether the graph algebra carries a KMS state at the critical inverse temperature ln(rho(D))
"""

import math
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import eigvals, svd
from scipy.optimize import linprog
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from config import get_settings
from graph_model import (
    Graph,
    GraphHasSinkError,
    GraphValidationError,
    VertexMatrix,
    has_no_sink,
    is_connected,
    is_strongly_connected,
    sinks,
    vertex_matrix,
)

logger = logging.getLogger(__name__)

Scalar = Union[Fraction, float]

# relative scale below which eigenspace singular values and eigenvector entries count as zero
EIGEN_THRESHOLD = 1e-6


class SpectralConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"power iteration did not converge after {iterations} iterations (residual {residual:.3e})")


@dataclass(frozen=True)
class SpectralData:
    rho: Scalar
    eigenvector: Optional[Tuple[Scalar, ...]] = None
    is_exact: bool = False
    non_unique: bool = False
    eigenspace_dimension: int = 0
    iterations: int = 0
    residual: float = 0.0


@dataclass(frozen=True)
class KmsVerdict:
    beta_critical: float
    exists_on_graph_algebra: bool
    state_vector: Optional[Tuple[Scalar, ...]]
    diagnostics: str
    spectral: SpectralData
    non_unique: bool = False
    unique_by_strong_connectivity: bool = False

    @property
    def rho(self) -> Scalar:
        return self.spectral.rho

    @property
    def is_exact(self) -> bool:
        return self.spectral.is_exact


def common_row_sum(D: VertexMatrix) -> Optional[int]:
    sums = D.row_sums()
    if sums.size and np.all(sums == sums[0]):
        return int(sums[0])
    return None


def _power_iteration(B: np.ndarray, tol: float, max_iterations: int) -> Tuple[float, np.ndarray, int, float]:
    """Dominant eigenpair of a nonnegative matrix; start vector uniform, iterate kept on the simplex"""
    size = B.shape[0]
    x = np.full(size, 1.0 / size)
    residual = math.inf
    for iteration in range(1, max_iterations + 1):
        y = B @ x
        lam = float(y.sum())
        residual = float(np.max(np.abs(y - lam * x)))
        if residual < tol:
            return lam, x, iteration, residual
        x = y / lam
    raise SpectralConvergenceError(residual, max_iterations)


def _component_radii(D: VertexMatrix, tol: float, max_iterations: int) -> Tuple[float, int, float]:
    """
    Largest spectral radius over the strongly connected blocks of D.

    Each block is irreducible, so power iteration on block + I converges geometrically.
    Running it on the whole reducible matrix stalls on defective eigenvalues instead.
    """
    labels_count, labels = connected_components(csr_matrix(D.entries), directed=True, connection="strong")
    rho, iterations, residual = 0.0, 0, 0.0
    for label in range(labels_count):
        idx = np.flatnonzero(labels == label)
        block = D.entries[np.ix_(idx, idx)].astype(float)
        if not block.any():
            continue
        lam, _, steps, block_residual = _power_iteration(block + np.eye(idx.size), tol, max_iterations)
        iterations += steps
        residual = max(residual, block_residual)
        rho = max(rho, lam - 1.0)
    logger.debug(f"Spectral radius taken over {labels_count} strongly connected blocks")
    return rho, iterations, residual


def spectral_radius(D: VertexMatrix, tol: Optional[float] = None, max_iterations: Optional[int] = None) -> SpectralData:
    """
    Spectral radius of the vertex matrix.

    Constant row sum r gives rho = r exactly. Otherwise power iteration runs on D_C + I
    for every strongly connected block D_C (same Perron vector, aperiodic, radius shifted
    by one) and rho is the largest block radius. The result is cross-checked against the
    eigenvalue moduli from a dense eigen-decomposition.
    """
    settings = get_settings()
    tol = settings.tolerance if tol is None else tol
    max_iterations = settings.max_iterations if max_iterations is None else max_iterations

    r = common_row_sum(D)
    if r is not None:
        logger.info(f"Constant row sum {r}: spectral radius is exact")
        return SpectralData(rho=Fraction(r), is_exact=True)

    rho, iterations, residual = _component_radii(D, tol, max_iterations)
    reference = float(np.max(np.abs(eigvals(D.entries.astype(float)))))
    if not math.isfinite(reference) or abs(rho - reference) > EIGEN_THRESHOLD * max(1.0, reference):
        logger.error(f"Power iteration gave rho = {rho:.12g}, eigen-decomposition gave {reference:.12g}")
        raise SpectralConvergenceError(abs(rho - reference), iterations)
    logger.info(f"Power iteration converged in {iterations} iterations: rho = {rho:.12g}")
    return SpectralData(rho=rho, is_exact=False, iterations=iterations, residual=residual)


def _eigenspace_basis(D: VertexMatrix, rho: float) -> np.ndarray:
    A = D.entries.astype(float) - rho * np.eye(D.size)
    _, s, vh = svd(A)
    threshold = EIGEN_THRESHOLD * max(1.0, float(s.max()) if s.size else 1.0)
    rank = int(np.sum(s > threshold))
    return vh[rank:].T.conj().real


def _positive_representative(basis: np.ndarray) -> Optional[np.ndarray]:
    """Find a strictly positive probability vector inside span(basis), maximizing its smallest entry"""
    size, dim = basis.shape
    # variables: coefficients c (dim) and the margin t; maximize t
    cost = np.zeros(dim + 1)
    cost[-1] = -1.0
    A_ub = np.hstack([-basis, np.ones((size, 1))])  # t - (basis c)_i <= 0
    b_ub = np.zeros(size)
    A_eq = np.append(basis.sum(axis=0), 0.0).reshape(1, -1)
    b_eq = np.array([1.0])
    bounds = [(None, None)] * dim + [(None, 1.0)]
    result = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if not result.success or result.x[-1] <= EIGEN_THRESHOLD:
        return None
    vector = basis @ result.x[:dim]
    return vector / vector.sum()


def critical_eigenvector(D: VertexMatrix, spectral: Optional[SpectralData] = None, tol: Optional[float] = None) -> SpectralData:
    """
    Normalized eigenvector for rho(D) with strictly positive entries, if one exists.

    A degenerate eigenspace is flagged non-unique; the uniform vector is the canonical
    representative whenever it lies in the eigenspace.
    """
    tol = get_settings().tolerance if tol is None else tol
    spectral = spectral or spectral_radius(D, tol=tol)
    rho = float(spectral.rho)
    size = D.size

    basis = _eigenspace_basis(D, rho)
    dim = basis.shape[1]
    non_unique = dim > 1
    if non_unique:
        logger.warning(f"Eigenspace of rho = {rho:.12g} has dimension {dim}; KMS state is not unique")

    uniform = np.full(size, 1.0 / size)
    uniform_works = float(np.max(np.abs(D.entries @ uniform - rho * uniform))) <= tol

    vector: Optional[Tuple[Scalar, ...]] = None
    if spectral.is_exact and uniform_works:
        vector = tuple(Fraction(1, size) for _ in range(size))
    elif uniform_works and non_unique:
        vector = tuple(float(x) for x in uniform)
    elif dim == 1:
        v = basis[:, 0]
        total = v.sum()
        if abs(total) > tol:
            v = v / total
            if np.all(v > EIGEN_THRESHOLD):
                vector = tuple(float(x) for x in v)
    elif dim > 1:
        v = _positive_representative(basis)
        if v is not None:
            vector = tuple(float(x) for x in v)

    if vector is None:
        logger.info(f"No strictly positive eigenvector for rho = {rho:.12g}")

    return SpectralData(
        rho=spectral.rho,
        eigenvector=vector,
        is_exact=spectral.is_exact,
        non_unique=non_unique,
        eigenspace_dimension=dim,
        iterations=spectral.iterations,
        residual=spectral.residual,
    )


def _as_measure(N: Sequence[Scalar], tol: float) -> np.ndarray:
    vector = np.array([float(x) for x in N])
    if np.any(vector < -tol) or abs(vector.sum() - 1.0) > tol:
        raise ValueError("N must be a probability vector (nonnegative entries summing to 1)")
    return vector


def check_subinvariance(D: VertexMatrix, N: Sequence[Scalar], beta: float, tol: Optional[float] = None) -> bool:
    """True iff (D N)_i <= e^beta N_i for every vertex"""
    tol = get_settings().tolerance if tol is None else tol
    vector = _as_measure(N, tol)
    if len(vector) != D.size:
        raise ValueError(f"measure has {len(vector)} entries, graph has {D.size} vertices")
    return bool(np.all(D.entries @ vector <= math.exp(beta) * vector + tol))


def factors_through_graph_algebra(D: VertexMatrix, N: Sequence[Scalar], beta: float, tol: Optional[float] = None) -> bool:
    """Equality case of subinvariance: the Toeplitz KMS state with measure N descends to C*(graph)"""
    tol = get_settings().tolerance if tol is None else tol
    vector = _as_measure(N, tol)
    if len(vector) != D.size:
        raise ValueError(f"measure has {len(vector)} entries, graph has {D.size} vertices")
    return bool(np.all(np.abs(D.entries @ vector - math.exp(beta) * vector) <= tol))


def toeplitz_critical_state_exists(D: VertexMatrix, N: Sequence[Scalar], spectral: Optional[SpectralData] = None) -> bool:
    """Any probability measure with D N <= rho(D) N gives a KMS_{ln rho(D)} state on the Toeplitz algebra"""
    spectral = spectral or spectral_radius(D)
    return check_subinvariance(D, N, math.log(float(spectral.rho)))


def is_row_regular(D: VertexMatrix, spectral: Optional[SpectralData] = None, tol: Optional[float] = None) -> bool:
    """All row sums equal, and equal to rho(D)"""
    tol = get_settings().tolerance if tol is None else tol
    r = common_row_sum(D)
    if r is None:
        return False
    spectral = spectral or spectral_radius(D)
    return abs(float(spectral.rho) - r) <= tol


def kms_verdict(g: Graph, tol: Optional[float] = None) -> KmsVerdict:
    """Existence of a KMS state at beta = ln rho(D) that is faithful on every F_k"""
    if not has_no_sink(g):
        raise GraphHasSinkError(sinks(g))
    if not is_connected(g):
        isolated = [v for i, v in enumerate(g.vertices) if not any(i in (e.source, e.target) for e in g.edges)]
        raise GraphValidationError(f"vertices without incident edges: {', '.join(isolated)}", "vertices")

    D = vertex_matrix(g)
    spectral = critical_eigenvector(D, spectral_radius(D, tol=tol), tol=tol)
    beta = math.log(float(spectral.rho))
    strongly = is_strongly_connected(g)

    notes = [f"rho(D) = {spectral.rho}" + (" (exact)" if spectral.is_exact else "")]
    if spectral.eigenvector is not None:
        exists = True
        notes.append("strictly positive eigenvector found: critical KMS state exists on C*(graph)")
        if spectral.non_unique:
            notes.append(f"eigenspace dimension {spectral.eigenspace_dimension}; state vector is one representative")
        elif strongly:
            notes.append("graph is strongly connected: the critical KMS state is unique")
    else:
        exists = False
        notes.append("no faithful-on-F_k critical KMS state")

    logger.info(f"KMS verdict: exists={exists}, beta={beta:.12g}")
    return KmsVerdict(
        beta_critical=beta,
        exists_on_graph_algebra=exists,
        state_vector=spectral.eigenvector,
        diagnostics="; ".join(notes),
        spectral=spectral,
        non_unique=spectral.non_unique,
        unique_by_strong_connectivity=strongly,
    )
