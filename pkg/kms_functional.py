"""
KMS Functional - evaluates the critical KMS state on the word algebra
Inner product <a, b> = phi(a^* b), Gram matrices, and machine checks of the KMS,
gauge-invariance and phi-versus-tau properties
"""

import math
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import eigvalsh

from config import get_settings
from graph_model import Graph, is_cuntz, vertex_matrix
from spectral_kms import (
    KmsVerdict,
    factors_through_graph_algebra,
    is_row_regular,
    kms_verdict,
    spectral_radius,
)
from star_algebra import (
    Element,
    MixedGraphError,
    Path,
    Word,
    degree_decompose,
    empty_path,
    gauge_action,
    multiply,
    path_element,
    path_star,
    unitary_action,
    word_product,
    words_of_bidegree,
)

logger = logging.getLogger(__name__)

Scalar = Union[Fraction, float, complex]


class NotHomogeneousError(ValueError):
    """Element mixes several gauge degrees."""


class CuntzContextError(ValueError):
    """Operation is only defined on the one-vertex Cuntz graph."""


class TauDomainError(ValueError):
    """Element has a term outside Sp{S_i S_j^*}."""


class NotRowRegularError(ValueError):
    """Row sums of the vertex matrix are not all equal to rho(D)."""


class ProportionalityError(ArithmeticError):
    """phi is not a constant multiple of tau on Sp{S_i S_j^*}."""


@dataclass(frozen=True, eq=False)
class KmsState:
    graph: Graph
    rho: Scalar
    weights: Tuple[Scalar, ...]
    exact: bool
    _powers: Dict[int, Scalar] = field(default_factory=dict, repr=False)
    _inner_cache: Dict[Tuple[Word, Word], Scalar] = field(default_factory=dict, repr=False)
    cache_limit: int = field(default_factory=lambda: get_settings().inner_cache_size, repr=False)

    @classmethod
    def from_verdict(cls, graph: Graph, verdict: KmsVerdict) -> "KmsState":
        if not verdict.exists_on_graph_algebra:
            raise ValueError("no faithful-on-F_k critical KMS state on this graph")
        weights = tuple(verdict.state_vector)
        exact = isinstance(verdict.rho, Fraction) and all(isinstance(w, Fraction) for w in weights)
        if not exact:
            logger.warning("Critical KMS state carries float values")
        return cls(graph, verdict.rho, weights, exact)

    @classmethod
    def critical(cls, graph: Graph) -> "KmsState":
        return cls.from_verdict(graph, kms_verdict(graph))

    @classmethod
    def from_measure(cls, graph: Graph, measure: Sequence[Scalar], tol: Optional[float] = None) -> "KmsState":
        """KMS state at ln rho(D) for a user-supplied probability measure with D N = rho(D) N"""
        tol = get_settings().tolerance if tol is None else tol
        D = vertex_matrix(graph)
        spectral = spectral_radius(D)
        if len(measure) != graph.m:
            raise ValueError(f"measure has {len(measure)} entries, graph has {graph.m} vertices")
        weights = tuple(Fraction(w) if isinstance(w, (int, Fraction)) else float(w) for w in measure)
        if any(w <= 0 for w in weights):
            raise ValueError("measure must be strictly positive")
        exact = isinstance(spectral.rho, Fraction) and all(isinstance(w, Fraction) for w in weights)
        if exact:
            if sum(weights) != 1:
                raise ValueError("measure must sum to 1")
            for row, w in zip(D.entries, weights):
                if sum(int(d) * x for d, x in zip(row, weights)) != spectral.rho * w:
                    raise ValueError("measure is not an eigenvector of D for rho(D)")
        elif not factors_through_graph_algebra(D, weights, math.log(float(spectral.rho)), tol):
            raise ValueError("measure is not an eigenvector of D for rho(D)")
        return cls(graph, spectral.rho, weights, exact)

    def rho_power(self, k: int) -> Scalar:
        """rho^(-k)"""
        if k not in self._powers:
            self._powers[k] = Fraction(self.rho) ** (-k) if self.exact else float(self.rho) ** (-k)
        return self._powers[k]

    @property
    def zero(self) -> Scalar:
        return Fraction(0) if self.exact else 0.0


@dataclass(frozen=True)
class TauFunctional:
    graph: Graph


def _check_graph(state: KmsState, a: Element) -> None:
    if a.graph is not state.graph and a.graph != state.graph:
        raise MixedGraphError("element and state belong to different graphs")


def phi_word(state: KmsState, w: Word) -> Scalar:
    """phi(S_mu S_nu^*) = delta_{mu,nu} rho^(-|mu|) w_{t(mu)}"""
    if w.mu != w.nu:
        return state.zero
    return state.rho_power(len(w.mu.edges)) * state.weights[w.mu.target]


def phi(state: KmsState, a: Element) -> Scalar:
    _check_graph(state, a)
    total = state.zero
    for w, c in a.terms.items():
        if w.mu == w.nu:
            total += c * phi_word(state, w)
    return total


def word_inner(state: KmsState, u: Word, v: Word) -> Scalar:
    """<u, v> = phi(u^* v) for single words, memoized on the state up to cache_limit entries"""
    key = (u, v)
    cache = state._inner_cache
    if key not in cache:
        if len(cache) >= state.cache_limit:
            cache.clear()
        w = word_product(u.adjoint(), v)
        cache[key] = state.zero if w is None else phi_word(state, w)
    return cache[key]


def inner_product(state: KmsState, a: Element, b: Element) -> Scalar:
    """phi(a^* b), expanded bilinearly over word pairs"""
    _check_graph(state, a)
    _check_graph(state, b)
    total = state.zero
    for u, cu in a.terms.items():
        conj = cu.conjugate()
        for v, cv in b.terms.items():
            value = word_inner(state, u, v)
            if value != 0:
                total += conj * cv * value
    return total


def is_close(x: Scalar, y: Scalar, tol: Optional[float] = None) -> bool:
    if isinstance(x, Fraction) and isinstance(y, Fraction):
        return x == y
    tol = get_settings().tolerance if tol is None else tol
    return abs(x - y) <= tol


def _gram_row(state: KmsState, elements: Sequence[Element], i: int) -> List[Scalar]:
    return [inner_product(state, elements[i], b) for b in elements]


def gram_matrix(state: KmsState, elements: Sequence[Element], n_jobs: Optional[int] = None) -> List[List[Scalar]]:
    """G[i][j] = <e_i, e_j>"""
    n_jobs = get_settings().n_jobs if n_jobs is None else n_jobs
    if n_jobs == 1:
        return [_gram_row(state, elements, i) for i in range(len(elements))]
    rows = Parallel(n_jobs=n_jobs)(delayed(_gram_row)(state, elements, i) for i in range(len(elements)))
    return list(rows)


def _exact_pivots(matrix: List[List[Fraction]]) -> List[Fraction]:
    """Gaussian elimination without row exchanges; pivots of a Hermitian PSD matrix in order"""
    a = [list(row) for row in matrix]
    size = len(a)
    pivots = []
    for col in range(size):
        pivot = a[col][col]
        pivots.append(pivot)
        if pivot == 0:
            continue
        for row in range(col + 1, size):
            factor = a[row][col] / pivot
            if factor != 0:
                for k in range(col, size):
                    a[row][k] -= factor * a[col][k]
    return pivots


def _exact_rank(matrix: List[List[Fraction]]) -> int:
    a = [list(row) for row in matrix]
    rows, cols = len(a), len(a[0]) if a else 0
    rank = 0
    for col in range(cols):
        pivot_row = next((r for r in range(rank, rows) if a[r][col] != 0), None)
        if pivot_row is None:
            continue
        a[rank], a[pivot_row] = a[pivot_row], a[rank]
        for r in range(rows):
            if r != rank and a[r][col] != 0:
                factor = a[r][col] / a[rank][col]
                a[r] = [x - factor * y for x, y in zip(a[r], a[rank])]
        rank += 1
    return rank


def _all_exact(matrix: List[List[Scalar]]) -> bool:
    return all(isinstance(x, Fraction) for row in matrix for x in row)


def gram_eigenvalues(state: KmsState, elements: Sequence[Element]) -> np.ndarray:
    matrix = gram_matrix(state, elements)
    if not matrix:
        return np.zeros(0)
    dtype = complex if any(isinstance(x, complex) for row in matrix for x in row) else float
    return eigvalsh(np.array(matrix, dtype=dtype))


def gram_rank(state: KmsState, elements: Sequence[Element], tol: Optional[float] = None) -> int:
    matrix = gram_matrix(state, elements)
    if not matrix:
        return 0
    if _all_exact(matrix):
        return _exact_rank(matrix)
    tol = get_settings().pivot_tolerance if tol is None else tol
    values = gram_eigenvalues(state, elements)
    return int(np.sum(values > tol * max(1.0, float(values.max()))))


def is_positive_definite(state: KmsState, elements: Sequence[Element], tol: Optional[float] = None) -> bool:
    matrix = gram_matrix(state, elements)
    if not matrix:
        return True
    if _all_exact(matrix):
        return all(p > 0 for p in _exact_pivots(matrix))
    tol = get_settings().tolerance if tol is None else tol
    return bool(gram_eigenvalues(state, elements).min() > tol)


def check_kms_condition(state: KmsState, a: Element, b: Element, tol: Optional[float] = None) -> bool:
    """Twisted trace form of the KMS condition: phi(a b) = rho^(-deg a) phi(b a) for homogeneous a"""
    parts = degree_decompose(a)
    if len(parts) > 1:
        raise NotHomogeneousError(f"element has components of degrees {sorted(parts)}")
    d = next(iter(parts), 0)
    lhs = phi(state, multiply(a, b))
    rhs = state.rho_power(d) * phi(state, multiply(b, a))
    return is_close(lhs, rhs, tol)


def check_plug_lemma(state: KmsState, mu: Path, nu: Path, a: Element, tol: Optional[float] = None) -> bool:
    """phi(S_mu a S_nu^*) = delta_{mu,nu} n^(-|mu|) phi(a) on the Cuntz algebra, for |mu| = |nu|"""
    if not is_cuntz(state.graph):
        raise CuntzContextError("the plug identity is stated for the Cuntz graph")
    if len(mu.edges) != len(nu.edges):
        raise ValueError("paths must have equal length")
    g = state.graph
    lhs = phi(state, multiply(multiply(path_element(g, mu), a), path_star(g, nu)))
    rhs = state.rho_power(len(mu.edges)) * phi(state, a) if mu == nu else state.zero
    return is_close(lhs, rhs, tol)


def tau(t: TauFunctional, a: Element) -> Fraction:
    """tau(S_i S_j^*) = delta_{ij}, extended linearly"""
    if a.graph is not t.graph and a.graph != t.graph:
        raise MixedGraphError("element and functional belong to different graphs")
    total = Fraction(0)
    for w, c in a.terms.items():
        if len(w.mu.edges) != 1 or len(w.nu.edges) != 1:
            raise TauDomainError("tau is defined on Sp{S_i S_j^*} only")
        if w.mu.edges == w.nu.edges:
            total += c
    return total


def in_tau_domain(a: Element) -> bool:
    return all(len(w.mu.edges) == 1 and len(w.nu.edges) == 1 for w in a.terms)


def compare_phi_tau(state: KmsState, t: TauFunctional, tol: Optional[float] = None) -> Scalar:
    """
    Constant c = 1 / (m rho) with phi = c tau on Sp{S_i S_j^*}, checked on every basis word.

    Raises:
        NotRowRegularError: row sums differ from rho(D)
        ProportionalityError: some basis word breaks proportionality
    """
    g = state.graph
    if not is_row_regular(vertex_matrix(g)):
        raise NotRowRegularError("phi and tau are compared on row-regular graphs only")
    c = 1 / (g.m * Fraction(state.rho)) if state.exact else 1.0 / (g.m * float(state.rho))
    for w in words_of_bidegree(g, 1, 1):
        element = Element.from_word(g, w)
        if not is_close(phi_word(state, w), c * tau(t, element), tol):
            raise ProportionalityError(f"phi/tau proportionality fails on {w}")
    logger.info(f"phi = {c} * tau on Sp{{S_i S_j^*}}")
    return c


def check_gauge_invariance(state: KmsState, a: Element, z: Scalar, tol: Optional[float] = None) -> bool:
    """phi(gamma_z(a)) = phi(a)"""
    return is_close(phi(state, gauge_action(a, z)), phi(state, a), tol)


def check_unitary_invariance(state: KmsState, u, a: Element, tol: Optional[float] = None) -> bool:
    """phi(alpha_u(a)) = phi(a) for the linear action of a unitary on the Cuntz algebra"""
    if not is_cuntz(state.graph):
        raise CuntzContextError("the linear unitary action is defined on the Cuntz graph")
    tol = get_settings().tolerance if tol is None else tol
    u = np.asarray(u)
    if not np.allclose(u @ u.conj().T, np.eye(u.shape[0]), atol=tol):
        raise ValueError("matrix is not unitary")
    return is_close(phi(state, unitary_action(a, u)), phi(state, a), tol)


def format_scalar(x: Scalar) -> str:
    """Exact fractions as 'a/b', everything else as a decimal"""
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, complex):
        if abs(x.imag) == 0:
            return f"{x.real:.12g}"
        return f"{x.real:.12g}{x.imag:+.12g}j"
    return f"{float(x):.12g}"
