"""
Filtration Builder - AF filtration F_k, complements W_k and the shifted spaces V1/V2 of the Cuntz algebra
Orthogonalizes against the KMS inner product and verifies the orthogonal-filtration axioms
"""

import math
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from joblib import Parallel, delayed

from config import get_settings
from graph_model import is_cuntz
from kms_functional import (
    CuntzContextError,
    KmsState,
    Scalar,
    format_scalar,
    inner_product,
    word_inner,
)
from star_algebra import (
    Element,
    Word,
    balanced_words,
    multiply,
    normal_form,
    paths_of_length,
    path_element,
    path_star,
    render_word,
    unit,
    words_of_bidegree,
    words_up_to,
)

logger = logging.getLogger(__name__)

KIND_ORDER = {"W": 0, "V1": 1, "V2": 2}


class GramSingularError(ArithmeticError):
    """A spanning set expected to be independent collapsed during orthogonalization."""


class InsufficientCoverageError(ValueError):
    """The supplied components cannot represent the requested word."""


@dataclass(frozen=True)
class ComponentLabel:
    kind: str
    k: int
    r: int = 0

    def __post_init__(self):
        if self.kind not in KIND_ORDER:
            raise ValueError(f"unknown component kind {self.kind!r}")

    @property
    def degree(self) -> int:
        """Gauge degree shared by every element of the component"""
        if self.kind == "V1":
            return self.r
        if self.kind == "V2":
            return -self.r
        return 0

    def sort_key(self) -> Tuple[int, int, int]:
        return (KIND_ORDER[self.kind], self.k, self.r)

    def __str__(self) -> str:
        if self.kind == "W":
            return f"W({self.k})"
        return f"{self.kind}({self.k},{self.r})"


@dataclass(frozen=True)
class BalancedLevel:
    k: int
    words: Tuple[Word, ...]
    elements: Tuple[Element, ...] = field(repr=False)

    @property
    def dimension(self) -> int:
        return len(self.elements)


@dataclass(frozen=True)
class FiltrationComponent:
    label: ComponentLabel
    spanning_set: Tuple[Element, ...] = field(repr=False)
    norms_squared: Tuple[Scalar, ...] = field(repr=False)
    orthonormal: bool

    @property
    def dimension(self) -> int:
        return len(self.spanning_set)


@dataclass(frozen=True)
class PairCheck:
    first: ComponentLabel
    second: ComponentLabel
    max_abs_inner: Scalar
    passed: bool


@dataclass
class OrthogonalityReport:
    pairs: List[PairCheck]
    passed: bool
    max_abs_inner: Scalar


@dataclass
class Decomposition:
    word: Word
    coefficients: Dict[ComponentLabel, List[Scalar]]
    residual_norm_squared: Scalar
    residual_norm: float


@dataclass
class DensityReport:
    level: int
    words_checked: int
    max_residual_norm: float
    failures: List[str]
    passed: bool


class _WordGram:
    """Sparse block of word inner products <u, v>, u from rows and v from columns"""

    def __init__(self, state: KmsState, rows: Iterable[Word], cols: Iterable[Word]):
        self.state = state
        cols = list(cols)
        self.neighbors: Dict[Word, List[Tuple[Word, Scalar]]] = {}
        for u in rows:
            entries = []
            for v in cols:
                value = word_inner(state, u, v)
                if value != 0:
                    entries.append((v, value))
            self.neighbors[u] = entries

    def dual(self, a: Element) -> Dict[Word, Scalar]:
        """Functional x -> <a, x> written as a map on column words"""
        out: Dict[Word, Scalar] = defaultdict(int)
        for u, c in a.terms.items():
            conj = c.conjugate()
            for v, value in self.neighbors[u]:
                out[v] += conj * value
        return out

    def pair(self, dual: Dict[Word, Scalar], x: Element) -> Scalar:
        total = self.state.zero
        for v, c in x.terms.items():
            d = dual.get(v)
            if d is not None:
                total += d * c
        return total


def _support(elements: Iterable[Element]) -> List[Word]:
    words = {w for e in elements for w in e.terms}
    return sorted(words, key=Word.sort_key)


def _combine(graph, pieces: Iterable[Tuple[Scalar, Element]]) -> Element:
    acc: Dict[Word, Scalar] = defaultdict(int)
    for s, e in pieces:
        for w, c in e.terms.items():
            acc[w] += s * c
    return Element(graph, acc)


def _orthogonalize(
    state: KmsState,
    vectors: Sequence[Element],
    basis: Optional[List[Tuple[Element, Scalar]]] = None,
    strict: bool = False,
    tol: Optional[float] = None,
) -> List[Tuple[Element, Scalar]]:
    """
    Modified Gram-Schmidt under <a, b> = phi(a^* b).

    Args:
        vectors: candidates, processed in order
        basis: already orthogonal (element, squared norm) pairs to orthogonalize against
        strict: raise GramSingularError instead of dropping a dependent candidate

    Returns:
        New orthogonal (element, squared norm) pairs; exact states keep them unnormalized,
        float states normalize them to unit length
    """
    tol = get_settings().pivot_tolerance if tol is None else tol
    basis = list(basis or [])
    support = _support([q for q, _ in basis] + list(vectors))
    gram = _WordGram(state, support, support)
    duals = [gram.dual(q) for q, _ in basis]
    graph = state.graph
    found: List[Tuple[Element, Scalar]] = []

    for index, v in enumerate(vectors):
        original = gram.pair(gram.dual(v), v)
        x = v
        for (q, norm), dual in zip(basis, duals):
            coeff = gram.pair(dual, x) / norm
            if coeff != 0:
                x = _combine(graph, [(1, x), (-coeff, q)])
        dual_x = gram.dual(x)
        norm_x = gram.pair(dual_x, x)
        if state.exact:
            dependent = x.is_zero() or norm_x == 0
        else:
            norm_x = float(abs(norm_x))
            dependent = norm_x <= tol * max(float(abs(original)), 1.0)
        if dependent:
            if strict:
                raise GramSingularError(f"candidate {index} is dependent on the previous ones")
            continue
        if not state.exact:
            scale = 1.0 / math.sqrt(norm_x)
            x = x.scale(scale)
            dual_x = {w: c * scale for w, c in dual_x.items()}
            norm_x = 1.0
        basis.append((x, norm_x))
        duals.append(dual_x)
        found.append((x, norm_x))
    return found


def _component(label: ComponentLabel, pairs: List[Tuple[Element, Scalar]], exact: bool) -> FiltrationComponent:
    norms = tuple(n for _, n in pairs)
    orthonormal = all(n == 1 for n in norms) if exact else True
    logger.info(f"Built {label} with dimension {len(pairs)}")
    return FiltrationComponent(label, tuple(e for e, _ in pairs), norms, orthonormal)


def build_F(state: KmsState, k: int, basis_order: Optional[Sequence[int]] = None) -> BalancedLevel:
    """F_0 = C1; F_k spanned by the balanced words of length k"""
    if k < 0:
        raise ValueError("level must be nonnegative")
    g = state.graph
    if k == 0:
        return BalancedLevel(0, (), (unit(g),))
    words = balanced_words(g, k)
    if basis_order is not None:
        if sorted(basis_order) != list(range(len(words))):
            raise ValueError(f"basis_order must be a permutation of 0..{len(words) - 1}")
        words = tuple(words[i] for i in basis_order)
    return BalancedLevel(k, words, tuple(Element.from_word(g, w) for w in words))


def build_W(state: KmsState, k: int, basis_order: Optional[Sequence[int]] = None) -> FiltrationComponent:
    """
    W_k = F_k minus F_{k-1} (orthogonal complement under the KMS inner product).

    F_{k-1} is embedded into F_k through the expansion S_mu S_nu^* = sum_e S_{mu e} S_{nu e}^*.
    """
    label = ComponentLabel("W", k)
    level = build_F(state, k, basis_order)
    if k == 0:
        return _component(label, _orthogonalize(state, level.elements, strict=True), state.exact)

    previous = build_F(state, k - 1)
    embedded = [normal_form(e, k) for e in previous.elements]
    lower = _orthogonalize(state, embedded, strict=True)
    complement = _orthogonalize(state, level.elements, basis=lower)

    expected = level.dimension - previous.dimension
    if len(complement) != expected:
        raise GramSingularError(f"{label} has dimension {len(complement)}, expected {expected}")
    return _component(label, complement, state.exact)


def build_V(
    state: KmsState,
    which: int,
    k: int,
    r: int,
    w_component: Optional[FiltrationComponent] = None,
) -> FiltrationComponent:
    """V1(k,r) = Sp{S_mu x}, V2(k,r) = Sp{x S_mu^*} for |mu| = r and x in W_k (Cuntz graph only)"""
    g = state.graph
    if not is_cuntz(g):
        raise CuntzContextError("V components are defined for the Cuntz graph")
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    if r < 1:
        raise ValueError("r must be positive (r = 0 overlaps W_k)")
    w_component = w_component or build_W(state, k)

    candidates = []
    for mu in paths_of_length(g, r):
        for x in w_component.spanning_set:
            if which == 1:
                candidates.append(multiply(path_element(g, mu), x))
            else:
                candidates.append(multiply(x, path_star(g, mu)))
    label = ComponentLabel(f"V{which}", k, r)
    return _component(label, _orthogonalize(state, candidates, strict=True), state.exact)


def filtration_labels(is_cuntz_graph: bool, max_k: int, max_r: int) -> List[ComponentLabel]:
    """W(0..K), then V1 and V2 with 1 <= r <= R and k + r <= max(K, R), in label order"""
    labels = [ComponentLabel("W", k) for k in range(max_k + 1)]
    if is_cuntz_graph:
        bound = max(max_k, max_r)
        for kind in ("V1", "V2"):
            for k in range(max_k + 1):
                for r in range(1, max_r + 1):
                    if k + r <= bound:
                        labels.append(ComponentLabel(kind, k, r))
    return sorted(labels, key=ComponentLabel.sort_key)


def build_filtration(state: KmsState, max_k: Optional[int] = None, max_r: Optional[int] = None) -> List[FiltrationComponent]:
    settings = get_settings()
    max_k = settings.max_k if max_k is None else max_k
    max_r = settings.max_r if max_r is None else max_r
    if max_k < 0 or max_r < 0:
        raise ValueError("truncation parameters must be nonnegative")

    cuntz = is_cuntz(state.graph)
    if not cuntz and max_r > 0:
        logger.warning("V components are only built on the Cuntz graph; returning W levels only")

    w_levels: Dict[int, FiltrationComponent] = {}
    components = []
    for label in filtration_labels(cuntz, max_k, max_r):
        if label.kind == "W":
            w_levels[label.k] = build_W(state, label.k)
            components.append(w_levels[label.k])
        else:
            which = 1 if label.kind == "V1" else 2
            components.append(build_V(state, which, label.k, label.r, w_levels[label.k]))
    return components


def _max_abs(values: Iterable[Scalar], exact: bool) -> Scalar:
    worst = max((abs(v) for v in values), default=Fraction(0))
    return worst if exact else float(worst)


def _cross_block(state: KmsState, a: FiltrationComponent, b: FiltrationComponent) -> List[List[Scalar]]:
    gram = _WordGram(state, _support(a.spanning_set), _support(b.spanning_set))
    duals = [gram.dual(x) for x in a.spanning_set]
    return [[gram.pair(d, y) for y in b.spanning_set] for d in duals]


def _pair_check(state: KmsState, a: FiltrationComponent, b: FiltrationComponent, internal: bool, tol: float) -> PairCheck:
    block = _cross_block(state, a, b)
    if internal:
        values = [block[i][j] for i in range(len(block)) for j in range(len(block)) if i != j]
    else:
        values = [x for row in block for x in row]
    worst = _max_abs(values, state.exact)
    passed = worst == 0 if state.exact else worst <= tol
    return PairCheck(a.label, b.label, worst, passed)


def verify_orthogonality(
    state: KmsState,
    components: Sequence[FiltrationComponent],
    tol: Optional[float] = None,
    n_jobs: Optional[int] = None,
) -> OrthogonalityReport:
    """Cross inner products between every pair of components, plus off-diagonal entries inside each one"""
    settings = get_settings()
    tol = settings.tolerance if tol is None else tol
    n_jobs = settings.n_jobs if n_jobs is None else n_jobs

    tasks = [(components[i], components[j], i == j) for i in range(len(components)) for j in range(i, len(components))]
    if n_jobs == 1:
        pairs = [_pair_check(state, a, b, internal, tol) for a, b, internal in tasks]
    else:
        pairs = list(Parallel(n_jobs=n_jobs)(delayed(_pair_check)(state, a, b, internal, tol) for a, b, internal in tasks))

    failed = [p for p in pairs if not p.passed]
    for p in failed:
        logger.warning(f"Orthogonality fails between {p.first} and {p.second}: {format_scalar(p.max_abs_inner)}")
    worst = _max_abs([p.max_abs_inner for p in pairs], state.exact)
    return OrthogonalityReport(pairs=pairs, passed=not failed, max_abs_inner=worst)


def bidegree_lemma_applies(r: int, s: int, r2: int, s2: int) -> bool:
    return r + s2 != r2 + s


def check_bidegree_orthogonality(
    state: KmsState,
    r: int,
    s: int,
    r2: int,
    s2: int,
    max_enum: Optional[int] = None,
    tol: Optional[float] = None,
) -> bool:
    """
    Words of B_{r,s} and B_{r2,s2} are orthogonal when r + s2 != r2 + s.
    Returns True without checking when that hypothesis fails.
    """
    if not is_cuntz(state.graph):
        raise CuntzContextError("the bidegree orthogonality check runs on the Cuntz graph")
    max_enum = get_settings().max_k if max_enum is None else max_enum
    if max(r, s, r2, s2) > max_enum:
        raise ValueError(f"lengths exceed the enumeration cap {max_enum}")
    if not bidegree_lemma_applies(r, s, r2, s2):
        logger.info(f"B({r},{s}) vs B({r2},{s2}): hypothesis not met, check skipped")
        return True

    tol = get_settings().tolerance if tol is None else tol
    g = state.graph
    for a in words_of_bidegree(g, r, s):
        for b in words_of_bidegree(g, r2, s2):
            value = word_inner(state, a, b)
            if (value != 0) if state.exact else (abs(value) > tol):
                logger.warning(f"B({r},{s}) vs B({r2},{s2}) not orthogonal at {render_word(g, a)}, {render_word(g, b)}")
                return False
    return True


def required_labels(w: Word) -> List[ComponentLabel]:
    """Components whose direct sum contains S_mu S_nu^*"""
    d = w.degree
    k_max = w.min_length
    if d == 0:
        return [ComponentLabel("W", k) for k in range(k_max + 1)]
    kind = "V1" if d > 0 else "V2"
    return [ComponentLabel(kind, k, abs(d)) for k in range(k_max + 1)]


def _project(state: KmsState, x: Element, components: Sequence[FiltrationComponent]):
    coefficients: Dict[ComponentLabel, List[Scalar]] = {}
    pieces = [(1, x)]
    for comp in components:
        values = []
        for q, norm in zip(comp.spanning_set, comp.norms_squared):
            c = inner_product(state, q, x) / norm
            values.append(c)
            if c != 0:
                pieces.append((-c, q))
        coefficients[comp.label] = values
    residual = _combine(state.graph, pieces)
    return coefficients, residual, inner_product(state, residual, residual)


def decompose_word(
    state: KmsState,
    w: Word,
    components: Sequence[FiltrationComponent],
    tol: Optional[float] = None,
) -> Decomposition:
    """Orthogonal projection of a word onto the direct sum of the components of its degree"""
    present = {c.label for c in components}
    missing = [label for label in required_labels(w) if label not in present]
    if missing:
        raise InsufficientCoverageError(
            f"{render_word(state.graph, w)} needs components {', '.join(str(m) for m in missing)}"
        )
    same_degree = [c for c in components if c.label.degree == w.degree]
    coefficients, _, norm_sq = _project(state, Element.from_word(state.graph, w), same_degree)
    return Decomposition(
        word=w,
        coefficients=coefficients,
        residual_norm_squared=norm_sq,
        residual_norm=math.sqrt(max(float(abs(norm_sq)), 0.0)),
    )


def verify_density(
    state: KmsState,
    components: Sequence[FiltrationComponent],
    level: int,
    tol: Optional[float] = None,
) -> DensityReport:
    """Every word with max(|mu|, |nu|) <= level must decompose with zero residual"""
    tol = get_settings().tolerance if tol is None else tol
    g = state.graph
    failures = []
    worst = 0.0
    words = words_up_to(g, level)
    for w in words:
        result = decompose_word(state, w, components, tol)
        worst = max(worst, result.residual_norm)
        ok = result.residual_norm_squared == 0 if state.exact else result.residual_norm <= tol
        if not ok:
            failures.append(render_word(g, w))
    if failures:
        logger.warning(f"Span density fails for {len(failures)} words at level {level}")
    return DensityReport(level, len(words), worst, failures, not failures)


def same_subspace(state: KmsState, a: FiltrationComponent, b: FiltrationComponent, tol: Optional[float] = None) -> bool:
    """Equal dimension, and every spanning element of each lies in the span of the other"""
    tol = get_settings().tolerance if tol is None else tol
    if a.dimension != b.dimension:
        return False
    for first, second in ((a, b), (b, a)):
        for x in first.spanning_set:
            _, _, norm_sq = _project(state, x, [second])
            if (norm_sq != 0) if state.exact else (abs(norm_sq) > tol):
                return False
    return True
