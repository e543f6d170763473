"""
Star Algebra - exact word calculus for the dense *-subalgebra Sp{S_mu S_nu^*: t(mu) = t(nu)}
Multiplication, adjoint, level expansion, normal forms, gauge grading and the expression grammar
"""

import logging
import numbers
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from types import MappingProxyType
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pyparsing as pp

from config import get_settings
from graph_model import Graph, GraphHasSinkError

logger = logging.getLogger(__name__)

Scalar = Union[Fraction, float, complex]


class MixedGraphError(ValueError):
    """Operands live over different graphs."""


class NormalFormLevelError(ValueError):
    """Requested normal-form level is below a term's shorter path length."""


class ExpressionSyntaxError(ValueError):
    def __init__(self, message: str, column: int):
        self.column = column
        super().__init__(f"column {column}: {message}")


class ExpressionVocabularyError(ValueError):
    """Expression names an edge or vertex the graph does not have."""


@dataclass(frozen=True)
class Path:
    source: int
    edges: Tuple[int, ...]
    target: int

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class Word:
    """The monomial S_mu S_nu^*; both paths end at the same vertex"""

    mu: Path
    nu: Path

    @property
    def degree(self) -> int:
        return len(self.mu.edges) - len(self.nu.edges)

    @property
    def min_length(self) -> int:
        return min(len(self.mu.edges), len(self.nu.edges))

    def adjoint(self) -> "Word":
        return Word(self.nu, self.mu)

    def sort_key(self) -> tuple:
        return (len(self.mu.edges), len(self.nu.edges), self.mu.edges, self.nu.edges, self.mu.source, self.nu.source)


def empty_path(vertex: int) -> Path:
    return Path(vertex, (), vertex)


def make_path(g: Graph, edges: Sequence[int], anchor: Optional[int] = None) -> Optional[Path]:
    """Path through the given edge indices, or None when the edges do not compose"""
    edges = tuple(edges)
    if not edges:
        if anchor is None:
            raise ValueError("an empty path needs an anchor vertex")
        return empty_path(anchor)
    if anchor is not None and anchor != g.source(edges[0]):
        return None
    for a, b in zip(edges, edges[1:]):
        if g.target(a) != g.source(b):
            return None
    return Path(g.source(edges[0]), edges, g.target(edges[-1]))


def extend(g: Graph, p: Path, edge: int) -> Path:
    return Path(p.source, p.edges + (edge,), g.target(edge))


def make_word(mu: Optional[Path], nu: Optional[Path]) -> Optional[Word]:
    if mu is None or nu is None or mu.target != nu.target:
        return None
    return Word(mu, nu)


def word_product(a: Word, b: Word) -> Optional[Word]:
    """
    (S_mu S_nu^*)(S_delta S_gamma^*) is a single word or zero:
    delta = nu.delta' gives S_{mu delta'} S_gamma^*, nu = delta.nu' gives S_mu S_{gamma nu'}^*.
    """
    nu, delta = a.nu, b.mu
    if nu.source != delta.source:
        return None
    ln, ld = len(nu.edges), len(delta.edges)
    if ld >= ln:
        if delta.edges[:ln] != nu.edges:
            return None
        rest = delta.edges[ln:]
        if not rest:
            return Word(a.mu, b.nu)
        return Word(Path(a.mu.source, a.mu.edges + rest, delta.target), b.nu)
    if nu.edges[:ld] != delta.edges:
        return None
    rest = nu.edges[ld:]
    return Word(a.mu, Path(b.nu.source, b.nu.edges + rest, nu.target))


def _coerce(c) -> Scalar:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, numbers.Integral):
        return Fraction(int(c))
    if isinstance(c, numbers.Rational):
        return Fraction(c.numerator, c.denominator)
    if isinstance(c, numbers.Real):
        return float(c)
    if isinstance(c, numbers.Complex):
        return complex(c)
    raise TypeError(f"unsupported coefficient {c!r}")


class Element:
    """Finite linear combination of words over one graph; immutable"""

    __slots__ = ("graph", "_terms")

    def __init__(self, graph: Graph, terms: Optional[Mapping[Word, Scalar]] = None):
        self.graph = graph
        self._terms: Dict[Word, Scalar] = {}
        for word, c in (terms or {}).items():
            c = _coerce(c)
            if c != 0:
                self._terms[word] = c

    @classmethod
    def zero(cls, graph: Graph) -> "Element":
        return cls(graph)

    @classmethod
    def from_word(cls, graph: Graph, word: Optional[Word], coeff: Scalar = 1) -> "Element":
        if word is None:
            return cls(graph)
        return cls(graph, {word: coeff})

    @property
    def terms(self) -> Mapping[Word, Scalar]:
        return MappingProxyType(self._terms)

    def items(self) -> List[Tuple[Word, Scalar]]:
        """Terms in canonical order"""
        return sorted(self._terms.items(), key=lambda item: item[0].sort_key())

    def words(self) -> List[Word]:
        return [w for w, _ in self.items()]

    def is_zero(self) -> bool:
        return not self._terms

    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self._terms.values())

    def coefficient(self, word: Word) -> Scalar:
        return self._terms.get(word, Fraction(0))

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[Word]:
        return iter(self.words())

    def _check(self, other: "Element") -> None:
        if other.graph is not self.graph and other.graph != self.graph:
            raise MixedGraphError("operands belong to different graphs")

    def __add__(self, other: "Element") -> "Element":
        if not isinstance(other, Element):
            return NotImplemented
        self._check(other)
        acc = dict(self._terms)
        for w, c in other._terms.items():
            acc[w] = acc.get(w, 0) + c
        return Element(self.graph, acc)

    def __neg__(self) -> "Element":
        return Element(self.graph, {w: -c for w, c in self._terms.items()})

    def __sub__(self, other: "Element") -> "Element":
        if not isinstance(other, Element):
            return NotImplemented
        return self + (-other)

    def scale(self, s: Scalar) -> "Element":
        s = _coerce(s)
        return Element(self.graph, {w: s * c for w, c in self._terms.items()})

    def __mul__(self, other) -> "Element":
        if isinstance(other, Element):
            return multiply(self, other)
        if isinstance(other, numbers.Number):
            return self.scale(other)
        return NotImplemented

    def __rmul__(self, other) -> "Element":
        if isinstance(other, numbers.Number):
            return self.scale(other)
        return NotImplemented

    def adjoint(self) -> "Element":
        return adjoint(self)

    def __eq__(self, other) -> bool:
        """Structural equality (same stored terms); see equals() for equality in C*(graph)"""
        if not isinstance(other, Element):
            return NotImplemented
        return (other.graph is self.graph or other.graph == self.graph) and self._terms == other._terms

    __hash__ = None

    def __repr__(self) -> str:
        return f"Element({render_element(self)})"


# Constructors


def unit(g: Graph) -> Element:
    """1 = sum of the vertex projections"""
    return Element(g, {Word(empty_path(v), empty_path(v)): 1 for v in range(g.m)})


def vertex_projection(g: Graph, vertex: Union[int, str]) -> Element:
    v = g.vertex_index(vertex) if isinstance(vertex, str) else vertex
    return Element(g, {Word(empty_path(v), empty_path(v)): 1})


def _edge_idx(g: Graph, edge: Union[int, str]) -> int:
    return g.edge_index(edge) if isinstance(edge, str) else edge


def edge_element(g: Graph, edge: Union[int, str]) -> Element:
    """S_e"""
    e = _edge_idx(g, edge)
    return Element(g, {Word(Path(g.source(e), (e,), g.target(e)), empty_path(g.target(e))): 1})


def edge_star(g: Graph, edge: Union[int, str]) -> Element:
    """S_e^*"""
    return adjoint(edge_element(g, edge))


def path_element(g: Graph, p: Path) -> Element:
    """S_mu for a path mu"""
    return Element(g, {Word(p, empty_path(p.target)): 1})


def path_star(g: Graph, p: Path) -> Element:
    return Element(g, {Word(empty_path(p.target), p): 1})


def monomial(
    g: Graph,
    mu_edges: Sequence[Union[int, str]],
    nu_edges: Sequence[Union[int, str]],
    coeff: Scalar = 1,
    anchor: Optional[Union[int, str]] = None,
) -> Element:
    """coeff * S_mu S_nu^*; the zero element when the monomial vanishes"""
    mu_idx = [_edge_idx(g, e) for e in mu_edges]
    nu_idx = [_edge_idx(g, e) for e in nu_edges]
    if isinstance(anchor, str):
        anchor = g.vertex_index(anchor)
    mu = make_path(g, mu_idx) if mu_idx else None
    nu = make_path(g, nu_idx) if nu_idx else None
    if (mu_idx and mu is None) or (nu_idx and nu is None):
        return Element.zero(g)
    if anchor is None:
        if mu is None and nu is None:
            raise ValueError("p_v needs an anchor vertex")
        anchor = mu.target if mu is not None else nu.target
    # an empty side is the projection onto the anchor vertex
    if mu is None:
        mu = empty_path(anchor)
    if nu is None:
        nu = empty_path(anchor)
    return Element.from_word(g, make_word(mu, nu), coeff)


# Enumeration


@lru_cache(maxsize=None)
def paths_of_length(g: Graph, k: int) -> Tuple[Path, ...]:
    """All paths with k edges in lexicographic order of edge indices; k = 0 gives the empty paths"""
    if k < 0:
        raise ValueError("path length must be nonnegative")
    if k == 0:
        return tuple(empty_path(v) for v in range(g.m))
    if k == 1:
        return tuple(Path(e.source, (i,), e.target) for i, e in enumerate(g.edges))
    return tuple(extend(g, p, e) for p in paths_of_length(g, k - 1) for e in g.out_edges[p.target])


@lru_cache(maxsize=None)
def words_of_bidegree(g: Graph, r: int, s: int) -> Tuple[Word, ...]:
    """Basis words of B_{r,s}: |mu| = r, |nu| = s, t(mu) = t(nu)"""
    return tuple(
        Word(mu, nu) for mu in paths_of_length(g, r) for nu in paths_of_length(g, s) if mu.target == nu.target
    )


def balanced_words(g: Graph, k: int) -> Tuple[Word, ...]:
    return words_of_bidegree(g, k, k)


def words_up_to(g: Graph, max_len: int) -> List[Word]:
    """Every word with |mu|, |nu| <= max_len, canonically ordered"""
    words = [w for r in range(max_len + 1) for s in range(max_len + 1) for w in words_of_bidegree(g, r, s)]
    return sorted(words, key=Word.sort_key)


# Algebra operations


def multiply_words(g: Graph, a: Word, b: Word) -> Element:
    return Element.from_word(g, word_product(a, b))


def multiply(a: Element, b: Element) -> Element:
    a._check(b)
    acc: Dict[Word, Scalar] = defaultdict(int)
    for wa, ca in a._terms.items():
        for wb, cb in b._terms.items():
            w = word_product(wa, wb)
            if w is not None:
                acc[w] += ca * cb
    return Element(a.graph, acc)


def adjoint(a: Element) -> Element:
    return Element(a.graph, {w.adjoint(): c.conjugate() for w, c in a._terms.items()})


def _expand_word(g: Graph, w: Word) -> List[Word]:
    out = g.out_edges[w.mu.target]
    if not out:
        raise GraphHasSinkError([g.vertices[w.mu.target]])
    return [Word(extend(g, w.mu, e), extend(g, w.nu, e)) for e in out]


def expand_once(g: Graph, w: Word) -> Element:
    """S_mu S_nu^* = sum over edges e leaving t(mu) of S_{mu e} S_{nu e}^*"""
    return Element(g, {ww: 1 for ww in _expand_word(g, w)})


def normal_form(a: Element, level: int) -> Element:
    """Expand every term until its shorter side has exactly `level` edges, merging equal words"""
    lowest = max((w.min_length for w in a._terms), default=0)
    if level < lowest:
        raise NormalFormLevelError(f"level {level} is below the shortest side length {lowest} of some term")
    acc: Dict[Word, Scalar] = defaultdict(int)
    for w, c in a._terms.items():
        frontier = [w]
        for _ in range(level - w.min_length):
            frontier = [ww for f in frontier for ww in _expand_word(a.graph, f)]
        for ww in frontier:
            acc[ww] += c
    return Element(a.graph, acc)


def equals(a: Element, b: Element, tol: Optional[float] = None) -> bool:
    """Equality in C*(graph): the difference vanishes once brought to a common level"""
    a._check(b)
    difference = a - b
    if difference.is_zero():
        return True
    level = max(w.min_length for w in difference._terms)
    reduced = normal_form(difference, level)
    if reduced.is_exact():
        return reduced.is_zero()
    tol = get_settings().tolerance if tol is None else tol
    return reduced.max_abs_coefficient() <= tol


def degree_decompose(a: Element) -> Dict[int, Element]:
    """Homogeneous components for the gauge grading |mu| - |nu|"""
    parts: Dict[int, Dict[Word, Scalar]] = defaultdict(dict)
    for w, c in a._terms.items():
        parts[w.degree][w] = c
    return {d: Element(a.graph, parts[d]) for d in sorted(parts)}


def gauge_action(a: Element, z: Scalar) -> Element:
    """gamma_z: scales each word by z^(|mu| - |nu|)"""
    z = _coerce(z)
    return Element(a.graph, {w: c * z ** w.degree for w, c in a._terms.items()})


def unitary_action(a: Element, u) -> Element:
    """
    Linear action S_i -> sum_j u[j, i] S_j of a unitary matrix on the one-vertex graph,
    extended multiplicatively and through the adjoint.
    """
    g = a.graph
    if g.m != 1:
        raise ValueError("the linear unitary action is defined on the one-vertex (Cuntz) graph only")
    u = np.asarray(u)
    if u.shape != (g.n, g.n):
        raise ValueError(f"unitary must be {g.n}x{g.n}")
    images = [
        Element(g, {Word(Path(0, (j,), 0), empty_path(0)): complex(u[j, i]) for j in range(g.n)})
        for i in range(g.n)
    ]

    def image(p: Path) -> Element:
        result = unit(g)
        for e in p.edges:
            result = multiply(result, images[e])
        return result

    total = Element.zero(g)
    for w, c in a._terms.items():
        total = total + multiply(image(w.mu), adjoint(image(w.nu))).scale(c)
    return total


# Rendering and parsing


def render_word(g: Graph, w: Word) -> str:
    if not w.mu.edges and not w.nu.edges:
        return f"p[{g.vertices[w.mu.source]}]"
    text = ""
    if w.mu.edges:
        text += "S[" + ".".join(g.edges[e].id for e in w.mu.edges) + "]"
    if w.nu.edges:
        text += "S*[" + ".".join(g.edges[e].id for e in w.nu.edges) + "]"
    return text


def _render_coefficient(c: Scalar) -> Tuple[str, str]:
    """Sign and magnitude text (empty magnitude for 1)"""
    if isinstance(c, complex):
        return "+", f"({c.real:.12g}{c.imag:+.12g}j)*"
    sign = "-" if c < 0 else "+"
    magnitude = abs(c)
    if magnitude == 1:
        return sign, ""
    if isinstance(magnitude, Fraction):
        return sign, f"{magnitude}*"
    return sign, f"{magnitude:.12g}*"


def render_element(a: Element) -> str:
    if a.is_zero():
        return "0"
    pieces = []
    for i, (w, c) in enumerate(a.items()):
        sign, magnitude = _render_coefficient(c)
        body = magnitude + render_word(a.graph, w)
        if i == 0:
            pieces.append(body if sign == "+" else "-" + body)
        else:
            pieces.append(f" {sign} {body}")
    return "".join(pieces)


@dataclass(frozen=True)
class _Factor:
    kind: str
    ids: Tuple[str, ...]


@dataclass(frozen=True)
class _Term:
    coeff: Fraction
    factors: Tuple[_Factor, ...]


def _coefficient_action(s, loc, tokens):
    text = tokens[0]
    if "/" in text and int(text.split("/")[1]) == 0:
        raise pp.ParseFatalException(s, loc, "zero denominator")
    return Fraction(text)


def _build_grammar() -> pp.ParserElement:
    ident = pp.Regex(r"[^.\[\]\s]+")
    ids = ident + pp.ZeroOrMore(pp.Suppress(".") + ident)

    def factor(opening: str, kind: str, body: pp.ParserElement) -> pp.ParserElement:
        expr = pp.Suppress(pp.Literal(opening)) + body + pp.Suppress("]")
        return expr.set_parse_action(lambda t: _Factor(kind, tuple(t)))

    word = factor("S*[", "S*", ids) | factor("S[", "S", ids) | factor("p[", "p", ident)
    coeff = pp.Regex(r"\d+(/\d+)?").set_parse_action(_coefficient_action)
    term = (pp.Optional(coeff + pp.Suppress("*")) + pp.OneOrMore(word)).set_parse_action(
        lambda t: _Term(t[0] if isinstance(t[0], Fraction) else Fraction(1), tuple(x for x in t if isinstance(x, _Factor)))
    )
    sign = pp.one_of("+ -")
    return pp.Optional(sign) + term + pp.ZeroOrMore(sign + term)


_GRAMMAR = _build_grammar()


def _factor_element(g: Graph, factor: _Factor) -> Element:
    if factor.kind == "p":
        try:
            return vertex_projection(g, factor.ids[0])
        except KeyError:
            raise ExpressionVocabularyError(f"unknown vertex {factor.ids[0]!r}") from None
    try:
        edges = [g.edge_index(e) for e in factor.ids]
    except KeyError as e:
        raise ExpressionVocabularyError(str(e.args[0])) from None
    p = make_path(g, edges)
    if p is None:
        return Element.zero(g)
    return path_element(g, p) if factor.kind == "S" else path_star(g, p)


def parse_element(g: Graph, text: str) -> Element:
    """
    Parse an expression such as "2*S[e1.e2]S*[e3] - 1/2*p[v1]".

    Raises:
        ExpressionSyntaxError: with the 1-based column of the failure
        ExpressionVocabularyError: for unknown edge or vertex ids
    """
    try:
        tokens = _GRAMMAR.parse_string(text, parse_all=True)
    except pp.ParseBaseException as e:
        raise ExpressionSyntaxError(e.msg, e.col) from None

    total = Element.zero(g)
    sign = 1
    for token in tokens:
        if token in ("+", "-"):
            sign = -1 if token == "-" else 1
            continue
        value = unit(g)
        for factor in token.factors:
            value = multiply(value, _factor_element(g, factor))
        total = total + value.scale(sign * token.coeff)
        sign = 1
    logger.info(f"Parsed expression into {len(total)} terms")
    return total
