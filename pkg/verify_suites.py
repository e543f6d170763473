"""
Verification Suites - exhaustive and sampled property checks behind the verify command
Algebra identities, KMS/gauge properties of the critical state, and the Cuntz orthogonality lemmas
"""

import cmath
import math
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Tuple

import numpy as np
from scipy.stats import unitary_group

from config import get_settings
from graph_model import is_cuntz, vertex_matrix
from kms_functional import (
    KmsState,
    NotRowRegularError,
    ProportionalityError,
    TauFunctional,
    check_gauge_invariance,
    check_kms_condition,
    check_plug_lemma,
    check_unitary_invariance,
    compare_phi_tau,
    format_scalar,
    gram_eigenvalues,
    is_positive_definite,
    phi,
    phi_word,
)
from filtration import bidegree_lemma_applies, check_bidegree_orthogonality
from spectral_kms import check_subinvariance, factors_through_graph_algebra, is_row_regular
from star_algebra import (
    Element,
    Word,
    adjoint,
    balanced_words,
    edge_element,
    edge_star,
    equals,
    expand_once,
    multiply,
    normal_form,
    paths_of_length,
    render_word,
    unit,
    vertex_projection,
    word_product,
    words_up_to,
)

logger = logging.getLogger(__name__)

SUITES = ("algebra", "kms", "lemmas")
PASS, FAIL, SKIP = "pass", "fail", "skip"


@dataclass
class CheckResult:
    suite: str
    name: str
    status: str
    cases: int
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != FAIL


def _exhaust(suite: str, name: str, cases: Iterable, predicate: Callable, describe: Callable) -> CheckResult:
    count = 0
    for case in cases:
        count += 1
        if not predicate(case):
            return CheckResult(suite, name, FAIL, count, f"fails at {describe(case)}")
    return CheckResult(suite, name, PASS, count)


def _sample_indices(size: int, count: int, arity: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, size, size=(count, arity))


class _Context:
    """Words, settings and helpers shared by the checks of one verify run"""

    def __init__(self, state: KmsState, max_len: int, tol: float, samples: int, seed: int):
        self.state = state
        self.graph = state.graph
        self.max_len = max_len
        self.tol = tol
        self.samples = samples
        self.seed = seed
        self.words = words_up_to(self.graph, max_len)

    def element(self, w: Word) -> Element:
        return Element.from_word(self.graph, w)

    def show(self, *words: Word) -> str:
        return ", ".join(render_word(self.graph, w) for w in words)

    def sampled(self, arity: int) -> List[Tuple[Word, ...]]:
        idx = _sample_indices(len(self.words), self.samples, arity, self.seed)
        return [tuple(self.words[i] for i in row) for row in idx]

    def close(self, x, y) -> bool:
        if self.state.exact and not isinstance(x, complex) and not isinstance(y, complex):
            return x == y
        return abs(x - y) <= self.tol


# Algebra suite


def _algebra_checks(ctx: _Context) -> List[Callable[[], CheckResult]]:
    g, el = ctx.graph, ctx.element
    one = unit(g)

    def involution():
        return _exhaust("algebra", "involution", ctx.words, lambda w: adjoint(adjoint(el(w))) == el(w), ctx.show)

    def unit_identity():
        return _exhaust(
            "algebra",
            "unit identity",
            ctx.words,
            lambda w: equals(multiply(one, el(w)), el(w)) and equals(multiply(el(w), one), el(w)),
            ctx.show,
        )

    def adjoint_of_product():
        return _exhaust(
            "algebra",
            "adjoint of product",
            ctx.sampled(2),
            lambda p: equals(adjoint(multiply(el(p[0]), el(p[1]))), multiply(adjoint(el(p[1])), adjoint(el(p[0])))),
            lambda p: ctx.show(*p),
        )

    def associativity():
        return _exhaust(
            "algebra",
            "associativity",
            ctx.sampled(3),
            lambda t: equals(
                multiply(multiply(el(t[0]), el(t[1])), el(t[2])),
                multiply(el(t[0]), multiply(el(t[1]), el(t[2]))),
            ),
            lambda t: ctx.show(*t),
        )

    def degree_additivity():
        def holds(p):
            w = word_product(p[0], p[1])
            return w is None or w.degree == p[0].degree + p[1].degree

        return _exhaust("algebra", "degree additivity", ctx.sampled(2), holds, lambda p: ctx.show(*p))

    def matrix_units():
        def holds(p):
            a, b = p
            expected = Element.from_word(g, Word(a.mu, b.nu)) if a.nu == b.mu else Element.zero(g)
            return multiply(el(a), el(b)) == expected

        pairs = ((a, b) for k in range(ctx.max_len + 1) for a in balanced_words(g, k) for b in balanced_words(g, k))
        return _exhaust("algebra", "matrix units", pairs, holds, lambda p: ctx.show(*p))

    def expansion():
        def holds(w):
            expanded = expand_once(g, w)
            return equals(expanded, el(w)) and all(x.min_length == w.min_length + 1 for x in expanded.terms)

        return _exhaust("algebra", "expand_once", ctx.words, holds, ctx.show)

    def cuntz_krieger():
        cases = 0
        for e in range(g.n):
            cases += 1
            if multiply(edge_star(g, e), edge_element(g, e)) != vertex_projection(g, g.target(e)):
                return CheckResult("algebra", "Cuntz-Krieger relations", FAIL, cases, f"S*S at {g.edges[e].id}")
            for f in range(g.n):
                if f != e and not multiply(edge_star(g, e), edge_element(g, f)).is_zero():
                    return CheckResult("algebra", "Cuntz-Krieger relations", FAIL, cases, f"S*[{g.edges[e].id}]S[{g.edges[f].id}]")
        for v in range(g.m):
            cases += 1
            ranges = Element.zero(g)
            for e in g.out_edges[v]:
                ranges = ranges + multiply(edge_element(g, e), edge_star(g, e))
            if not equals(vertex_projection(g, v), ranges):
                return CheckResult("algebra", "Cuntz-Krieger relations", FAIL, cases, f"range sum at {g.vertices[v]}")
        return CheckResult("algebra", "Cuntz-Krieger relations", PASS, cases)

    return [involution, unit_identity, adjoint_of_product, associativity, degree_additivity, matrix_units, expansion, cuntz_krieger]


# KMS suite


def _kms_checks(ctx: _Context) -> List[Callable[[], CheckResult]]:
    g, el, state = ctx.graph, ctx.element, ctx.state

    def twisted_trace():
        pairs = ((a, b) for a in ctx.words for b in ctx.words)
        return _exhaust(
            "kms",
            "twisted trace",
            pairs,
            lambda p: check_kms_condition(state, el(p[0]), el(p[1]), ctx.tol),
            lambda p: ctx.show(*p),
        )

    def gauge_vanishing():
        unbalanced = [w for w in ctx.words if w.degree != 0]
        return _exhaust("kms", "phi vanishes off degree 0", unbalanced, lambda w: phi_word(state, w) == 0, ctx.show)

    def gauge_action():
        rng = np.random.default_rng(ctx.seed)
        angles = rng.uniform(0.0, 2 * math.pi, size=len(ctx.words))
        cases = list(zip(ctx.words, angles))
        return _exhaust(
            "kms",
            "gauge invariance",
            cases,
            lambda c: check_gauge_invariance(state, el(c[0]), cmath.exp(1j * c[1]), ctx.tol),
            lambda c: ctx.show(c[0]),
        )

    def gram_psd():
        values = gram_eigenvalues(state, [el(w) for w in ctx.words])
        smallest = float(values.min()) if values.size else 0.0
        status = PASS if smallest >= -ctx.tol else FAIL
        return CheckResult("kms", "Gram positive semidefinite", status, len(ctx.words), f"min eigenvalue {smallest:.3e}")

    def balanced_definite():
        levels = list(range(ctx.max_len + 1))
        return _exhaust(
            "kms",
            "balanced Gram positive definite",
            levels,
            lambda k: is_positive_definite(state, [el(w) for w in balanced_words(g, k)], ctx.tol),
            lambda k: f"level {k}",
        )

    def positivity():
        rng = np.random.default_rng(ctx.seed + 1)

        def random_element(row):
            coeffs = rng.integers(-3, 4, size=len(row))
            total = Element.zero(g)
            for w, c in zip(row, coeffs):
                total = total + el(w).scale(int(c))
            return total

        def nonnegative(a):
            value = phi(state, multiply(adjoint(a), a))
            return value >= 0 if state.exact else value.real >= -ctx.tol

        elements = [random_element(row) for row in ctx.sampled(3)]
        return _exhaust("kms", "phi(a* a) >= 0", elements, nonnegative, repr)

    def normal_form_compatibility():
        cases = ((w, level) for w in ctx.words for level in range(w.min_length, ctx.max_len + 1))
        return _exhaust(
            "kms",
            "phi through normal_form",
            cases,
            lambda c: ctx.close(phi(state, normal_form(el(c[0]), c[1])), phi_word(state, c[0])),
            lambda c: f"{ctx.show(c[0])} at level {c[1]}",
        )

    def subinvariance():
        D = vertex_matrix(g)
        beta = math.log(float(state.rho))
        ok = check_subinvariance(D, state.weights, beta, ctx.tol) and factors_through_graph_algebra(D, state.weights, beta, ctx.tol)
        return CheckResult("kms", "subinvariance equality", PASS if ok else FAIL, 1)

    def phi_tau():
        if not is_row_regular(vertex_matrix(g)):
            return CheckResult("kms", "phi proportional to tau", SKIP, 0, "graph is not row-regular")
        try:
            c = compare_phi_tau(state, TauFunctional(g), ctx.tol)
        except (NotRowRegularError, ProportionalityError) as e:
            return CheckResult("kms", "phi proportional to tau", FAIL, 1, str(e))
        return CheckResult("kms", "phi proportional to tau", PASS, len(g.edges) ** 2, f"c = {format_scalar(c)}")

    def unitary_invariance():
        if not is_cuntz(g) or g.n < 2:
            return CheckResult("kms", "unitary invariance", SKIP, 0, "needs the Cuntz graph with at least two edges")
        u = unitary_group.rvs(g.n, random_state=ctx.seed)
        short = [w for w in ctx.words if len(w.mu.edges) + len(w.nu.edges) <= 4]
        return _exhaust(
            "kms",
            "unitary invariance",
            short,
            lambda w: check_unitary_invariance(state, u, el(w), ctx.tol),
            ctx.show,
        )

    return [
        twisted_trace,
        gauge_vanishing,
        gauge_action,
        gram_psd,
        balanced_definite,
        positivity,
        normal_form_compatibility,
        subinvariance,
        phi_tau,
        unitary_invariance,
    ]


# Lemmas suite (Cuntz graph only)


def _lemma_checks(ctx: _Context) -> List[Callable[[], CheckResult]]:
    g, el, state = ctx.graph, ctx.element, ctx.state
    if not is_cuntz(g):
        logger.warning("Lemma suite needs the Cuntz graph; skipping")
        return [
            lambda: CheckResult("lemmas", "plug identity", SKIP, 0, "Cuntz graph only"),
            lambda: CheckResult("lemmas", "bidegree orthogonality", SKIP, 0, "Cuntz graph only"),
        ]

    def plug():
        cases = (
            (mu, nu, w)
            for k in range(ctx.max_len + 1)
            for mu in paths_of_length(g, k)
            for nu in paths_of_length(g, k)
            for w in ctx.words
        )
        return _exhaust(
            "lemmas",
            "plug identity",
            cases,
            lambda c: check_plug_lemma(state, c[0], c[1], el(c[2]), ctx.tol),
            lambda c: f"mu={c[0].edges}, nu={c[1].edges}, a={ctx.show(c[2])}",
        )

    def bidegree():
        rng = range(ctx.max_len + 1)
        combos = [(r, s, r2, s2) for r in rng for s in rng for r2 in rng for s2 in rng]
        applied = sum(1 for c in combos if bidegree_lemma_applies(*c))
        result = _exhaust(
            "lemmas",
            "bidegree orthogonality",
            combos,
            lambda c: check_bidegree_orthogonality(state, *c, max_enum=ctx.max_len, tol=ctx.tol),
            lambda c: "B({},{}) vs B({},{})".format(*c),
        )
        if result.status == PASS:
            result.detail = f"{applied} applicable, {len(combos) - applied} skipped"
        return result

    return [plug, bidegree]


_SUITE_BUILDERS = {"algebra": _algebra_checks, "kms": _kms_checks, "lemmas": _lemma_checks}


def run_verification(
    state: KmsState,
    suite: str = "all",
    max_len: int = 3,
    tol: Optional[float] = None,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
) -> List[CheckResult]:
    """
    Run one suite (or all) against a critical KMS state.

    Args:
        suite: "algebra", "kms", "lemmas" or "all"
        max_len: longest path length enumerated by the exhaustive checks
        samples: number of random word tuples for the sampled identities

    Returns:
        One CheckResult per check, in a fixed order
    """
    settings = get_settings()
    tol = settings.tolerance if tol is None else tol
    samples = settings.verify_samples if samples is None else samples
    seed = settings.random_seed if seed is None else seed
    if suite != "all" and suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}")
    if max_len < 0:
        raise ValueError("max_len must be nonnegative")

    ctx = _Context(state, max_len, tol, samples, seed)
    names = SUITES if suite == "all" else (suite,)
    results = []
    for name in names:
        logger.info(f"Running {name} suite up to length {max_len}")
        for check in _SUITE_BUILDERS[name](ctx):
            try:
                result = check()
            except Exception as e:
                logger.error(f"Check {check.__name__} in {name} raised: {e}")
                result = CheckResult(name, check.__name__, FAIL, 0, f"raised {type(e).__name__}: {e}")
            results.append(result)
    return results


def all_passed(results: List[CheckResult]) -> bool:
    return all(r.passed for r in results)
