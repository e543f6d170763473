from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graph_model import complete_graph, cuntz_graph
from star_algebra import (
    Element,
    ExpressionSyntaxError,
    ExpressionVocabularyError,
    MixedGraphError,
    NormalFormLevelError,
    Word,
    adjoint,
    degree_decompose,
    edge_element,
    edge_star,
    empty_path,
    equals,
    expand_once,
    gauge_action,
    monomial,
    multiply,
    multiply_words,
    normal_form,
    parse_element,
    paths_of_length,
    render_element,
    unit,
    unitary_action,
    vertex_projection,
    word_product,
    words_of_bidegree,
)

from .strategies import elements, words

LAW_GRAPHS = [cuntz_graph(2), complete_graph(2)]


def ranges_sum(g, vertex):
    total = Element.zero(g)
    for e in g.out_edges[vertex]:
        total = total + multiply(edge_element(g, e), edge_star(g, e))
    return total


class TestMultiplication:
    def test_prefix_cancellation(self, cuntz3):
        a = monomial(cuntz3, ["e1"], ["e2"])
        b = monomial(cuntz3, ["e2"], ["e3"])
        assert multiply(a, b) == monomial(cuntz3, ["e1"], ["e3"])

    def test_word_level_product(self, cuntz2):
        s1, s1_star = Word(paths_of_length(cuntz2, 1)[0], empty_path(0)), Word(empty_path(0), paths_of_length(cuntz2, 1)[0])
        assert multiply_words(cuntz2, s1_star, s1) == unit(cuntz2)
        assert multiply_words(cuntz2, s1, s1_star) == monomial(cuntz2, ["e1"], ["e1"])
        assert multiply_words(cuntz2, s1_star, Word(paths_of_length(cuntz2, 1)[1], empty_path(0))).is_zero()

    def test_longer_prefix(self, cuntz2):
        a = monomial(cuntz2, ["e1"], ["e2"])
        b = monomial(cuntz2, ["e2", "e1"], [])
        assert multiply(a, b) == monomial(cuntz2, ["e1", "e1"], [])

    def test_distinct_isometries_orthogonal(self, cuntz2):
        assert multiply(edge_star(cuntz2, "e1"), edge_element(cuntz2, "e2")).is_zero()

    def test_vertex_projections(self, complete2):
        p1, p2 = vertex_projection(complete2, "v1"), vertex_projection(complete2, "v2")
        assert multiply(p1, p2).is_zero()
        assert multiply(p1, p1) == p1

    def test_source_projection(self, complete2):
        s1 = edge_element(complete2, "e1")
        assert multiply(vertex_projection(complete2, "v1"), s1) == s1
        assert multiply(vertex_projection(complete2, "v2"), s1).is_zero()

    def test_isometry_relation(self, complete2):
        product = multiply(edge_star(complete2, "e1"), edge_element(complete2, "e1"))
        assert product == vertex_projection(complete2, "v2")

    def test_unit_is_identity(self, complete2):
        a = monomial(complete2, ["e1", "e2"], ["e1", "e2"], coeff=3)
        assert multiply(unit(complete2), a) == a
        assert multiply(a, unit(complete2)) == a

    def test_word_product_zero_on_mismatch(self, cuntz2):
        a = Word(empty_path(0), paths_of_length(cuntz2, 1)[0])
        b = Word(paths_of_length(cuntz2, 1)[1], empty_path(0))
        assert word_product(a, b) is None

    def test_mixed_graphs_rejected(self, cuntz2, cuntz3):
        with pytest.raises(MixedGraphError):
            edge_element(cuntz2, 0) + edge_element(cuntz3, 0)

    def test_scalar_multiplication(self, cuntz2):
        s1 = edge_element(cuntz2, "e1")
        assert (2 * s1).coefficient(s1.words()[0]) == Fraction(2)
        assert (s1 * Fraction(1, 2)).coefficient(s1.words()[0]) == Fraction(1, 2)


class TestConstructors:
    def test_zero_when_targets_differ(self, complete2):
        assert monomial(complete2, ["e1"], ["e2"]).is_zero()

    def test_zero_when_not_composable(self, complete2):
        assert monomial(complete2, ["e1", "e1"], []).is_zero()

    def test_projection_needs_anchor(self, cuntz2):
        with pytest.raises(ValueError):
            monomial(cuntz2, [], [])
        assert monomial(cuntz2, [], [], anchor="v") == unit(cuntz2)

    def test_path_counts(self, cuntz2, complete2):
        assert len(paths_of_length(cuntz2, 2)) == 4
        assert len(paths_of_length(complete2, 3)) == 2
        assert len(paths_of_length(complete2, 0)) == 2

    def test_bidegree_counts(self, cuntz2, complete2):
        assert len(words_of_bidegree(cuntz2, 1, 1)) == 4
        assert len(words_of_bidegree(cuntz2, 2, 1)) == 8
        assert len(words_of_bidegree(complete2, 1, 1)) == 2


class TestAdjoint:
    def test_monomial(self, cuntz2):
        assert adjoint(monomial(cuntz2, ["e1"], ["e2"])) == monomial(cuntz2, ["e2"], ["e1"])

    def test_complex_coefficients_conjugated(self, cuntz2):
        a = edge_element(cuntz2, "e1").scale(1j)
        assert adjoint(a).coefficient(edge_star(cuntz2, "e1").words()[0]) == -1j


class TestExpansion:
    def test_unit_on_cuntz(self, cuntz2):
        p = Word(empty_path(0), empty_path(0))
        expected = monomial(cuntz2, ["e1"], ["e1"]) + monomial(cuntz2, ["e2"], ["e2"])
        assert expand_once(cuntz2, p) == expected

    def test_off_diagonal_on_cuntz(self, cuntz2):
        w = monomial(cuntz2, ["e1"], ["e2"]).words()[0]
        expected = monomial(cuntz2, ["e1", "e1"], ["e2", "e1"]) + monomial(cuntz2, ["e1", "e2"], ["e2", "e2"])
        assert expand_once(cuntz2, w) == expected

    def test_single_exit(self, complete2):
        p1 = vertex_projection(complete2, "v1").words()[0]
        assert expand_once(complete2, p1) == monomial(complete2, ["e1"], ["e1"])

    def test_normal_form_examples(self, cuntz2):
        expected = monomial(cuntz2, ["e1"], ["e1"]) + monomial(cuntz2, ["e2"], ["e2"])
        assert normal_form(unit(cuntz2), 1) == expected
        s11 = monomial(cuntz2, ["e1"], ["e1"])
        assert normal_form(s11, 1) == s11

    @pytest.mark.parametrize("g", LAW_GRAPHS)
    def test_range_relation_normalizes_to_zero(self, g):
        difference = unit(g)
        for v in range(g.m):
            difference = difference - ranges_sum(g, v)
        assert normal_form(difference, 1).is_zero()

    def test_level_below_minimum(self, cuntz2):
        with pytest.raises(NormalFormLevelError):
            normal_form(monomial(cuntz2, ["e1"], ["e1"]), 0)

    def test_equals(self, cuntz2, complete2):
        assert equals(vertex_projection(complete2, "v1"), ranges_sum(complete2, 0))
        assert not equals(monomial(cuntz2, ["e1"], ["e2"]), monomial(cuntz2, ["e2"], ["e1"]))
        a = monomial(cuntz2, ["e1", "e2"], ["e2"])
        assert equals(a, a)


class TestGrading:
    def test_degree_decompose(self, cuntz2):
        s12 = monomial(cuntz2, ["e1"], ["e2"])
        s1 = edge_element(cuntz2, "e1")
        parts = degree_decompose(s12 + s1)
        assert parts == {0: s12, 1: s1}

    def test_projection_has_degree_zero(self, cuntz2):
        assert list(degree_decompose(unit(cuntz2))) == [0]

    def test_gauge_action(self, cuntz2):
        a = edge_element(cuntz2, "e1") + edge_star(cuntz2, "e2")
        expected = edge_element(cuntz2, "e1").scale(2) + edge_star(cuntz2, "e2").scale(Fraction(1, 2))
        assert gauge_action(a, 2) == expected

    def test_unitary_identity(self, cuntz2):
        a = monomial(cuntz2, ["e1", "e2"], ["e2"])
        assert equals(unitary_action(a, np.eye(2)), a)

    def test_unitary_swap(self, cuntz2):
        swap = np.array([[0, 1], [1, 0]])
        assert equals(unitary_action(edge_element(cuntz2, "e1"), swap), edge_element(cuntz2, "e2"))

    def test_unitary_needs_one_vertex(self, complete2):
        with pytest.raises(ValueError):
            unitary_action(unit(complete2), np.eye(2))


class TestExpressions:
    def test_parse_monomial(self, cuntz2):
        assert parse_element(cuntz2, "S[e1]S*[e1]") == monomial(cuntz2, ["e1"], ["e1"])

    def test_parse_uses_relations(self, cuntz2):
        assert equals(parse_element(cuntz2, "S[e1]S*[e2]S[e2]"), edge_element(cuntz2, "e1"))

    def test_parse_coefficients_and_signs(self, cuntz2):
        a = parse_element(cuntz2, "2*S[e1.e2]S*[e1] - 1/2*p[v]")
        expected = monomial(cuntz2, ["e1", "e2"], ["e1"], coeff=2) - unit(cuntz2).scale(Fraction(1, 2))
        assert a == expected

    def test_parse_sum_of_projections(self, complete2):
        assert parse_element(complete2, "p[v1]+p[v2]") == unit(complete2)

    def test_syntax_error_column(self, cuntz2):
        with pytest.raises(ExpressionSyntaxError) as info:
            parse_element(cuntz2, "S[e1] + ")
        assert info.value.column >= 1

    def test_zero_denominator(self, cuntz2):
        with pytest.raises(ExpressionSyntaxError):
            parse_element(cuntz2, "1/0*S[e1]")

    @pytest.mark.parametrize("text", ["S[e9]", "p[w]", "S*[e1.e7]"])
    def test_unknown_ids(self, cuntz2, text):
        with pytest.raises(ExpressionVocabularyError):
            parse_element(cuntz2, text)

    def test_render(self, cuntz3):
        assert render_element(monomial(cuntz3, ["e1", "e2"], ["e3"])) == "S[e1.e2]S*[e3]"
        assert render_element(unit(cuntz3)) == "p[v]"
        assert render_element(Element.zero(cuntz3)) == "0"

    def test_render_orders_terms(self, cuntz2):
        a = edge_element(cuntz2, "e1") - edge_star(cuntz2, "e2").scale(Fraction(1, 2))
        assert render_element(a) == "-1/2*S*[e2] + S[e1]"

    def test_render_parses_back(self, cuntz2):
        a = parse_element(cuntz2, "3*S[e1.e2]S*[e2] - S*[e1] + 1/3*p[v]")
        assert parse_element(cuntz2, render_element(a)) == a


class TestAlgebraLaws:
    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(LAW_GRAPHS), st.data())
    def test_associativity(self, g, data):
        a, b, c = (data.draw(elements(g)) for _ in range(3))
        assert equals(multiply(multiply(a, b), c), multiply(a, multiply(b, c)))

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(LAW_GRAPHS), st.data())
    def test_involution(self, g, data):
        a = data.draw(elements(g))
        assert adjoint(adjoint(a)) == a

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(LAW_GRAPHS), st.data())
    def test_adjoint_reverses_products(self, g, data):
        a, b = data.draw(elements(g)), data.draw(elements(g))
        assert equals(adjoint(multiply(a, b)), multiply(adjoint(b), adjoint(a)))

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(LAW_GRAPHS), st.data())
    def test_expand_once_preserves_value(self, g, data):
        w = data.draw(words(g))
        expanded = expand_once(g, w)
        assert equals(expanded, Element.from_word(g, w))
        assert all(x.min_length == w.min_length + 1 for x in expanded.terms)

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(LAW_GRAPHS), st.data())
    def test_degree_additive(self, g, data):
        u, v = data.draw(words(g)), data.draw(words(g))
        w = word_product(u, v)
        if w is not None:
            assert w.degree == u.degree + v.degree

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(LAW_GRAPHS), st.data())
    def test_decomposition_sums_back(self, g, data):
        a = data.draw(elements(g))
        total = Element.zero(g)
        for part in degree_decompose(a).values():
            total = total + part
        assert total == a

    def test_matrix_units(self, cuntz2):
        for k in range(3):
            basis = words_of_bidegree(cuntz2, k, k)
            for a in basis:
                for b in basis:
                    product = word_product(a, b)
                    if a.nu == b.mu:
                        assert product == Word(a.mu, b.nu)
                    else:
                        assert product is None
