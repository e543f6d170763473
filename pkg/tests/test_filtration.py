from fractions import Fraction

import pytest

from filtration import (
    ComponentLabel,
    FiltrationComponent,
    InsufficientCoverageError,
    bidegree_lemma_applies,
    build_F,
    build_filtration,
    build_V,
    build_W,
    check_bidegree_orthogonality,
    decompose_word,
    filtration_labels,
    required_labels,
    same_subspace,
    verify_density,
    verify_orthogonality,
)
from kms_functional import CuntzContextError, gram_rank, inner_product
from star_algebra import Word, edge_element, empty_path, make_path, monomial, paths_of_length, unit


def labels_of(components):
    return [str(c.label) for c in components]


def dims_of(components):
    return {str(c.label): c.dimension for c in components}


@pytest.fixture(scope="module")
def o2_filtration_2(o2_state):
    return build_filtration(o2_state, max_k=2, max_r=2)


@pytest.fixture(scope="module")
def o2_filtration_3(o2_state):
    return build_filtration(o2_state, max_k=3, max_r=3)


class TestLabels:
    def test_label_order(self):
        labels = filtration_labels(True, 2, 2)
        assert [str(x) for x in labels] == [
            "W(0)", "W(1)", "W(2)",
            "V1(0,1)", "V1(0,2)", "V1(1,1)",
            "V2(0,1)", "V2(0,2)", "V2(1,1)",
        ]

    def test_non_cuntz_has_only_w(self):
        assert [str(x) for x in filtration_labels(False, 2, 3)] == ["W(0)", "W(1)", "W(2)"]

    def test_label_degree(self):
        assert ComponentLabel("V1", 1, 2).degree == 2
        assert ComponentLabel("V2", 0, 3).degree == -3
        assert ComponentLabel("W", 2).degree == 0

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ComponentLabel("X", 0)

    def test_required_labels(self, cuntz2):
        w = Word(make_path(cuntz2, [0, 0]), make_path(cuntz2, [1]))
        assert [str(x) for x in required_labels(w)] == ["V1(0,1)", "V1(1,1)"]
        assert [str(x) for x in required_labels(Word(empty_path(0), empty_path(0)))] == ["W(0)"]

    def test_bidegree_hypothesis(self):
        assert bidegree_lemma_applies(1, 0, 0, 1)
        assert not bidegree_lemma_applies(2, 1, 1, 0)
        assert not bidegree_lemma_applies(1, 1, 2, 2)


class TestBalancedLevels:
    def test_f0_is_scalars(self, o2_state, cuntz2):
        level = build_F(o2_state, 0)
        assert level.elements == (unit(cuntz2),)

    @pytest.mark.parametrize("k, expected", [(1, 4), (2, 16), (3, 64)])
    def test_cuntz_dimensions(self, o2_state, k, expected):
        assert build_F(o2_state, k).dimension == expected

    def test_complete_graph(self, complete2_state):
        assert build_F(complete2_state, 1).dimension == 2
        assert build_F(complete2_state, 2).dimension == 2

    def test_bad_basis_order(self, o2_state):
        with pytest.raises(ValueError):
            build_F(o2_state, 1, basis_order=[0, 1, 1, 2])

    def test_negative_level(self, o2_state):
        with pytest.raises(ValueError):
            build_F(o2_state, -1)


class TestComplements:
    @pytest.mark.parametrize("k, expected", [(0, 1), (1, 3), (2, 12)])
    def test_cuntz_dimensions(self, o2_state, k, expected):
        assert build_W(o2_state, k).dimension == expected

    def test_w0_is_orthonormal(self, o2_state):
        w0 = build_W(o2_state, 0)
        assert w0.orthonormal
        assert w0.norms_squared == (Fraction(1),)

    def test_exact_elements_are_orthogonal_to_lower_level(self, o2_state, cuntz2):
        w1 = build_W(o2_state, 1)
        for x in w1.spanning_set:
            assert inner_product(o2_state, unit(cuntz2), x) == 0

    def test_norms_are_inner_products(self, o2_state):
        w1 = build_W(o2_state, 1)
        for x, norm in zip(w1.spanning_set, w1.norms_squared):
            assert inner_product(o2_state, x, x) == norm

    def test_complete_graph_dimensions(self, complete2_state):
        assert build_W(complete2_state, 1).dimension == 1
        assert build_W(complete2_state, 2).dimension == 0

    def test_float_state(self, golden_state):
        w1 = build_W(golden_state, 1)
        assert w1.dimension == 4
        assert w1.orthonormal
        for x in w1.spanning_set:
            assert inner_product(golden_state, x, x) == pytest.approx(1.0)

    def test_basis_order_does_not_change_the_space(self, o2_state):
        default = build_W(o2_state, 2)
        reordered = build_W(o2_state, 2, basis_order=list(reversed(range(16))))
        assert same_subspace(o2_state, default, reordered)

    def test_different_levels_are_different_spaces(self, o2_state):
        assert not same_subspace(o2_state, build_W(o2_state, 1), build_W(o2_state, 0))


class TestShiftedSpaces:
    @pytest.mark.parametrize("which", [1, 2])
    @pytest.mark.parametrize("k, r, expected", [(0, 1, 2), (0, 2, 4), (1, 1, 6), (1, 2, 12)])
    def test_dimensions(self, o2_state, which, k, r, expected):
        assert build_V(o2_state, which, k, r).dimension == expected

    def test_v1_elements(self, o2_state, cuntz2):
        v = build_V(o2_state, 1, 0, 1)
        assert list(v.spanning_set) == [edge_element(cuntz2, "e1"), edge_element(cuntz2, "e2")]
        assert v.orthonormal

    def test_v2_has_negative_degree(self, o2_state):
        v = build_V(o2_state, 2, 1, 1)
        assert all(w.degree == -1 for x in v.spanning_set for w in x.terms)

    def test_requires_cuntz(self, complete2_state):
        with pytest.raises(CuntzContextError):
            build_V(complete2_state, 1, 0, 1)

    def test_rejects_zero_shift(self, o2_state):
        with pytest.raises(ValueError):
            build_V(o2_state, 1, 0, 0)

    def test_rejects_unknown_side(self, o2_state):
        with pytest.raises(ValueError):
            build_V(o2_state, 3, 0, 1)


class TestBuildFiltration:
    def test_labels_and_dimensions(self, o2_filtration_2):
        assert dims_of(o2_filtration_2) == {
            "W(0)": 1, "W(1)": 3, "W(2)": 12,
            "V1(0,1)": 2, "V1(0,2)": 4, "V1(1,1)": 6,
            "V2(0,1)": 2, "V2(0,2)": 4, "V2(1,1)": 6,
        }

    def test_level_three(self, o2_filtration_3):
        dims = dims_of(o2_filtration_3)
        assert dims["W(3)"] == 48
        assert dims["V1(2,1)"] == 24
        assert dims["V2(0,3)"] == 8
        assert "V1(3,1)" not in dims

    def test_spanning_sets_are_independent(self, o2_state, o2_filtration_3):
        for comp in o2_filtration_3:
            assert gram_rank(o2_state, comp.spanning_set) == comp.dimension, str(comp.label)

    def test_non_cuntz_builds_w_only(self, complete2_state):
        components = build_filtration(complete2_state, max_k=2, max_r=2)
        assert labels_of(components) == ["W(0)", "W(1)", "W(2)"]

    def test_negative_truncation(self, o2_state):
        with pytest.raises(ValueError):
            build_filtration(o2_state, max_k=-1, max_r=1)


class TestOrthogonality:
    def test_exact_zero(self, o2_state, o2_filtration_2):
        report = verify_orthogonality(o2_state, o2_filtration_2)
        assert report.passed
        assert report.max_abs_inner == 0
        n = len(o2_filtration_2)
        assert len(report.pairs) == n * (n + 1) // 2

    def test_level_three(self, o2_state, o2_filtration_3):
        report = verify_orthogonality(o2_state, o2_filtration_3)
        assert report.passed
        assert report.max_abs_inner == 0

    def test_parallel_matches_serial(self, o2_state):
        components = build_filtration(o2_state, max_k=1, max_r=1)
        serial = verify_orthogonality(o2_state, components, n_jobs=1)
        parallel = verify_orthogonality(o2_state, components, n_jobs=2)
        assert [p.max_abs_inner for p in parallel.pairs] == [p.max_abs_inner for p in serial.pairs]
        assert parallel.passed

    def test_detects_overlap(self, o2_state, cuntz2):
        p11 = monomial(cuntz2, ["e1"], ["e1"])
        bad = FiltrationComponent(ComponentLabel("W", 1), (p11, unit(cuntz2)), (Fraction(1, 2), Fraction(1)), False)
        report = verify_orthogonality(o2_state, [bad])
        assert not report.passed
        assert report.max_abs_inner == Fraction(1, 2)

    def test_float_state(self, golden_state):
        report = verify_orthogonality(golden_state, build_filtration(golden_state, max_k=2, max_r=0))
        assert report.passed
        assert report.max_abs_inner < 1e-9


class TestBidegreeOrthogonality:
    @pytest.mark.parametrize("bidegrees", [(1, 0, 0, 1), (2, 0, 0, 1), (2, 1, 0, 0), (1, 1, 2, 0)])
    def test_holds_when_hypothesis_met(self, o2_state, bidegrees):
        assert bidegree_lemma_applies(*bidegrees)
        assert check_bidegree_orthogonality(o2_state, *bidegrees)

    def test_vacuous_when_hypothesis_fails(self, o2_state):
        assert check_bidegree_orthogonality(o2_state, 2, 1, 1, 0)

    def test_enumeration_cap(self, o2_state):
        with pytest.raises(ValueError):
            check_bidegree_orthogonality(o2_state, 2, 0, 0, 1, max_enum=1)

    def test_requires_cuntz(self, complete2_state):
        with pytest.raises(CuntzContextError):
            check_bidegree_orthogonality(complete2_state, 1, 0, 0, 1)


class TestDecomposition:
    def test_generator(self, o2_state, o2_filtration_2, cuntz2):
        w = Word(paths_of_length(cuntz2, 1)[0], empty_path(0))
        result = decompose_word(o2_state, w, o2_filtration_2)
        assert result.coefficients[ComponentLabel("V1", 0, 1)] == [1, 0]
        assert result.residual_norm_squared == 0

    def test_unit(self, o2_state, o2_filtration_2):
        result = decompose_word(o2_state, Word(empty_path(0), empty_path(0)), o2_filtration_2)
        assert result.coefficients[ComponentLabel("W", 0)] == [1]
        assert result.residual_norm == 0.0

    def test_projection(self, o2_state, o2_filtration_2, cuntz2):
        e1 = paths_of_length(cuntz2, 1)[0]
        result = decompose_word(o2_state, Word(e1, e1), o2_filtration_2)
        assert result.coefficients[ComponentLabel("W", 0)] == [Fraction(1, 2)]
        assert result.residual_norm_squared == 0

    def test_missing_components(self, o2_state, cuntz2):
        w_only = [build_W(o2_state, 0), build_W(o2_state, 1)]
        w = Word(paths_of_length(cuntz2, 1)[0], empty_path(0))
        with pytest.raises(InsufficientCoverageError):
            decompose_word(o2_state, w, w_only)


class TestDensity:
    def test_level_two(self, o2_state, o2_filtration_2):
        report = verify_density(o2_state, o2_filtration_2, 2)
        assert report.passed
        assert report.words_checked == 49
        assert report.max_residual_norm == 0.0

    def test_level_three(self, o2_state, o2_filtration_3):
        assert verify_density(o2_state, o2_filtration_3, 3).passed

    def test_level_too_high(self, o2_state, o2_filtration_2):
        with pytest.raises(InsufficientCoverageError):
            verify_density(o2_state, o2_filtration_2, 3)
