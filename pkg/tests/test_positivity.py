"""Decomposition procedures, recomposition soundness, and grid
certification of non-negativity."""

import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma as sp_gamma
from scipy.special import gammaincc

from foxh.classes import ClassSpec, build_class, density_eval
from foxh.core import FoxHSpec, derive_params
from foxh.errors import (
    BadMatchingError,
    BudgetError,
    DomainError,
    FoxHError,
    ShapeError,
    ValidationError,
)
from foxh.evaluate import eval_auto
from foxh.positivity import (
    CERTIFIED,
    INCONCLUSIVE,
    REFUTED,
    Decomposition,
    DecompNode,
    Matching,
    StepAssignment,
    certify_nonnegative,
    class_decomposition,
    decompose_A,
    decompose_B,
    default_certification_grid,
    recompose,
    scan_sign,
)

# H^{1,1}_{1,1} with the trivial matching gamma = alpha/sigma and the
# base chosen so a = base + eta*gamma; both procedures apply to it.
PARENT_11 = FoxHSpec(m=1, n=1, p=1, q=1,
                     upper=[(0.3, 0.5)], lower=[(0.2, 1.0)])
MATCH_A = Matching(step1=StepAssignment(
    bases=(-0.1,), scales=(0.5,), eta=0.8, sigma=1.0))
MATCH_B = Matching(step1=StepAssignment(
    bases=(0.4,), scales=(0.5,), eta=0.6, sigma=1.0))

# Deeper instance: step 1 peels the upper row, step 2 then splits the
# all-lower child H^{2,0}_{0,3} (q mod m = 1) into H^{1,0}_{0,2} plus a
# square factor.
NESTED_PARENT = FoxHSpec(m=2, n=1, p=1, q=3, upper=[(0.5, 0.8)],
                         lower=[(0.4, 1.0), (0.3, 1.2), (0.6, 0.5)])
NESTED_MATCH = Matching(
    step1=StepAssignment(bases=(0.1,), scales=(0.8,), eta=0.5, sigma=1.0),
    step2=StepAssignment(bases=(0.0,), scales=(0.5,), eta=0.8, sigma=2.0))

BETA_GAMMA = ClassSpec(tag="C3", beta_block=[(0.5, 1.0, 2.0)],
                       gamma_block=[(0.7, 1.4)])
ALL_BLOCKS = ClassSpec(tag="C7", gamma_block=[(0.5, 1.2)],
                       beta_block=[(0.2, 1.1, 2.3)],
                       wright_block=[(0.0, 1.0, 0.5, 0.8)])
MWRIGHT_SPEC = FoxHSpec(m=1, n=0, p=1, q=1,
                        upper=[(0.5, 0.5)], lower=[(0.0, 1.0)])

# Alternating series with genuine sign changes at moderate arguments:
# sum_k (-x)^k / (k! Gamma(0.75 + 0.5 k)).
OSCILLATOR = FoxHSpec(m=1, n=0, p=0, q=2, upper=(),
                      lower=[(0.0, 1.0), (0.25, 0.5)])

# Neither the series nor the contour route applies: delta = -1, a* = -1.
UNREACHABLE = FoxHSpec(m=1, n=0, p=1, q=1,
                       upper=[(0.5, 2.0)], lower=[(0.0, 1.0)])


def edge_drifts(node, drifts):
    """Collect |a*(parent) - a*(kernel) - sigma * a*(measure)| per edge."""
    if node.kernel is None:
        return drifts
    pa = derive_params(node.spec).a_star
    ka = derive_params(node.kernel.spec).a_star
    ma = derive_params(node.measure.spec).a_star
    drifts.append(abs(pa - (ka + node.sigma * ma)))
    edge_drifts(node.kernel, drifts)
    edge_drifts(node.measure, drifts)
    return drifts


class TestStepAssignment:
    def test_sigma_must_be_positive(self):
        with pytest.raises(ValidationError):
            StepAssignment(bases=(0.1,), scales=(0.5,), eta=0.2, sigma=0.0)

    def test_scales_must_be_positive(self):
        with pytest.raises(ValidationError):
            StepAssignment(bases=(0.1,), scales=(-0.5,), eta=0.2, sigma=1.0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            StepAssignment(bases=(0.1, 0.2), scales=(0.5,), eta=0.2,
                           sigma=1.0)

    def test_reproduces_reports_worst_residual(self):
        a = StepAssignment(bases=(-0.1,), scales=(0.5,), eta=0.8, sigma=1.0)
        assert a.reproduces(PARENT_11.upper) == pytest.approx(0.0, abs=1e-15)
        off = FoxHSpec(m=1, n=1, p=1, q=1, upper=[(0.3 + 1e-6, 0.5)],
                       lower=[(0.2, 1.0)])
        assert a.reproduces(off.upper) == pytest.approx(1e-6, rel=1e-6)


class TestDecomposeA:
    def test_toy_splits_into_lower_and_upper_atoms(self):
        d = decompose_A(PARENT_11, MATCH_A)
        shapes = [(s.m, s.n, s.p, s.q) for s in d.atomic]
        assert shapes == [(1, 0, 0, 1), (0, 1, 1, 0)]
        assert d.auxiliary == ()
        root = d.structure
        assert root.kind == "composite"
        assert root.eta == 0.8
        assert root.sigma == 1.0
        assert root.arg_sign == -1

    def test_child_keeps_lower_rows_and_factor_takes_bases(self):
        d = decompose_A(PARENT_11, MATCH_A)
        child, factor = d.leaves()
        assert [(p.coeff, p.scale) for p in child.spec.lower] == [(0.2, 1.0)]
        assert [(p.coeff, p.scale) for p in factor.spec.upper] == [(-0.1, 0.5)]

    def test_all_lower_spec_is_a_single_leaf(self):
        spec = FoxHSpec(m=1, n=0, p=0, q=1, upper=(), lower=[(0.0, 1.0)])
        d = decompose_A(spec, Matching())
        (leaf,) = d.leaves()
        assert leaf.kind == "atomic"
        assert leaf.spec == spec

    def test_bad_residual_rejected(self):
        off = Matching(step1=StepAssignment(
            bases=(-0.1 + 1e-6,), scales=(0.5,), eta=0.8, sigma=1.0))
        with pytest.raises(BadMatchingError):
            decompose_A(PARENT_11, off)

    def test_step1_required_when_upper_rows_exist(self):
        with pytest.raises(BadMatchingError):
            decompose_A(PARENT_11, Matching())

    def test_wrong_assignment_width_rejected(self):
        wide = Matching(step1=StepAssignment(
            bases=(-0.1, 0.0), scales=(0.5, 0.5), eta=0.8, sigma=1.0))
        with pytest.raises(BadMatchingError):
            decompose_A(PARENT_11, wide)

    def test_all_back_upper_rows_break_the_budget(self):
        # n = 0 puts the whole upper block behind the contour, so the
        # split-off factor has a* = -sum(gamma) < 0.
        spec = FoxHSpec(m=1, n=0, p=1, q=1,
                        upper=[(1.5, 0.5)], lower=[(0.2, 1.0)])
        matching = Matching(step1=StepAssignment(
            bases=(1.1,), scales=(0.5,), eta=0.8, sigma=1.0))
        with pytest.raises(BudgetError):
            decompose_A(spec, matching)

    def test_back_heavy_upper_block_breaks_the_budget(self):
        spec = FoxHSpec(m=1, n=1, p=2, q=1,
                        upper=[(0.3, 0.5), (1.5, 1.0)], lower=[(0.2, 1.0)])
        matching = Matching(step1=StepAssignment(
            bases=(-0.1, 0.7), scales=(0.5, 1.0), eta=0.8, sigma=1.0))
        with pytest.raises(BudgetError):
            decompose_A(spec, matching)

    def test_nested_step2_structure(self):
        d = decompose_A(NESTED_PARENT, NESTED_MATCH)
        kinds = [(n.kind, (n.spec.m, n.spec.n, n.spec.p, n.spec.q))
                 for n in d.leaves()]
        assert kinds == [("atomic", (1, 0, 0, 2)),
                         ("auxiliary", (1, 0, 0, 1)),
                         ("atomic", (0, 1, 1, 0))]
        (aux,) = d.auxiliary
        assert [(p.coeff, p.scale) for p in aux.lower] == [(0.0, 0.5)]
        inner = d.structure.kernel
        assert inner.kind == "composite"
        assert inner.sigma == 2.0
        assert inner.eta == 0.8

    def test_step2_rejects_exact_multiples(self):
        spec = FoxHSpec(m=2, n=0, p=0, q=2, upper=(),
                        lower=[(0.2, 1.0), (0.4, 0.5)])
        matching = Matching(step2=StepAssignment(
            bases=(0.0,), scales=(0.5,), eta=0.4, sigma=2.0))
        with pytest.raises(ShapeError):
            decompose_A(spec, matching)

    def test_step2_rejects_single_front_row(self):
        spec = FoxHSpec(m=1, n=0, p=0, q=2, upper=(),
                        lower=[(0.2, 1.0), (0.4, 0.5)])
        matching = Matching(step2=StepAssignment(
            bases=(0.0,), scales=(0.5,), eta=0.4, sigma=2.0))
        with pytest.raises(ShapeError):
            decompose_A(spec, matching)

    def test_zero_budget_with_fast_decay_is_flagged(self):
        # Balanced upper block: the factor lands on a* = 0 with mu < -1,
        # which the procedure admits but records.
        spec = FoxHSpec(m=1, n=1, p=2, q=1,
                        upper=[(0.2, 0.5), (0.7, 0.5)], lower=[(0.3, 1.0)])
        matching = Matching(step1=StepAssignment(
            bases=(0.8, 1.3), scales=(0.5, 0.5), eta=-1.2, sigma=1.0))
        d = decompose_A(spec, matching)
        notes = d.budget_notes()
        assert len(notes) == 1
        assert "a*=0" in notes[0]

    def test_zero_budget_with_slow_decay_rejected(self):
        spec = FoxHSpec(m=1, n=1, p=2, q=1,
                        upper=[(0.2, 0.5), (0.7, 0.5)], lower=[(0.3, 1.0)])
        matching = Matching(step1=StepAssignment(
            bases=(0.1, 0.6), scales=(0.5, 0.5), eta=0.2, sigma=1.0))
        with pytest.raises(BudgetError):
            decompose_A(spec, matching)


class TestDecomposeB:
    def test_toy_splits_into_two_lower_atoms(self):
        d = decompose_B(PARENT_11, MATCH_B)
        shapes = [(s.m, s.n, s.p, s.q) for s in d.atomic]
        assert shapes == [(1, 0, 0, 1), (1, 0, 0, 1)]
        assert d.structure.arg_sign == +1
        child, factor = d.leaves()
        assert [(p.coeff, p.scale) for p in factor.spec.lower] == [(0.4, 0.5)]

    def test_bad_residual_rejected(self):
        off = Matching(step1=StepAssignment(
            bases=(0.4 + 1e-6,), scales=(0.5,), eta=0.6, sigma=1.0))
        with pytest.raises(BadMatchingError):
            decompose_B(PARENT_11, off)

    def test_all_back_upper_rows_break_the_budget(self):
        spec = FoxHSpec(m=1, n=0, p=1, q=1,
                        upper=[(1.5, 0.5)], lower=[(0.2, 1.0)])
        matching = Matching(step1=StepAssignment(
            bases=(-0.9,), scales=(0.5,), eta=0.8, sigma=1.0))
        with pytest.raises(BudgetError):
            decompose_B(spec, matching)

    def test_step2_machinery_applies_to_both_pieces(self):
        # Kernel child H^{2,0}_{0,3} splits; the measure factor stays.
        parent = FoxHSpec(m=2, n=1, p=1, q=3, upper=[(0.1, 0.8)],
                          lower=[(0.4, 1.0), (0.3, 1.2), (0.6, 0.5)])
        matching = Matching(
            step1=StepAssignment(bases=(0.5,), scales=(0.8,), eta=0.5,
                                 sigma=1.0),
            step2=StepAssignment(bases=(0.0,), scales=(0.5,), eta=0.8,
                                 sigma=2.0))
        d = decompose_B(parent, matching)
        kinds = [(n.kind, (n.spec.m, n.spec.n, n.spec.p, n.spec.q))
                 for n in d.leaves()]
        assert kinds == [("atomic", (1, 0, 0, 2)),
                         ("auxiliary", (1, 0, 0, 1)),
                         ("atomic", (1, 0, 0, 1))]


class TestRecomposition:
    @pytest.mark.parametrize("x", [0.3, 1.0, 2.5])
    def test_procedure_a_soundness(self, x):
        d = decompose_A(PARENT_11, MATCH_A)
        direct = float(eval_auto(PARENT_11, x))
        assert recompose(d, x) == pytest.approx(direct, rel=1e-5)

    @pytest.mark.parametrize("x", [0.3, 1.0, 2.5])
    def test_procedure_b_soundness(self, x):
        d = decompose_B(PARENT_11, MATCH_B)
        direct = float(eval_auto(PARENT_11, x))
        assert recompose(d, x) == pytest.approx(direct, rel=1e-5)

    def test_nested_soundness(self):
        d = decompose_A(NESTED_PARENT, NESTED_MATCH)
        for x in (0.8, 1.5):
            direct = float(eval_auto(NESTED_PARENT, x))
            assert recompose(d, x) == pytest.approx(direct, rel=1e-5)

    def test_scaled_argument_soundness(self):
        scaled = FoxHSpec(m=1, n=1, p=1, q=1, upper=[(0.3, 0.5)],
                          lower=[(0.2, 1.0)], c=2.0)
        d = decompose_A(scaled, MATCH_A)
        direct = float(eval_auto(scaled, 0.7))
        assert recompose(d, 0.7) == pytest.approx(direct, rel=1e-5)

    @pytest.mark.parametrize("x", [0.2, 1.0, 3.0])
    def test_product_tree_soundness(self, x):
        spec, norm = build_class(BETA_GAMMA)
        d = class_decomposition(BETA_GAMMA)
        direct = density_eval(BETA_GAMMA, x) * norm.k_value
        assert recompose(d, x) == pytest.approx(direct, rel=1e-5)

    def test_three_factor_tree_soundness(self):
        spec, norm = build_class(ALL_BLOCKS)
        d = class_decomposition(ALL_BLOCKS)
        direct = density_eval(ALL_BLOCKS, 0.8) * norm.k_value
        assert recompose(d, 0.8) == pytest.approx(direct, rel=1e-5)

    def test_rejects_nonpositive_argument(self):
        d = decompose_A(PARENT_11, MATCH_A)
        with pytest.raises(DomainError):
            recompose(d, 0.0)


class TestClassDecomposition:
    def test_root_spec_matches_class_assembly(self):
        for cs in (BETA_GAMMA, ALL_BLOCKS):
            spec, _ = build_class(cs)
            assert class_decomposition(cs).root.spec == spec

    def test_leaf_kinds(self):
        d = class_decomposition(ALL_BLOCKS)
        assert [n.kind for n in d.leaves()] == ["density", "atomic",
                                                "density"]

    def test_low_b_beta_edge_admitted_with_note(self):
        soft = ClassSpec(tag="C3", beta_block=[(0.5, 1.0, 0.8)],
                         gamma_block=[(0.7, 1.4)])
        d = class_decomposition(soft)
        (note,) = d.budget_notes()
        assert "admitted as a density" in note

    def test_high_b_beta_edge_uses_decay_variant(self):
        (note,) = class_decomposition(BETA_GAMMA).budget_notes()
        assert "mu=-2" in note
        assert "admitted" not in note

    def test_empty_class_rejected(self):
        with pytest.raises(DomainError):
            class_decomposition(ClassSpec(tag="C0"))

    def test_budget_bookkeeping_exact_on_trees(self):
        for cs in (BETA_GAMMA, ALL_BLOCKS):
            drifts = edge_drifts(class_decomposition(cs).root, [])
            assert drifts and max(drifts) <= 1e-12


class TestBudgetBookkeeping:
    @settings(max_examples=100, deadline=None)
    @given(
        base=st.floats(-0.5, 1.0),
        gamma=st.floats(0.3, 2.0),
        eta=st.floats(-1.0, 1.5),
        sigma=st.floats(0.3, 2.5),
        b=st.floats(-0.2, 1.2),
        beta=st.floats(0.3, 2.0),
    )
    def test_procedure_a_edges_are_exact(self, base, gamma, eta, sigma, b,
                                         beta):
        spec = FoxHSpec(m=1, n=1, p=1, q=1,
                        upper=[(base + eta * gamma, sigma * gamma)],
                        lower=[(b, beta)])
        matching = Matching(step1=StepAssignment(
            bases=(base,), scales=(gamma,), eta=eta, sigma=sigma))
        d = decompose_A(spec, matching)
        drifts = edge_drifts(d.root, [])
        assert drifts and max(drifts) <= 1e-12


class TestCertification:
    def test_gamma_type_leaves_certify(self):
        d = decompose_B(PARENT_11, MATCH_B)
        report = certify_nonnegative(d)
        assert report.verdict == CERTIFIED
        assert all(f.evaluated == 64 for f in report.findings)
        assert report.grid_size == 64

    def test_mwright_leaf_certifies(self):
        d = Decomposition(root=DecompNode(spec=MWRIGHT_SPEC, kind="atomic"))
        report = certify_nonnegative(d)
        assert report.verdict == CERTIFIED
        (finding,) = report.findings
        assert finding.tail_guaranteed

    @pytest.mark.parametrize("cs", [
        ClassSpec(tag="C1", gamma_block=[(0.0, 1.0)]),
        BETA_GAMMA,
        ClassSpec(tag="C4", wright_block=[(0.0, 1.0, 0.5, 1.0)]),
        ALL_BLOCKS,
    ], ids=["exp", "beta-gamma", "mwright", "all-blocks"])
    def test_class_members_certify(self, cs):
        assert certify_nonnegative(class_decomposition(cs)).verdict \
            == CERTIFIED

    def test_oscillating_series_refuted(self):
        d = decompose_A(OSCILLATOR, Matching())
        report = certify_nonnegative(d)
        assert report.verdict == REFUTED
        (finding,) = report.findings
        assert finding.min_value < -1e-3
        assert 1.0 < finding.argmin < 10.0

    def test_points_beyond_budget_stay_inconclusive(self):
        # The oscillator's series budget ends near x = 20 and it is not
        # density-shaped, so nothing vouches for the far grid points.
        d = decompose_A(OSCILLATOR, Matching())
        report = certify_nonnegative(d, [30.0, 60.0])
        assert report.verdict == INCONCLUSIVE
        (finding,) = report.findings
        assert finding.skipped == 2
        assert not finding.tail_guaranteed

    def test_unreachable_leaf_inconclusive(self):
        d = Decomposition(root=DecompNode(spec=UNREACHABLE, kind="atomic"))
        report = certify_nonnegative(d)
        assert report.verdict == INCONCLUSIVE
        (finding,) = report.findings
        assert finding.evaluated == 0
        assert finding.errors

    def test_grid_refinement_is_monotone(self):
        # Refining the grid may move INCONCLUSIVE boundaries but never
        # flips CERTIFIED to REFUTED.
        d = class_decomposition(ALL_BLOCKS)
        verdicts = []
        for n in (64, 128, 256):
            lo, hi = 1e-3, 1e2
            grid = [lo * (hi / lo) ** (i / (n - 1)) for i in range(n)]
            verdicts.append(certify_nonnegative(d, grid).verdict)
        assert verdicts == [CERTIFIED] * 3

    def test_budget_notes_surface_in_report(self):
        report = certify_nonnegative(class_decomposition(BETA_GAMMA))
        assert any("a*=0" in note for note in report.budget_notes)

    def test_empty_grid_rejected(self):
        d = decompose_B(PARENT_11, MATCH_B)
        with pytest.raises(DomainError):
            certify_nonnegative(d, [])
        with pytest.raises(DomainError):
            certify_nonnegative(d, [1.0, -2.0])


class TestScanSign:
    def test_exponential_scan_clean(self):
        spec = FoxHSpec(m=1, n=0, p=0, q=1, upper=(), lower=[(0.0, 1.0)])
        report = scan_sign(spec, default_certification_grid())
        assert report.min_value > 0.0
        assert report.dips == ()
        assert report.nonnegative

    def test_incomplete_gamma_density_scan(self):
        # Kernel Gamma(s)Gamma(0.3+s)/Gamma(1+s) has Mellin transform
        # equal to the upper incomplete gamma function at rho = 0.3.
        spec = FoxHSpec(m=2, n=0, p=1, q=2, upper=[(1.0, 1.0)],
                        lower=[(0.0, 1.0), (0.3, 1.0)])
        grid = [10 ** (-3 + 4 * i / 47) * 1.2 for i in range(48)]
        grid = [x for x in grid if x < 12.0]
        report = scan_sign(spec, grid)
        assert report.min_value > 0.0
        assert report.nonnegative
        oracle = min(gammaincc(0.3, x) * sp_gamma(0.3) for x in grid)
        assert report.min_value == pytest.approx(oracle, rel=1e-9)

    def test_sign_flipped_series_reports_dips(self):
        spec = FoxHSpec(m=1, n=0, p=0, q=1, upper=(), lower=[(0.0, 1.0)])
        report = scan_sign(spec, [0.5, 1.0, 2.0],
                           value_fn=lambda x: -math.exp(-x))
        assert len(report.dips) == 3
        assert not report.nonnegative
        assert report.min_value == pytest.approx(-math.exp(-0.5))

    def test_evaluator_errors_propagate(self):
        with pytest.raises(FoxHError):
            scan_sign(UNREACHABLE, [1.0])

    def test_empty_grid_rejected(self):
        spec = FoxHSpec(m=1, n=0, p=0, q=1, upper=(), lower=[(0.0, 1.0)])
        with pytest.raises(DomainError):
            scan_sign(spec, [])


class TestLeafClosedForms:
    # Single-row leaves short-circuit to elementary formulas inside the
    # recomposer; cross-check them against the series route.

    @pytest.mark.parametrize("x", [0.3, 1.2, 3.0])
    def test_gamma_type_leaf(self, x):
        spec = FoxHSpec(m=1, n=0, p=0, q=1, upper=(), lower=[(0.4, 1.3)])
        node = Decomposition(root=DecompNode(spec=spec, kind="atomic"))
        assert recompose(node, x) == pytest.approx(
            float(eval_auto(spec, x)), rel=1e-10)

    @pytest.mark.parametrize("x", [0.2, 0.55, 0.9])
    def test_beta_type_leaf(self, x):
        spec = FoxHSpec(m=1, n=0, p=1, q=1,
                        upper=[(2.5, 1.1)], lower=[(0.2, 1.1)])
        node = Decomposition(root=DecompNode(spec=spec, kind="atomic"))
        assert recompose(node, x) == pytest.approx(
            float(eval_auto(spec, x)), rel=1e-10)

    def test_beta_type_leaf_vanishes_past_its_edge(self):
        spec = FoxHSpec(m=1, n=0, p=1, q=1,
                        upper=[(2.5, 1.1)], lower=[(0.2, 1.1)])
        node = Decomposition(root=DecompNode(spec=spec, kind="atomic"))
        assert recompose(node, 1.5) == 0.0

    def test_all_upper_leaf_reflects_to_a_stretched_exponential(self):
        # H^{0,1}_{1,0} row (-0.1, 0.5): reflection gives
        # 2 x^{-2.2} exp(-x^{-2}) for the direct value.
        spec = FoxHSpec(m=0, n=1, p=1, q=0, upper=[(-0.1, 0.5)], lower=())
        node = Decomposition(root=DecompNode(spec=spec, kind="atomic"))
        for x in (0.7, 1.4, 3.0):
            expected = 2.0 * x ** -2.2 * math.exp(-(x ** -2.0))
            assert recompose(node, x) == pytest.approx(expected, rel=1e-12)


class TestSerialization:
    def test_tree_serializes_to_plain_json(self):
        d = decompose_A(NESTED_PARENT, NESTED_MATCH)
        doc = json.loads(json.dumps(d.to_json()))
        root = doc["root"]
        assert root["kind"] == "composite"
        assert root["eta"] == 0.5
        assert root["sigma"] == 1.0
        assert root["arg_sign"] == -1
        assert root["kernel"]["kind"] == "composite"
        assert root["kernel"]["kernel"]["kind"] == "atomic"
        assert root["kernel"]["measure"]["kind"] == "auxiliary"
        assert root["measure"]["kind"] == "atomic"
        assert root["measure"]["spec"]["p"] == 1
