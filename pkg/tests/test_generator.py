import numpy as np
import pytest

from mlcl.generator import (
    LAYOUTS,
    AppliedRule,
    GenerationError,
    PanelSpec,
    RpmInstance,
    generate_candidates,
    generate_dataset,
    generate_instance,
    get_layout,
    instance_seed,
    instances_equal,
    rasterize,
    realize_matrix,
    sample_structure,
    shape_width,
    supported_rules,
    verify,
)
from mlcl.rules import (
    Grammar,
    PairAttribute,
    PairRelation,
    TripleAttribute,
    pair_rule,
)


class TestSampleStructure:
    def test_center_has_five_rules_one_per_attribute(self):
        rng = np.random.default_rng(0)
        applied = sample_structure("center", rng)
        assert len(applied) == 5
        attrs = {a.rule.attribute for a in applied}
        assert attrs == set(PairAttribute)

    def test_grid2x2_has_four_rules(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            applied = sample_structure("grid2x2", rng)
            assert len(applied) == 4
            attrs = [a.rule.attribute for a in applied]
            assert not (PairAttribute.NUMBER in attrs and PairAttribute.POSITION in attrs)

    def test_grid3x3_one_to_four_rules(self):
        rng = np.random.default_rng(2)
        sizes = set()
        for _ in range(200):
            applied = sample_structure("grid3x3", rng)
            sizes.add(len(applied))
            attrs = [a.rule.attribute for a in applied]
            assert len(attrs) == len(set(attrs))
            assert not (TripleAttribute.NUMBER in attrs and TripleAttribute.POSITION in attrs)
        assert sizes == {1, 2, 3, 4}

    @pytest.mark.parametrize("layout", sorted(LAYOUTS))
    def test_structures_are_valid(self, layout):
        rng = np.random.default_rng(3)
        allowed = set(supported_rules(layout))
        for _ in range(300):
            applied = sample_structure(layout, rng)
            for a in applied:
                assert a.rule in allowed

    @pytest.mark.parametrize("layout", sorted(LAYOUTS))
    def test_rule_coverage(self, layout):
        rng = np.random.default_rng(4)
        seen = set()
        target = set(supported_rules(layout))
        for _ in range(3000):
            seen.update(a.rule for a in sample_structure(layout, rng))
            if seen == target:
                break
        assert seen == target


class TestRealizeMatrix:
    def test_constant_number_rows(self):
        rng = np.random.default_rng(5)
        applied = (AppliedRule(pair_rule(PairRelation.CONSTANT, PairAttribute.NUMBER)),)
        grid = realize_matrix(applied, "grid2x2", rng)
        for row in grid:
            assert row[0].count == row[1].count == row[2].count

    def test_arithmetic_size_rows(self):
        rng = np.random.default_rng(6)
        applied = (AppliedRule(pair_rule(PairRelation.ARITHMETIC, PairAttribute.SIZE)),)
        for _ in range(20):
            grid = realize_matrix(applied, "center", rng)
            plus = all(r[2].size == r[0].size + r[1].size for r in grid)
            minus = all(r[2].size == r[0].size - r[1].size for r in grid)
            assert plus or minus

    def test_progression_color_fixed_increment(self):
        rng = np.random.default_rng(7)
        applied = (AppliedRule(pair_rule(PairRelation.PROGRESSION, PairAttribute.COLOR)),)
        for _ in range(20):
            grid = realize_matrix(applied, "center", rng)
            deltas = {r[1].color - r[0].color for r in grid} | {r[2].color - r[1].color for r in grid}
            assert len(deltas) == 1
            assert deltas.pop() != 0

    def test_distribute_three_shares_value_set(self):
        rng = np.random.default_rng(8)
        applied = (AppliedRule(pair_rule(PairRelation.DISTRIBUTE_THREE, PairAttribute.COLOR)),)
        grid = realize_matrix(applied, "center", rng)
        sets = [frozenset(p.color for p in row) for row in grid]
        assert sets[0] == sets[1] == sets[2]
        assert len(sets[0]) == 3


class TestCandidates:
    @pytest.mark.parametrize("layout", sorted(LAYOUTS))
    def test_verify_returns_exactly_the_answer(self, layout):
        for i in range(60):
            inst = generate_instance(layout, instance_seed(1000, i))
            assert verify(inst) == {inst.correct_index}

    def test_choices_are_distinct(self):
        for i in range(30):
            inst = generate_instance("center", instance_seed(2000, i))
            assert len(set(inst.choices)) == 8

    def test_distractor_breaking_constant_size_is_rejected(self):
        rng = np.random.default_rng(11)
        applied = (
            AppliedRule(pair_rule(PairRelation.CONSTANT, PairAttribute.NUMBER)),
            AppliedRule(pair_rule(PairRelation.CONSTANT, PairAttribute.POSITION)),
            AppliedRule(pair_rule(PairRelation.CONSTANT, PairAttribute.TYPE)),
            AppliedRule(pair_rule(PairRelation.CONSTANT, PairAttribute.SIZE)),
            AppliedRule(pair_rule(PairRelation.CONSTANT, PairAttribute.COLOR)),
        )
        grid = realize_matrix(applied, "center", rng)
        answer = grid[2][2]
        bumped = PanelSpec(answer.positions, answer.shape_type,
                           (answer.size + 1) % 5, answer.color)
        context = tuple(grid[i][j] for i in range(3) for j in range(3))[:8]
        choices = (bumped, answer) + tuple(
            PanelSpec(answer.positions, (answer.shape_type + k) % 4,
                      answer.size, (answer.color + k) % 5)
            for k in range(1, 7)
        )
        inst = RpmInstance("center", 28, context, choices, applied, 2, 0)
        assert 1 not in verify(inst)
        assert 2 in verify(inst)

    def test_correct_index_histogram_roughly_uniform(self):
        counts = np.zeros(8)
        n = 400
        for i in range(n):
            inst = generate_instance("center", instance_seed(3000, i), panel_size=14)
            counts[inst.correct_index - 1] += 1
        expected = n / 8
        sigma = np.sqrt(n * (1 / 8) * (7 / 8))
        assert np.all(np.abs(counts - expected) <= 4 * sigma)

    def test_no_perturbable_attribute_is_an_error(self):
        answer = PanelSpec((0,), 0, 0, 0)
        applied = (AppliedRule(pair_rule(PairRelation.CONSTANT, PairAttribute.NUMBER)),)
        with pytest.raises(GenerationError):
            generate_candidates(answer, applied, (answer,) * 8, "center",
                                np.random.default_rng(0))


class TestVerify:
    def test_tampered_context_rule_excludes_answer(self):
        inst = generate_instance("center", instance_seed(4000, 0))
        # replace the correct choice with a context panel of a different type
        target = None
        for p in inst.context:
            if p.shape_type != inst.correct_choice.shape_type:
                target = p
                break
        if target is None:
            pytest.skip("all context panels share the answer's type")
        choices = list(inst.choices)
        choices[inst.correct_index - 1] = target
        tampered = RpmInstance(inst.layout, inst.panel_size, inst.context,
                               tuple(choices), inst.applied_rules,
                               inst.correct_index, inst.seed)
        assert inst.correct_index not in verify(tampered)

    def test_empty_structure_is_an_error(self):
        inst = generate_instance("center", instance_seed(4000, 1))
        with pytest.raises(ValueError):
            RpmInstance(inst.layout, inst.panel_size, inst.context, inst.choices,
                        (), inst.correct_index, inst.seed)


class TestRasterize:
    def test_empty_panel_is_background(self):
        raster = rasterize(PanelSpec((), 0, 0, 0), size=28, cell_grid=2)
        assert np.all(raster == 255)

    def test_determinism(self):
        panel = PanelSpec((0, 3), 2, 3, 1)
        a = rasterize(panel, 28, 2)
        b = rasterize(panel, 28, 2)
        assert np.array_equal(a, b)

    def test_color_changes_only_foreground_intensity(self):
        a = rasterize(PanelSpec((0,), 1, 2, 0), 28, 1)
        b = rasterize(PanelSpec((0,), 1, 2, 4), 28, 1)
        diff = a != b
        assert diff.any()
        assert np.all(a[~diff] == b[~diff])
        assert np.all(a[diff] != 255) and np.all(b[diff] != 255)
        assert len(np.unique(a[diff])) == 1 and len(np.unique(b[diff])) == 1

    @pytest.mark.parametrize("layout", sorted(LAYOUTS))
    @pytest.mark.parametrize("shape", range(4))
    def test_size_levels_render_distinct(self, layout, shape):
        grid = get_layout(layout).cell_grid
        rendered = [rasterize(PanelSpec((0,), shape, s, 0), 28, grid).tobytes()
                    for s in range(5)]
        assert len(set(rendered)) == 5

    def test_width_ladder_monotone(self):
        for cell in (9, 14, 28):
            widths = [shape_width(s, cell) for s in range(5)]
            assert widths == sorted(widths)
            assert len(set(widths)) == 5
            assert widths[-1] <= cell


class TestDeterminism:
    def test_same_seed_same_instance(self):
        a = generate_instance("grid2x2", 987654321)
        b = generate_instance("grid2x2", 987654321)
        assert instances_equal(a, b)

    def test_dataset_streams_are_index_stable(self):
        full = generate_dataset("center", 5, seed=42, panel_size=14)
        third = generate_instance("center", instance_seed(42, 3), panel_size=14)
        assert instances_equal(full[3], third)


def test_unknown_layout_rejected():
    with pytest.raises(ValueError, match="unknown layout"):
        get_layout("hexagons")
