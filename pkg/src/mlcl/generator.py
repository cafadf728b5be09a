"""Procedural generation of desk-scale matrix-completion puzzles.

An instance is a 3x3 grid of panels with the bottom-right panel removed and
replaced by 8 candidate panels, exactly one of which satisfies every rule of
the instance's abstract structure.  Three layouts are supported:

* ``center``  -- pair grammar, one object per panel on a 1x1 cell grid.
* ``grid2x2`` -- pair grammar, 1-4 objects on a 2x2 cell grid.
* ``grid3x3`` -- triple grammar, shape objects on a 3x3 cell grid.

Panels are symbolic first (cell positions plus shared type/size/color
ordinals) and rendered to grayscale rasters second, so rule verification
never depends on pixels.

Rule semantics over a line of three panels (a row, or a column for triple
rules realized column-wise):

* Constant / consistent values: the attribute is equal across the line.
* Progression: the attribute changes by a fixed nonzero step (+-1 or +-2)
  shared by the whole matrix.
* Arithmetic: third value = first +- second, sign fixed per matrix.
* Distribute_Three: line values permute one 3-element set shared by all
  lines of the matrix.
* XOR / OR / AND (triple grammar): the third panel's occupied cells are the
  set operation applied to the first two panels' cells.
* consistent_union (triple grammar): line value multisets are equal across
  all lines of the matrix.

Each of these uniquely determines the bottom-right value given the rest of
the matrix, so a candidate that differs from the true answer in any governed
attribute is rejected by the verifier; distractors are built exactly that
way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rules import (
    AbstractStructure,
    Grammar,
    PairAttribute,
    PairRelation,
    Rule,
    TripleAttribute,
    TripleObject,
    TripleRelation,
    pair_rule,
    triple_rule,
)

ROW, COL = 0, 1

TYPE_LEVELS = 4
SIZE_LEVELS = 5
COLOR_LEVELS = 5

DEFAULT_PANEL_SIZE = 28

# Foreground intensity per color level; background stays at 255.
COLOR_INTENSITY = (230, 180, 130, 80, 30)


class GenerationError(RuntimeError):
    """Raised when bounded retries cannot satisfy the declared constraints."""


@dataclass(frozen=True)
class Layout:
    name: str
    grammar: Grammar
    cell_grid: int          # panels hold objects on a cell_grid x cell_grid grid
    min_count: int
    max_count: int


LAYOUTS = {
    "center": Layout("center", Grammar.PAIR, 1, 1, 1),
    "grid2x2": Layout("grid2x2", Grammar.PAIR, 2, 1, 4),
    "grid3x3": Layout("grid3x3", Grammar.TRIPLE, 3, 1, 4),
}


def get_layout(name: str) -> Layout:
    try:
        return LAYOUTS[name]
    except KeyError:
        raise ValueError(f"unknown layout {name!r}; valid layouts: {sorted(LAYOUTS)}") from None


@dataclass(frozen=True)
class PanelSpec:
    """Symbolic panel content: occupied cells plus shared object attributes."""

    positions: tuple          # sorted distinct cell ids, row-major
    shape_type: int
    size: int
    color: int

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(sorted(self.positions)))
        if len(set(self.positions)) != len(self.positions):
            raise ValueError("panel positions must be distinct")
        if not 0 <= self.shape_type < TYPE_LEVELS:
            raise ValueError(f"shape type {self.shape_type} out of range")
        if not 0 <= self.size < SIZE_LEVELS:
            raise ValueError(f"size level {self.size} out of range")
        if not 0 <= self.color < COLOR_LEVELS:
            raise ValueError(f"color level {self.color} out of range")

    @property
    def count(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class AppliedRule:
    """A rule plus the axis it is realized along (rows or columns)."""

    rule: Rule
    axis: int = ROW

    def __post_init__(self):
        if self.axis not in (ROW, COL):
            raise ValueError(f"axis must be {ROW} or {COL}")
        if self.rule.grammar is Grammar.PAIR and self.axis != ROW:
            raise ValueError("pair rules are realized row-wise only")


@dataclass(frozen=True, eq=False)
class RpmInstance:
    """One puzzle: 8 context panels, 8 choices, rules, and the answer index."""

    layout: str
    panel_size: int
    context: tuple            # 8 PanelSpec, row-major positions 1..8 of the grid
    choices: tuple            # 8 PanelSpec
    applied_rules: tuple      # AppliedRule, sorted by rule slot order
    correct_index: int        # 1-based position within choices
    seed: int
    context_rasters: tuple = field(repr=False, default=())
    choice_rasters: tuple = field(repr=False, default=())

    def __post_init__(self):
        if len(self.context) != 8 or len(self.choices) != 8:
            raise ValueError("an instance needs 8 context panels and 8 choices")
        if not 1 <= self.correct_index <= 8:
            raise ValueError(f"correct_index must be in 1..8, got {self.correct_index}")
        if not self.applied_rules:
            raise ValueError("an instance needs at least one rule")

    @property
    def structure(self) -> AbstractStructure:
        return AbstractStructure(frozenset(a.rule for a in self.applied_rules))

    @property
    def grammar(self) -> Grammar:
        return get_layout(self.layout).grammar

    @property
    def correct_choice(self) -> PanelSpec:
        return self.choices[self.correct_index - 1]

    def rasters(self) -> tuple:
        """All 16 rasters, context first."""
        return self.context_rasters + self.choice_rasters

    def with_rasters(self, context_rasters, choice_rasters) -> "RpmInstance":
        return RpmInstance(
            layout=self.layout,
            panel_size=self.panel_size,
            context=self.context,
            choices=self.choices,
            applied_rules=self.applied_rules,
            correct_index=self.correct_index,
            seed=self.seed,
            context_rasters=tuple(context_rasters),
            choice_rasters=tuple(choice_rasters),
        )


def instances_equal(a: RpmInstance, b: RpmInstance) -> bool:
    """Deep equality including rasters; used by round-trip checks."""
    if (a.layout, a.panel_size, a.context, a.choices, a.applied_rules,
            a.correct_index, a.seed) != (b.layout, b.panel_size, b.context,
            b.choices, b.applied_rules, b.correct_index, b.seed):
        return False
    if len(a.context_rasters) != len(b.context_rasters):
        return False
    if len(a.choice_rasters) != len(b.choice_rasters):
        return False
    return all(np.array_equal(x, y) for x, y in zip(a.rasters(), b.rasters()))


# --------------------------------------------------------------------------
# structure sampling

# Relations a layout can realize per attribute.  Number and Position are
# never governed together (the position set determines the count, so two
# independent rules on them are unsatisfiable in general).
_PAIR_SCALAR_RELATIONS = {
    PairAttribute.TYPE: (PairRelation.CONSTANT, PairRelation.PROGRESSION,
                         PairRelation.DISTRIBUTE_THREE),
    PairAttribute.SIZE: (PairRelation.CONSTANT, PairRelation.PROGRESSION,
                         PairRelation.ARITHMETIC, PairRelation.DISTRIBUTE_THREE),
    PairAttribute.COLOR: (PairRelation.CONSTANT, PairRelation.PROGRESSION,
                          PairRelation.ARITHMETIC, PairRelation.DISTRIBUTE_THREE),
}
_PAIR_NUMBER_RELATIONS = (PairRelation.CONSTANT, PairRelation.PROGRESSION,
                          PairRelation.ARITHMETIC, PairRelation.DISTRIBUTE_THREE)
_PAIR_POSITION_RELATIONS = (PairRelation.CONSTANT, PairRelation.DISTRIBUTE_THREE)

_TRIPLE_RELATIONS = {
    TripleAttribute.SIZE: (TripleRelation.PROGRESSION, TripleRelation.CONSISTENT_UNION),
    TripleAttribute.TYPE: (TripleRelation.PROGRESSION, TripleRelation.CONSISTENT_UNION),
    TripleAttribute.COLOR: (TripleRelation.PROGRESSION, TripleRelation.CONSISTENT_UNION),
    TripleAttribute.NUMBER: (TripleRelation.PROGRESSION, TripleRelation.CONSISTENT_UNION),
    TripleAttribute.POSITION: (TripleRelation.XOR, TripleRelation.OR, TripleRelation.AND),
}


def supported_rules(layout_name: str) -> tuple:
    """Every rule the layout's sampler can emit, in rule slot order."""
    layout = get_layout(layout_name)
    rules = set()
    if layout.grammar is Grammar.PAIR:
        if layout.cell_grid == 1:
            rules.add(pair_rule(PairRelation.CONSTANT, PairAttribute.NUMBER))
            rules.add(pair_rule(PairRelation.CONSTANT, PairAttribute.POSITION))
        else:
            for rel in _PAIR_NUMBER_RELATIONS:
                rules.add(pair_rule(rel, PairAttribute.NUMBER))
            for rel in _PAIR_POSITION_RELATIONS:
                rules.add(pair_rule(rel, PairAttribute.POSITION))
        for attr, rels in _PAIR_SCALAR_RELATIONS.items():
            for rel in rels:
                rules.add(pair_rule(rel, attr))
    else:
        for attr, rels in _TRIPLE_RELATIONS.items():
            for rel in rels:
                rules.add(triple_rule(rel, TripleObject.SHAPE, attr))
    return tuple(sorted(rules, key=Rule.sort_key))


def sample_structure(layout_name: str, rng: np.random.Generator) -> tuple:
    """Sample the applied rules of one instance.

    center: all five attributes governed (Number and Position are forced to
    Constant by the single-cell grid).  grid2x2: four rules -- one of
    Number/Position plus Type, Size, Color.  grid3x3: 1-4 rules over
    distinct attributes, each realized row- or column-wise.
    """
    layout = get_layout(layout_name)
    applied = []
    if layout.grammar is Grammar.PAIR:
        if layout.cell_grid == 1:
            applied.append(AppliedRule(pair_rule(PairRelation.CONSTANT, PairAttribute.NUMBER)))
            applied.append(AppliedRule(pair_rule(PairRelation.CONSTANT, PairAttribute.POSITION)))
        else:
            if rng.integers(2) == 0:
                rel = _PAIR_NUMBER_RELATIONS[rng.integers(len(_PAIR_NUMBER_RELATIONS))]
                applied.append(AppliedRule(pair_rule(rel, PairAttribute.NUMBER)))
            else:
                rel = _PAIR_POSITION_RELATIONS[rng.integers(len(_PAIR_POSITION_RELATIONS))]
                applied.append(AppliedRule(pair_rule(rel, PairAttribute.POSITION)))
        for attr in (PairAttribute.TYPE, PairAttribute.SIZE, PairAttribute.COLOR):
            rels = _PAIR_SCALAR_RELATIONS[attr]
            applied.append(AppliedRule(pair_rule(rels[rng.integers(len(rels))], attr)))
    else:
        n_rules = int(rng.integers(1, 5))
        pool = [TripleAttribute.SIZE, TripleAttribute.TYPE, TripleAttribute.COLOR,
                TripleAttribute.POSITION, TripleAttribute.NUMBER]
        while True:
            picks = rng.choice(len(pool), size=n_rules, replace=False)
            attrs = [pool[i] for i in picks]
            if not (TripleAttribute.POSITION in attrs and TripleAttribute.NUMBER in attrs):
                break
        for attr in attrs:
            rels = _TRIPLE_RELATIONS[attr]
            rel = rels[rng.integers(len(rels))]
            axis = int(rng.integers(2))
            applied.append(AppliedRule(triple_rule(rel, TripleObject.SHAPE, attr), axis=axis))
    applied.sort(key=lambda a: a.rule.sort_key())
    return tuple(applied)


# --------------------------------------------------------------------------
# matrix realization

def _attr_range(attr) -> tuple:
    if attr in (PairAttribute.TYPE, TripleAttribute.TYPE):
        return 0, TYPE_LEVELS - 1
    if attr in (PairAttribute.SIZE, TripleAttribute.SIZE):
        return 0, SIZE_LEVELS - 1
    if attr in (PairAttribute.COLOR, TripleAttribute.COLOR):
        return 0, COLOR_LEVELS - 1
    raise ValueError(f"{attr!r} is not a scalar level attribute")


def _is_progression(rel) -> bool:
    return rel in (PairRelation.PROGRESSION, TripleRelation.PROGRESSION)


def _realize_scalar_lines(rel, lo: int, hi: int, rng: np.random.Generator) -> list:
    """Three lines of three values satisfying the relation, range [lo, hi]."""
    if rel is PairRelation.CONSTANT:
        return [[int(rng.integers(lo, hi + 1))] * 3 for _ in range(3)]
    if _is_progression(rel):
        deltas = [d for d in (-2, -1, 1, 2) if hi - lo >= 2 * abs(d)]
        delta = deltas[rng.integers(len(deltas))]
        lines = []
        for _ in range(3):
            start_lo = lo if delta > 0 else lo - 2 * delta
            start_hi = hi - 2 * delta if delta > 0 else hi
            a = int(rng.integers(start_lo, start_hi + 1))
            lines.append([a, a + delta, a + 2 * delta])
        return lines
    if rel is PairRelation.ARITHMETIC:
        # sign fixed per matrix; second operand >= max(1, lo) so the pattern
        # is never indistinguishable from Constant
        sign = 1 if rng.integers(2) == 0 else -1
        lines = []
        for _ in range(3):
            while True:
                a = int(rng.integers(lo, hi + 1))
                b = int(rng.integers(max(lo, 1), hi + 1))
                c = a + sign * b
                if lo <= c <= hi:
                    lines.append([a, b, c])
                    break
        return lines
    if rel in (PairRelation.DISTRIBUTE_THREE, TripleRelation.CONSISTENT_UNION):
        if rel is PairRelation.DISTRIBUTE_THREE:
            values = rng.choice(np.arange(lo, hi + 1), size=3, replace=False)
        else:
            while True:
                values = rng.integers(lo, hi + 1, size=3)
                if len(set(values.tolist())) >= 2:
                    break
        values = [int(v) for v in values]
        return [[values[j] for j in rng.permutation(3)] for _ in range(3)]
    raise ValueError(f"unsupported scalar relation {rel!r}")


def _random_cells(n_cells: int, count: int, rng: np.random.Generator) -> tuple:
    return tuple(sorted(int(c) for c in rng.choice(n_cells, size=count, replace=False)))


def _realize_position_lines(rel, layout: Layout, rng: np.random.Generator,
                            max_tries: int = 200) -> list:
    """Three lines of three cell sets satisfying a position relation."""
    n_cells = layout.cell_grid**2
    lo, hi = layout.min_count, layout.max_count
    if rel is PairRelation.CONSTANT:
        lines = []
        for _ in range(3):
            cells = _random_cells(n_cells, int(rng.integers(lo, hi + 1)), rng)
            lines.append([cells] * 3)
        return lines
    if rel is PairRelation.DISTRIBUTE_THREE:
        seen = set()
        while len(seen) < 3:
            seen.add(_random_cells(n_cells, int(rng.integers(lo, hi + 1)), rng))
        sets = sorted(seen)
        return [[sets[j] for j in rng.permutation(3)] for _ in range(3)]
    if rel in (TripleRelation.XOR, TripleRelation.OR, TripleRelation.AND):
        lines = []
        for _ in range(3):
            for _ in range(max_tries):
                a = set(_random_cells(n_cells, int(rng.integers(lo, hi + 1)), rng))
                b = set(_random_cells(n_cells, int(rng.integers(lo, hi + 1)), rng))
                c = _apply_set_op(rel, a, b)
                if lo <= len(c) <= hi and a != b:
                    lines.append([tuple(sorted(a)), tuple(sorted(b)), tuple(sorted(c))])
                    break
            else:
                raise GenerationError(f"could not realize {rel.name} on positions")
        return lines
    raise ValueError(f"unsupported position relation {rel!r}")


def _apply_set_op(rel, a: set, b: set) -> set:
    if rel is TripleRelation.XOR:
        return a ^ b
    if rel is TripleRelation.OR:
        return a | b
    if rel is TripleRelation.AND:
        return a & b
    raise ValueError(f"{rel!r} is not a set operation")


def _orient(lines: list, axis: int) -> list:
    """Lines-of-values -> 3x3 grid, lines taken as rows or as columns."""
    grid = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            if axis == ROW:
                grid[i][j] = lines[i][j]
            else:
                grid[j][i] = lines[i][j]
    return grid


def realize_matrix(applied_rules: tuple, layout_name: str,
                   rng: np.random.Generator) -> list:
    """Build the full 3x3 grid of PanelSpec (position 9 is the true answer)."""
    layout = get_layout(layout_name)
    n_cells = layout.cell_grid**2
    governed = {}
    for a in applied_rules:
        attr = a.rule.attribute
        if attr in governed:
            raise ValueError(f"attribute {attr!r} governed twice")
        governed[attr] = a

    def scalar_plane(attr_pair, attr_triple, lo, hi):
        key = attr_pair if layout.grammar is Grammar.PAIR else attr_triple
        if key in governed:
            a = governed[key]
            return _orient(_realize_scalar_lines(a.rule.relation, lo, hi, rng), a.axis)
        return [[int(rng.integers(lo, hi + 1)) for _ in range(3)] for _ in range(3)]

    pos_attr = PairAttribute.POSITION if layout.grammar is Grammar.PAIR else TripleAttribute.POSITION
    num_attr = PairAttribute.NUMBER if layout.grammar is Grammar.PAIR else TripleAttribute.NUMBER

    if layout.cell_grid == 1:
        positions = [[(0,)] * 3 for _ in range(3)]
    elif pos_attr in governed:
        a = governed[pos_attr]
        positions = _orient(_realize_position_lines(a.rule.relation, layout, rng), a.axis)
    elif num_attr in governed:
        a = governed[num_attr]
        counts = _orient(
            _realize_scalar_lines(a.rule.relation, layout.min_count, layout.max_count, rng),
            a.axis,
        )
        positions = [[_random_cells(n_cells, counts[i][j], rng) for j in range(3)]
                     for i in range(3)]
    else:
        positions = [[_random_cells(n_cells, int(rng.integers(layout.min_count,
                                                              layout.max_count + 1)), rng)
                      for _ in range(3)] for _ in range(3)]

    types = scalar_plane(PairAttribute.TYPE, TripleAttribute.TYPE, 0, TYPE_LEVELS - 1)
    sizes = scalar_plane(PairAttribute.SIZE, TripleAttribute.SIZE, 0, SIZE_LEVELS - 1)
    colors = scalar_plane(PairAttribute.COLOR, TripleAttribute.COLOR, 0, COLOR_LEVELS - 1)

    return [
        [PanelSpec(positions[i][j], types[i][j], sizes[i][j], colors[i][j]) for j in range(3)]
        for i in range(3)
    ]


# --------------------------------------------------------------------------
# verification

def _plane_value(panel: PanelSpec, attr):
    if attr in (PairAttribute.NUMBER, TripleAttribute.NUMBER):
        return panel.count
    if attr in (PairAttribute.POSITION, TripleAttribute.POSITION):
        return frozenset(panel.positions)
    if attr in (PairAttribute.TYPE, TripleAttribute.TYPE):
        return panel.shape_type
    if attr in (PairAttribute.SIZE, TripleAttribute.SIZE):
        return panel.size
    if attr in (PairAttribute.COLOR, TripleAttribute.COLOR):
        return panel.color
    raise ValueError(f"unknown attribute {attr!r}")


def _check_last_line(applied: AppliedRule, grid_values: list) -> bool:
    """Does the last row (or column) satisfy the rule, given the full grid?"""
    if applied.axis == ROW:
        ref = grid_values[0]
        mid = grid_values[1]
        line = grid_values[2]
    else:
        ref = [grid_values[i][0] for i in range(3)]
        mid = [grid_values[i][1] for i in range(3)]
        line = [grid_values[i][2] for i in range(3)]
    rel = applied.rule.relation

    if rel is PairRelation.CONSTANT:
        return line[0] == line[1] == line[2]
    if _is_progression(rel):
        delta = ref[1] - ref[0]
        if delta == 0 or ref[2] - ref[1] != delta:
            return False
        return line[1] - line[0] == delta and line[2] - line[1] == delta
    if rel is PairRelation.ARITHMETIC:
        signs = [s for s in (1, -1)
                 if ref[2] == ref[0] + s * ref[1] and mid[2] == mid[0] + s * mid[1]]
        return any(line[2] == line[0] + s * line[1] for s in signs)
    if rel is PairRelation.DISTRIBUTE_THREE:
        target = frozenset(ref)
        return len(target) == 3 and frozenset(line) == target and len(set(line)) == 3
    if rel is TripleRelation.CONSISTENT_UNION:
        return sorted(line) == sorted(ref)
    if rel in (TripleRelation.XOR, TripleRelation.OR, TripleRelation.AND):
        return frozenset(line[2]) == frozenset(_apply_set_op(rel, set(line[0]), set(line[1])))
    raise ValueError(f"unsupported relation {rel!r}")


def verify(instance: RpmInstance) -> set:
    """Indices (1-based) of the choices that satisfy every rule.

    Each candidate is substituted into the bottom-right slot and every rule
    is evaluated on the bottom row (or the right column, for rules realized
    column-wise), using the rest of the matrix as context.  Depends only on
    the symbolic content of the instance.
    """
    if not instance.applied_rules:
        raise ValueError("instance has an empty structure")
    passing = set()
    for index, candidate in enumerate(instance.choices, start=1):
        panels = list(instance.context) + [candidate]
        ok = True
        for applied in instance.applied_rules:
            values = [[_plane_value(panels[3 * i + j], applied.rule.attribute)
                       for j in range(3)] for i in range(3)]
            if not _check_last_line(applied, values):
                ok = False
                break
        if ok:
            passing.add(index)
    return passing


# --------------------------------------------------------------------------
# candidate generation

def _perturbable_attributes(applied_rules: tuple, layout: Layout) -> list:
    attrs = []
    for a in applied_rules:
        attr = a.rule.attribute
        if layout.cell_grid == 1 and attr in (PairAttribute.NUMBER, PairAttribute.POSITION):
            continue  # single-cell panels admit no other value
        attrs.append(attr)
    return attrs


def _perturb_panel(answer: PanelSpec, attrs: list, layout: Layout,
                   rng: np.random.Generator) -> PanelSpec:
    """Shift 1-2 governed attributes of the answer to different values."""
    n_cells = layout.cell_grid**2
    n_changes = 1 if len(attrs) == 1 else int(rng.integers(1, 3))
    picks = rng.choice(len(attrs), size=n_changes, replace=False)
    positions, shape_type, size, color = (answer.positions, answer.shape_type,
                                          answer.size, answer.color)
    for i in picks:
        attr = attrs[i]
        if attr in (PairAttribute.TYPE, TripleAttribute.TYPE):
            shape_type = _other_level(shape_type, TYPE_LEVELS, rng)
        elif attr in (PairAttribute.SIZE, TripleAttribute.SIZE):
            size = _other_level(size, SIZE_LEVELS, rng)
        elif attr in (PairAttribute.COLOR, TripleAttribute.COLOR):
            color = _other_level(color, COLOR_LEVELS, rng)
        elif attr in (PairAttribute.NUMBER, TripleAttribute.NUMBER):
            new_count = layout.min_count + _other_level(
                answer.count - layout.min_count,
                layout.max_count - layout.min_count + 1, rng)
            positions = _random_cells(n_cells, new_count, rng)
        elif attr in (PairAttribute.POSITION, TripleAttribute.POSITION):
            while True:
                cand = _random_cells(
                    n_cells, int(rng.integers(layout.min_count, layout.max_count + 1)), rng)
                if cand != answer.positions:
                    positions = cand
                    break
    return PanelSpec(positions, shape_type, size, color)


def _other_level(current: int, n_levels: int, rng: np.random.Generator) -> int:
    shift = int(rng.integers(1, n_levels))
    return (current + shift) % n_levels


def generate_candidates(answer: PanelSpec, applied_rules: tuple, context: tuple,
                        layout_name: str, rng: np.random.Generator,
                        max_tries: int = 500) -> tuple:
    """Return (choices, correct_index): 7 rejected distractors plus the answer.

    Every distractor differs from the answer in at least one governed
    attribute, so the verifier rejects it; all 8 panels are pairwise
    distinct and the answer slot is drawn uniformly.
    """
    layout = get_layout(layout_name)
    attrs = _perturbable_attributes(applied_rules, layout)
    if not attrs:
        raise GenerationError("no perturbable governed attribute")
    distractors = []
    seen = {answer}
    tries = 0
    while len(distractors) < 7:
        tries += 1
        if tries > max_tries:
            raise GenerationError("could not build 7 distinct rejected distractors")
        candidate = _perturb_panel(answer, attrs, layout, rng)
        if candidate in seen:
            continue
        seen.add(candidate)
        distractors.append(candidate)
    correct_index = int(rng.integers(1, 9))
    choices = distractors[: correct_index - 1] + [answer] + distractors[correct_index - 1 :]
    return tuple(choices), correct_index


# --------------------------------------------------------------------------
# rasterization

def _shape_mask(shape_type: int, x0: int, y0: int, width: int, size: int) -> np.ndarray:
    """Boolean mask of one filled shape inside its bounding box."""
    yy, xx = np.mgrid[0:size, 0:size]
    cx = x0 + (width - 1) / 2.0
    cy = y0 + (width - 1) / 2.0
    half = width / 2.0
    inside_box = (xx >= x0) & (xx < x0 + width) & (yy >= y0) & (yy < y0 + width)
    if shape_type == 0:  # square
        return inside_box
    if shape_type == 1:  # circle
        return (xx - cx) ** 2 + (yy - cy) ** 2 <= half**2
    if shape_type == 2:  # upward triangle
        return inside_box & (np.abs(xx - cx) <= (yy - y0 + 1) / 2.0)
    if shape_type == 3:  # diamond
        return np.abs(xx - cx) + np.abs(yy - cy) <= half
    raise ValueError(f"unknown shape type {shape_type}")


def shape_width(size_level: int, cell_width: int) -> int:
    """Monotone, collision-free width ladder for the five size levels."""
    w_max = cell_width - 2
    step = max(1, (w_max - 3) // 4)
    w_min = w_max - 4 * step
    return w_min + size_level * step


def rasterize(panel: PanelSpec, size: int = DEFAULT_PANEL_SIZE,
              cell_grid: int = 1) -> np.ndarray:
    """Render a panel to uint8 grayscale; white background, darker foreground.

    Deterministic, no anti-aliasing: shapes are filled masks whose intensity
    encodes the color level.  An empty panel renders as pure background.
    """
    canvas = np.full((size, size), 255, dtype=np.uint8)
    if not panel.positions:
        return canvas
    cell = size // cell_grid
    margin = (size - cell * cell_grid) // 2
    width = shape_width(panel.size, cell)
    intensity = COLOR_INTENSITY[panel.color]
    for pos in panel.positions:
        row, col = divmod(pos, cell_grid)
        x0 = margin + col * cell + (cell - width) // 2
        y0 = margin + row * cell + (cell - width) // 2
        mask = _shape_mask(panel.shape_type, x0, y0, width, size)
        canvas[mask] = intensity
    return canvas


def rasterize_instance(instance: RpmInstance) -> RpmInstance:
    layout = get_layout(instance.layout)
    ctx = tuple(rasterize(p, instance.panel_size, layout.cell_grid) for p in instance.context)
    cho = tuple(rasterize(p, instance.panel_size, layout.cell_grid) for p in instance.choices)
    return instance.with_rasters(ctx, cho)


# --------------------------------------------------------------------------
# top-level generation

def instance_seed(dataset_seed: int, index: int) -> int:
    """Stable 64-bit stream seed for instance `index` of a dataset."""
    state = np.random.SeedSequence([dataset_seed, index]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def generate_instance(layout_name: str, seed: int,
                      panel_size: int = DEFAULT_PANEL_SIZE,
                      max_tries: int = 50) -> RpmInstance:
    """Generate one verified instance from a 64-bit seed."""
    layout = get_layout(layout_name)
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        try:
            applied = sample_structure(layout_name, rng)
            grid = realize_matrix(applied, layout_name, rng)
            context = tuple(grid[i][j] for i in range(3) for j in range(3))[:8]
            answer = grid[2][2]
            choices, correct_index = generate_candidates(
                answer, applied, context, layout_name, rng)
        except GenerationError:
            continue
        instance = RpmInstance(
            layout=layout.name,
            panel_size=panel_size,
            context=context,
            choices=choices,
            applied_rules=applied,
            correct_index=correct_index,
            seed=seed,
        )
        satisfying = verify(instance)
        if satisfying != {correct_index}:
            # every relation forces a unique bottom-right value, so this
            # indicates a realizer/verifier inconsistency, not bad luck
            raise RuntimeError(
                f"generated instance is not uniquely solvable: verify -> {satisfying}, "
                f"expected {{{correct_index}}} (seed {seed})"
            )
        return rasterize_instance(instance)
    raise GenerationError(f"no realizable instance after {max_tries} attempts (seed {seed})")


def generate_dataset(layout_name: str, count: int, seed: int,
                     panel_size: int = DEFAULT_PANEL_SIZE) -> list:
    """Generate `count` instances; instance i depends only on (seed, i)."""
    get_layout(layout_name)
    return [
        generate_instance(layout_name, instance_seed(seed, i), panel_size)
        for i in range(count)
    ]
