"""Rule grammars, rule-space enumeration, and binary meta-target encodings.

Two grammars describe the abstract structure of a matrix puzzle:

* **pair style** -- rules are [relation, attribute] pairs, tagged with a
  substructure slot (0 or 1) so two-part layouts can apply the same pair to
  both components.  Relations: Constant, Progression, Arithmetic,
  Distribute_Three.  Attributes: Number, Position, Type, Size, Color.
  The combination (Arithmetic, Type) is rejected as invalid, leaving
  19 pair combinations x 2 substructure slots = 38 rules.
* **triple style** -- rules are [relation, object, attribute] triples.
  Relations: progression, XOR, OR, AND, consistent_union.  Objects: shape,
  line.  Attributes: size, type, color, position, number.  5 x 2 x 5 = 50
  rules.

Two meta-target encodings map a structure (a set of rules) to a fixed-length
bit vector; both OR the per-rule encodings together:

* **dense** -- one slot per relation/object/attribute name.  Triple layout
  (12 slots): shape, line, color, number, position, size, type, progression,
  XOR, OR, AND, consistent_union.  Pair layout (9 slots): Constant,
  Progression, Arithmetic, Distribute_Three, Number, Position, Type, Size,
  Color.  Lossy: distinct rule sets can collide (see
  :func:`find_dense_collision`).
* **sparse** -- one slot per rule in :func:`enumerate_rule_space` order
  (38 pair / 50 triple).  Lossless: :func:`decode_sparse` inverts
  :func:`encode_sparse` exactly.

Sparse slot order is lexicographic with the enum declaration orders above:
pair rules sort by (substructure, relation, attribute); triple rules by
(relation, attribute, object).  Serialized form is an ASCII bit-string,
most significant slot first.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache


class Grammar(str, Enum):
    PAIR = "pair"
    TRIPLE = "triple"


class PairRelation(Enum):
    CONSTANT = 0
    PROGRESSION = 1
    ARITHMETIC = 2
    DISTRIBUTE_THREE = 3


class PairAttribute(Enum):
    NUMBER = 0
    POSITION = 1
    TYPE = 2
    SIZE = 3
    COLOR = 4


class TripleRelation(Enum):
    PROGRESSION = 0
    XOR = 1
    OR = 2
    AND = 3
    CONSISTENT_UNION = 4


class TripleObject(Enum):
    SHAPE = 0
    LINE = 1


class TripleAttribute(Enum):
    SIZE = 0
    TYPE = 1
    COLOR = 2
    POSITION = 3
    NUMBER = 4


class Scheme(str, Enum):
    DENSE = "dense"
    SPARSE = "sparse"


@dataclass(frozen=True)
class Rule:
    """One governing rule; identity includes the substructure slot for pairs."""

    grammar: Grammar
    relation: Enum
    attribute: Enum
    obj: TripleObject | None = None
    substructure: int = 0

    def __post_init__(self):
        if self.grammar is Grammar.PAIR:
            if not isinstance(self.relation, PairRelation):
                raise ValueError(f"pair rule needs a PairRelation, got {self.relation!r}")
            if not isinstance(self.attribute, PairAttribute):
                raise ValueError(f"pair rule needs a PairAttribute, got {self.attribute!r}")
            if self.obj is not None:
                raise ValueError("pair rules carry no object type")
            if self.substructure not in (0, 1):
                raise ValueError(f"substructure must be 0 or 1, got {self.substructure}")
            if (self.relation, self.attribute) == (PairRelation.ARITHMETIC, PairAttribute.TYPE):
                raise ValueError("Arithmetic cannot govern Type")
        elif self.grammar is Grammar.TRIPLE:
            if not isinstance(self.relation, TripleRelation):
                raise ValueError(f"triple rule needs a TripleRelation, got {self.relation!r}")
            if not isinstance(self.attribute, TripleAttribute):
                raise ValueError(f"triple rule needs a TripleAttribute, got {self.attribute!r}")
            if not isinstance(self.obj, TripleObject):
                raise ValueError(f"triple rule needs a TripleObject, got {self.obj!r}")
            if self.substructure != 0:
                raise ValueError("triple rules have no substructure slots")
        else:
            raise ValueError(f"unknown grammar {self.grammar!r}")

    def sort_key(self):
        if self.grammar is Grammar.PAIR:
            return (self.substructure, self.relation.value, self.attribute.value)
        return (self.relation.value, self.attribute.value, self.obj.value)

    def __repr__(self):
        if self.grammar is Grammar.PAIR:
            tag = f"/{self.substructure}" if self.substructure else ""
            return f"[{self.relation.name}, {self.attribute.name}{tag}]"
        return f"[{self.relation.name}, {self.obj.name}, {self.attribute.name}]"


def pair_rule(relation, attribute, substructure: int = 0) -> Rule:
    return Rule(Grammar.PAIR, relation, attribute, substructure=substructure)


def triple_rule(relation, obj, attribute) -> Rule:
    return Rule(Grammar.TRIPLE, relation, attribute, obj=obj)


@dataclass(frozen=True)
class AbstractStructure:
    """A deduplicated set of rules, all from one grammar."""

    rules: frozenset

    def __post_init__(self):
        object.__setattr__(self, "rules", frozenset(self.rules))
        grammars = {r.grammar for r in self.rules}
        if len(grammars) > 1:
            raise ValueError("structure mixes rules from different grammars")

    @property
    def grammar(self) -> Grammar:
        if not self.rules:
            raise ValueError("empty structure has no grammar")
        return next(iter(self.rules)).grammar

    def sorted_rules(self) -> tuple:
        return tuple(sorted(self.rules, key=Rule.sort_key))

    def __len__(self):
        return len(self.rules)

    def __repr__(self):
        return "{" + ", ".join(repr(r) for r in self.sorted_rules()) + "}"


def structure(*rules) -> AbstractStructure:
    return AbstractStructure(frozenset(rules))


@dataclass(frozen=True)
class MetaTarget:
    """Fixed-length binary encoding of an abstract structure."""

    scheme: Scheme
    grammar: Grammar
    bits: tuple

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("meta-target bits must be 0 or 1")
        expected = META_LENGTHS[(self.grammar, self.scheme)]
        if len(self.bits) != expected:
            raise ValueError(
                f"{self.grammar.value}/{self.scheme.value} meta-target must have "
                f"{expected} bits, got {len(self.bits)}"
            )

    def __len__(self):
        return len(self.bits)

    @property
    def bitstring(self) -> str:
        return "".join(str(b) for b in self.bits)

    @classmethod
    def from_bitstring(cls, scheme: Scheme, grammar: Grammar, text: str) -> "MetaTarget":
        if set(text) - {"0", "1"}:
            raise ValueError(f"invalid bit-string {text!r}")
        return cls(scheme, grammar, tuple(int(ch) for ch in text))


META_LENGTHS = {
    (Grammar.PAIR, Scheme.DENSE): 9,
    (Grammar.PAIR, Scheme.SPARSE): 38,
    (Grammar.TRIPLE, Scheme.DENSE): 12,
    (Grammar.TRIPLE, Scheme.SPARSE): 50,
}

# Dense slot layouts.  The triple layout interleaves objects, attributes and
# relations in this fixed order; the pair layout lists the 4 relations then
# the 5 attributes.
_TRIPLE_DENSE_SLOTS = 12
_TRIPLE_DENSE_OBJECT = {TripleObject.SHAPE: 0, TripleObject.LINE: 1}
_TRIPLE_DENSE_ATTRIBUTE = {
    TripleAttribute.COLOR: 2,
    TripleAttribute.NUMBER: 3,
    TripleAttribute.POSITION: 4,
    TripleAttribute.SIZE: 5,
    TripleAttribute.TYPE: 6,
}
_TRIPLE_DENSE_RELATION = {
    TripleRelation.PROGRESSION: 7,
    TripleRelation.XOR: 8,
    TripleRelation.OR: 9,
    TripleRelation.AND: 10,
    TripleRelation.CONSISTENT_UNION: 11,
}
_PAIR_DENSE_SLOTS = 9


@lru_cache(maxsize=None)
def enumerate_rule_space(grammar: Grammar) -> tuple:
    """All rules of a grammar in the documented sparse slot order."""
    grammar = Grammar(grammar)
    if grammar is Grammar.PAIR:
        rules = [
            pair_rule(rel, attr, sub)
            for sub in (0, 1)
            for rel in PairRelation
            for attr in PairAttribute
            if (rel, attr) != (PairRelation.ARITHMETIC, PairAttribute.TYPE)
        ]
    else:
        rules = [
            triple_rule(rel, obj, attr)
            for rel in TripleRelation
            for attr in TripleAttribute
            for obj in TripleObject
        ]
    return tuple(sorted(rules, key=Rule.sort_key))


@lru_cache(maxsize=None)
def _sparse_index_map(grammar: Grammar) -> dict:
    return {rule: i for i, rule in enumerate(enumerate_rule_space(grammar))}


def sparse_index(rule: Rule) -> int:
    return _sparse_index_map(rule.grammar)[rule]


def _dense_rule_bits(rule: Rule) -> tuple:
    if rule.grammar is Grammar.TRIPLE:
        bits = [0] * _TRIPLE_DENSE_SLOTS
        bits[_TRIPLE_DENSE_OBJECT[rule.obj]] = 1
        bits[_TRIPLE_DENSE_ATTRIBUTE[rule.attribute]] = 1
        bits[_TRIPLE_DENSE_RELATION[rule.relation]] = 1
    else:
        # relation slots 0-3, attribute slots 4-8; substructure is not
        # representable in this layout, which is one source of its lossiness
        bits = [0] * _PAIR_DENSE_SLOTS
        bits[rule.relation.value] = 1
        bits[4 + rule.attribute.value] = 1
    return tuple(bits)


def encode_dense(s: AbstractStructure) -> MetaTarget:
    """OR together the per-rule multi-hot strings of a nonempty structure."""
    if not s.rules:
        raise ValueError("cannot encode an empty structure")
    acc = None
    for rule in s.sorted_rules():
        bits = _dense_rule_bits(rule)
        acc = bits if acc is None else tuple(a | b for a, b in zip(acc, bits))
    return MetaTarget(Scheme.DENSE, s.grammar, acc)


def encode_sparse(s: AbstractStructure) -> MetaTarget:
    """OR together one-hot rule indicators; popcount equals the rule count."""
    if not s.rules:
        raise ValueError("cannot encode an empty structure")
    grammar = s.grammar
    bits = [0] * META_LENGTHS[(grammar, Scheme.SPARSE)]
    for rule in s.rules:
        bits[sparse_index(rule)] = 1
    return MetaTarget(Scheme.SPARSE, grammar, tuple(bits))


def decode_sparse(target: MetaTarget) -> AbstractStructure:
    """Invert encode_sparse; exact for every valid structure."""
    if target.scheme is not Scheme.SPARSE:
        raise ValueError("dense encoding is not invertible")
    space = enumerate_rule_space(target.grammar)
    rules = frozenset(space[i] for i, bit in enumerate(target.bits) if bit)
    if not rules:
        raise ValueError("all-zero meta-target decodes to an empty structure")
    return AbstractStructure(rules)


def find_dense_collision(grammar: Grammar):
    """Two distinct structures of size <= 2 with identical dense encodings.

    Searches singletons and unordered rule pairs exhaustively in slot order,
    so the result is deterministic.
    """
    grammar = Grammar(grammar)
    space = enumerate_rule_space(grammar)
    seen = {}
    candidates = itertools.chain(
        (structure(r) for r in space),
        (structure(a, b) for a, b in itertools.combinations(space, 2)),
    )
    for s in candidates:
        key = encode_dense(s).bits
        if key in seen and seen[key] != s:
            return seen[key], s
        seen.setdefault(key, s)
    raise RuntimeError(f"no dense collision among size-<=2 {grammar.value} structures")
