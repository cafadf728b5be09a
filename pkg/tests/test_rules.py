import numpy as np
import pytest

from mlcl.rules import (
    AbstractStructure,
    Grammar,
    MetaTarget,
    PairAttribute,
    PairRelation,
    Rule,
    Scheme,
    TripleAttribute,
    TripleObject,
    TripleRelation,
    decode_sparse,
    encode_dense,
    encode_sparse,
    enumerate_rule_space,
    find_dense_collision,
    pair_rule,
    sparse_index,
    structure,
    triple_rule,
)


def random_structure(rng, grammar, max_rules=8):
    space = enumerate_rule_space(grammar)
    k = int(rng.integers(1, max_rules + 1))
    picks = rng.choice(len(space), size=min(k, len(space)), replace=False)
    return AbstractStructure(frozenset(space[i] for i in picks))


class TestRuleSpace:
    def test_triple_has_fifty_rules(self):
        assert len(enumerate_rule_space(Grammar.TRIPLE)) == 50

    def test_pair_has_thirty_eight_rules(self):
        assert len(enumerate_rule_space(Grammar.PAIR)) == 38

    @pytest.mark.parametrize("grammar", [Grammar.PAIR, Grammar.TRIPLE])
    def test_no_duplicates_and_stable_order(self, grammar):
        space = enumerate_rule_space(grammar)
        assert len(set(space)) == len(space)
        assert space == enumerate_rule_space(grammar)
        assert [sparse_index(r) for r in space] == list(range(len(space)))

    def test_arithmetic_type_rejected(self):
        with pytest.raises(ValueError, match="Arithmetic"):
            pair_rule(PairRelation.ARITHMETIC, PairAttribute.TYPE)

    def test_pair_rule_has_no_object(self):
        with pytest.raises(ValueError):
            Rule(Grammar.PAIR, PairRelation.CONSTANT, PairAttribute.SIZE, obj=TripleObject.SHAPE)

    def test_mixed_grammar_structure_rejected(self):
        with pytest.raises(ValueError, match="grammars"):
            structure(
                pair_rule(PairRelation.CONSTANT, PairAttribute.SIZE),
                triple_rule(TripleRelation.OR, TripleObject.SHAPE, TripleAttribute.TYPE),
            )


class TestDenseEncoding:
    def test_or_shape_type(self):
        s = structure(triple_rule(TripleRelation.OR, TripleObject.SHAPE, TripleAttribute.TYPE))
        assert encode_dense(s).bitstring == "100000100100"

    def test_and_line_color(self):
        s = structure(triple_rule(TripleRelation.AND, TripleObject.LINE, TripleAttribute.COLOR))
        assert encode_dense(s).bitstring == "011000000010"

    def test_two_rule_union(self):
        s = structure(
            triple_rule(TripleRelation.OR, TripleObject.SHAPE, TripleAttribute.TYPE),
            triple_rule(TripleRelation.AND, TripleObject.LINE, TripleAttribute.COLOR),
        )
        assert encode_dense(s).bitstring == "111000100110"

    def test_pair_slot_order(self):
        s = structure(pair_rule(PairRelation.CONSTANT, PairAttribute.NUMBER))
        assert encode_dense(s).bitstring == "100010000"
        s = structure(pair_rule(PairRelation.DISTRIBUTE_THREE, PairAttribute.COLOR))
        assert encode_dense(s).bitstring == "000100001"

    def test_empty_structure_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            encode_dense(AbstractStructure(frozenset()))

    @pytest.mark.parametrize("grammar,length", [(Grammar.PAIR, 9), (Grammar.TRIPLE, 12)])
    def test_length_contract(self, grammar, length):
        rng = np.random.default_rng(11)
        for _ in range(20):
            assert len(encode_dense(random_structure(rng, grammar))) == length


class TestSparseEncoding:
    def test_single_rule_is_one_hot(self):
        s = structure(pair_rule(PairRelation.PROGRESSION, PairAttribute.SIZE))
        target = encode_sparse(s)
        assert sum(target.bits) == 1

    def test_two_rules_two_bits(self):
        s = structure(
            pair_rule(PairRelation.PROGRESSION, PairAttribute.SIZE),
            pair_rule(PairRelation.CONSTANT, PairAttribute.COLOR),
        )
        assert sum(encode_sparse(s).bits) == 2

    @pytest.mark.parametrize("grammar", [Grammar.PAIR, Grammar.TRIPLE])
    def test_popcount_equals_rule_count(self, grammar):
        rng = np.random.default_rng(7)
        for _ in range(100):
            s = random_structure(rng, grammar)
            assert sum(encode_sparse(s).bits) == len(s)

    @pytest.mark.parametrize("grammar,length", [(Grammar.PAIR, 38), (Grammar.TRIPLE, 50)])
    def test_length_contract(self, grammar, length):
        rng = np.random.default_rng(13)
        assert len(encode_sparse(random_structure(rng, grammar))) == length

    def test_empty_structure_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            encode_sparse(AbstractStructure(frozenset()))


class TestDecodeSparse:
    @pytest.mark.parametrize("grammar", [Grammar.PAIR, Grammar.TRIPLE])
    def test_round_trip_random(self, grammar):
        rng = np.random.default_rng(5)
        for _ in range(200):
            s = random_structure(rng, grammar)
            assert decode_sparse(encode_sparse(s)) == s

    def test_dense_input_rejected(self):
        s = structure(pair_rule(PairRelation.CONSTANT, PairAttribute.SIZE))
        with pytest.raises(ValueError, match="not invertible"):
            decode_sparse(encode_dense(s))

    def test_all_zero_rejected(self):
        zero = MetaTarget(Scheme.SPARSE, Grammar.PAIR, (0,) * 38)
        with pytest.raises(ValueError, match="empty"):
            decode_sparse(zero)

    def test_popcount_three_gives_three_rules(self):
        bits = [0] * 50
        for i in (3, 17, 42):
            bits[i] = 1
        target = MetaTarget(Scheme.SPARSE, Grammar.TRIPLE, tuple(bits))
        decoded = decode_sparse(target)
        assert len(decoded) == 3
        space = enumerate_rule_space(Grammar.TRIPLE)
        assert decoded.rules == frozenset(space[i] for i in (3, 17, 42))


class TestOrMonotonicity:
    @pytest.mark.parametrize("grammar", [Grammar.PAIR, Grammar.TRIPLE])
    @pytest.mark.parametrize("encode", [encode_dense, encode_sparse])
    def test_union_is_bitwise_or(self, grammar, encode):
        rng = np.random.default_rng(23)
        for _ in range(50):
            s1 = random_structure(rng, grammar, max_rules=4)
            s2 = random_structure(rng, grammar, max_rules=4)
            union = AbstractStructure(s1.rules | s2.rules)
            merged = tuple(a | b for a, b in zip(encode(s1).bits, encode(s2).bits))
            assert encode(union).bits == merged


class TestDenseCollision:
    @pytest.mark.parametrize("grammar", [Grammar.PAIR, Grammar.TRIPLE])
    def test_collision_pair_verified(self, grammar):
        s1, s2 = find_dense_collision(grammar)
        assert s1 != s2
        assert encode_dense(s1).bits == encode_dense(s2).bits
        assert encode_sparse(s1).bits != encode_sparse(s2).bits


class TestSparseInjectivity:
    @pytest.mark.parametrize("grammar", [Grammar.PAIR, Grammar.TRIPLE])
    def test_exhaustive_up_to_size_two(self, grammar):
        import itertools

        space = enumerate_rule_space(grammar)
        seen = {}
        singles = (frozenset([r]) for r in space)
        pairs = (frozenset(p) for p in itertools.combinations(space, 2))
        for rules in itertools.chain(singles, pairs):
            bits = encode_sparse(AbstractStructure(rules)).bits
            assert bits not in seen, f"sparse collision between {seen[bits]} and {rules}"
            seen[bits] = rules


def test_bitstring_round_trip():
    s = structure(pair_rule(PairRelation.CONSTANT, PairAttribute.SIZE, substructure=1))
    target = encode_sparse(s)
    again = MetaTarget.from_bitstring(Scheme.SPARSE, Grammar.PAIR, target.bitstring)
    assert again == target
    assert decode_sparse(again) == s
