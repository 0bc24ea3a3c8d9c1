import random

import pytest
from hypothesis import given, settings, strategies as st

from tdparse.evaluation import (
    AlignmentError,
    EvalReport,
    OracleRefusal,
    constituents,
    edited_metric,
    evaluate,
    exhaustive_parse,
    parseval,
)
from tdparse.grammar import PCFG, START, induce_pcfg
from tdparse.treebank import parse_bracketed

from conftest import random_tree

NP_ATTACH = ("(S (NP (DT the) (NN thief)) (VP (VBD saw) (NP (NP (DT the) (NN cop)) "
             "(PP (IN with) (NP (DT the) (NNS binoculars))))))")
VP_ATTACH = ("(S (NP (DT the) (NN thief)) (VP (VBD saw) (NP (DT the) (NN cop)) "
             "(PP (IN with) (NP (DT the) (NNS binoculars)))))")


@pytest.fixture
def pair():
    return parse_bracketed(NP_ATTACH)[0], parse_bracketed(VP_ATTACH)[0]


def test_constituent_enumeration(pair):
    a, b = pair
    ca, _ = constituents(a)
    cb, _ = constituents(b)
    assert sum(ca.values()) == 7 and sum(cb.values()) == 6
    assert ca - cb == {("NP", 3, 8): 1}


def test_attachment_pair(pair):
    gold, test = pair
    s = parseval(gold, test)
    assert (s.matched, s.gold, s.test, s.crossing) == (6, 7, 6, 0)
    assert s.recall == 100.0 * 6 / 7
    assert s.precision == 100.0


def test_swap_exchanges_recall_and_precision(pair):
    a, b = pair
    s1, s2 = parseval(a, b), parseval(b, a)
    assert (s1.recall, s1.precision) == (s2.precision, s2.recall)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_identity_scores_perfectly(seed):
    t = random_tree(random.Random(seed))
    rep = evaluate([t], [t])
    if constituents(t)[1]:
        assert (rep.LR, rep.LP, rep.CB) == (100.0, 100.0, 0.0)


def test_multiset_matching():
    g = parse_bracketed("(S (NP (NP (NN a))) (VP (VB b)))")[0]
    t = parse_bracketed("(S (NP (NN a)) (VP (VB b)))")[0]
    s = parseval(g, t)
    assert (s.matched, s.gold, s.test) == (3, 4, 3)


def test_crossing_counted_once_per_test_constituent():
    g = parse_bracketed("(S (A (X a) (X b)) (B (X c) (X d)))")[0]
    t = parse_bracketed("(S (X a) (C (X b) (X c)) (X d))")[0]
    assert parseval(g, t).crossing == 1


def test_punctuation_and_equivalences():
    g = parse_bracketed("(S (PRN (RB so)) (, ,) (VP (VB go)) (. .))")[0]
    t = parse_bracketed("(S (ADVP (RB so)) (VP (VB go) (, ,)) (. .))")[0]
    s = parseval(g, t)
    assert s.matched == s.gold == s.test == 3


def test_yield_mismatch():
    with pytest.raises(AlignmentError):
        parseval(parse_bracketed("(S (X a))")[0], parse_bracketed("(S (X b))")[0])
    with pytest.raises(AlignmentError):
        evaluate([parse_bracketed("(S (X a))")[0]], [])


class TestEdited:
    def test_flattening(self):
        g = parse_bracketed("(S (EDITED (NP (PRP I))) (NP (PRP I)) (VP (VBP go)))")[0]
        t = parse_bracketed("(S (EDITED (PRP I)) (NP (PRP I)) (VP (VBP go)))")[0]
        s = edited_metric(g, t)
        assert s.matched == s.gold == s.test

    def test_adjacent_nodes_merge(self):
        g = parse_bracketed("(S (EDITED (NP (PRP I))) (EDITED (VP (VBP um))) (NP (PRP I)) (VP (VBP go)))")[0]
        t = parse_bracketed("(S (EDITED (NP (PRP I)) (VP (VBP um))) (NP (PRP I)) (VP (VBP go)))")[0]
        s = edited_metric(g, t)
        assert s.matched == s.gold == s.test

    def test_modified_metric_is_kinder_on_edited_spans(self):
        g = parse_bracketed("(S (EDITED (PP (IN within) (NP (PRP$ your)))) (INTJ (UH uh)) "
                            "(PP (IN within) (NP (PRP$ your) (NN reach))))")[0]
        t = parse_bracketed("(S (EDITED (IN within) (NP (PRP$ your))) (INTJ (UH uh)) "
                            "(PP (IN within) (NP (PRP$ your) (NN reach))))")[0]
        std = parseval(g, t)
        mod = edited_metric(g, t)
        assert std.recall < 100.0
        assert mod.recall == mod.precision == 100.0

    def test_edited_extent_errors_still_count(self):
        g = parse_bracketed("(S (INTJ (UH Oh)) (EDITED (NP (PRP I))) (NP (PRP I)) (VP (VBP go)))")[0]
        t = parse_bracketed("(S (INTJ (UH Oh)) (EDITED (NP (PRP I)) (NP (PRP I))) (VP (VBP go)))")[0]
        assert edited_metric(g, t).matched < edited_metric(g, g).matched


def test_report_fields():
    s = parseval(*parse_bracketed(NP_ATTACH + VP_ATTACH))
    r = EvalReport.from_scores([s, s], failed=1, expansions=100, analyses=50, words=20)
    assert r.failed == 50.0 and r.expansions_per_word == 5.0 and r.analyses_per_word == 2.5
    assert r.zeroCB == 100.0 and r.leq2CB == 100.0
    assert EvalReport.from_scores([]) == EvalReport()


class TestOracle:
    def test_unambiguous(self, toy_trees):
        g = induce_pcfg(toy_trees)
        o = exhaustive_parse(g, toy_trees[0].words())
        assert len(o.parses) == 1
        assert o.string_prob == pytest.approx(g.tree_prob(toy_trees[0]), rel=1e-12)

    def test_pp_attachment(self, toy_trees):
        g = induce_pcfg(toy_trees)
        words = "the moon is the sun of the night".split()
        o = exhaustive_parse(g, words)
        assert len(o.parses) == 2
        hand = sum(g.tree_prob(t) for _, t in o.parses)
        assert o.string_prob == pytest.approx(hand, rel=1e-12)
        assert o.mlp == o.parses[0][1]

    def test_unary_cycles_are_capped(self):
        rules = {(START, ("A",)): 1.0, ("A", ("A",)): 0.5, ("A", ("x",)): 0.5}
        g = PCFG(rules, START, frozenset({START, "A"}), frozenset({"x"}))
        o = exhaustive_parse(g, ["x"], unary_depth=3)
        assert len(o.parses) == 4
        assert o.string_prob == pytest.approx(0.5 + 0.25 + 0.125 + 0.0625)

    def test_refuses_long_input(self, toy_trees):
        g = induce_pcfg(toy_trees)
        with pytest.raises(OracleRefusal):
            exhaustive_parse(g, ["the"] * 16)


def test_parsed_only_scores_skip_failures(pair):
    a, b = pair
    rep = evaluate([a, a], [b, a], failed=[True, False])
    assert rep.LR < 100.0 and rep.failed == 50.0
    assert (rep.LR_parsed, rep.LP_parsed) == (100.0, 100.0)
