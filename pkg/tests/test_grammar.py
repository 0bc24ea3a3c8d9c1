import math
import random
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from tdparse.grammar import (
    START,
    STOP,
    InterpolatedModel,
    InterpolationTable,
    MarkovGrammar,
    WeightedTree,
    estimate_lambdas,
    induce_pcfg,
    markov_child_prob,
    reestimate_em,
    train_markov,
)
from tdparse.treebank import parse_bracketed


def test_induced_grammar_is_normalized(toy_trees):
    g = induce_pcfg(toy_trees)
    assert g.check_normalized()
    assert g.prob(START, ("S",)) == 1.0
    assert g.prob("NP", ("DT", "NN")) == pytest.approx(8 / 9)
    assert g.prob("NN", ("sun",)) == pytest.approx(3 / 8)


def test_tree_probability_by_hand(toy_trees):
    g = induce_pcfg(toy_trees)
    t = toy_trees[0]
    # S->NP VP, 2x NP->DT NN, VP->VBZ NP, 2x DT->the, 2x NN->moon, VBZ->is
    want = 1 * (8 / 9) ** 2 * (2 / 3) * 1 * (3 / 8) ** 2
    assert g.tree_prob(t) == pytest.approx(want, rel=1e-12)


def test_unknown_rule_gives_zero(toy_trees):
    g = induce_pcfg(toy_trees)
    bad = parse_bracketed("(S (VP (VBZ is)))")[0]
    assert g.tree_prob(bad) == 0.0


def test_weights_scale_counts(toy_trees):
    g1 = induce_pcfg([WeightedTree(t, 2.0) for t in toy_trees])
    g2 = induce_pcfg(toy_trees)
    assert g1.rules == pytest.approx(g2.rules)
    with pytest.raises(ValueError):
        induce_pcfg([])


def test_sampling_matches_rule_frequencies(small_grammar, small_sample):
    g = induce_pcfg(small_sample)
    for rule, p in small_grammar.rules.items():
        assert abs(g.rules.get(rule, 0.0) - p) < 0.05


class TestInterpolation:
    def _model(self):
        m = InterpolatedModel(2)
        for ctx, o in [(("a", "x"), 1), (("a", "x"), 1), (("a", "y"), 2), (("b", "x"), 2)]:
            m.observe(ctx, o)
        return m

    def test_witten_bell_by_hand(self):
        m = self._model()
        p0 = 2 / 4
        l1 = 3 / (3 + 2)  # context a: 3 events, 2 outcomes
        p1 = l1 * (2 / 3) + (1 - l1) * p0
        l2 = 2 / (2 + 1)
        p2 = l2 * 1.0 + (1 - l2) * p1
        assert m.prob(("a", "x"), 1) == pytest.approx(p2, rel=1e-12)

    def test_unseen_context_backs_off(self):
        m = self._model()
        assert m.prob(("c", "z"), 1) == pytest.approx(0.5)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.sampled_from("ab"), st.sampled_from("xyz"), st.integers(0, 3)), min_size=1, max_size=40),
           st.sampled_from("abc"), st.sampled_from("xyzw"))
    def test_distribution_sums_to_one(self, events, c1, c2):
        m = InterpolatedModel(2)
        for a, b, o in events:
            m.observe((a, b), o)
        d = m.dist((c1, c2))
        assert math.fsum(d.values()) == pytest.approx(1.0, abs=1e-12)
        for o in d:
            assert d[o] == pytest.approx(m.prob((c1, c2), o), abs=1e-15)

    def test_serialization(self):
        m = self._model()
        m.table.lambdas[(1, 1)] = 0.25
        m2 = InterpolatedModel.from_lines(m.to_lines())
        for ctx in [("a", "x"), ("b", "y"), ("c", "c")]:
            for o in (1, 2):
                assert m2.prob(ctx, o) == m.prob(ctx, o)

    def test_table_validation(self):
        with pytest.raises(ValueError):
            InterpolationTable("median")
        with pytest.raises(ValueError):
            InterpolationTable(boundaries=(0, 2, 1))
        with pytest.raises(ValueError):
            InterpolationTable(lambdas={(1, 1): 1.5})

    def test_buckets(self):
        t = InterpolationTable("freq")
        assert t.bucket(t.score(0, 0)) == 0
        assert t.bucket(t.score(4, 2)) == 3
        t = InterpolationTable("avgcount")
        assert t.bucket(t.score(4, 2)) == 2


def _loglik(lam, train_rf, p0, held):
    return sum(math.log(lam * train_rf[o] + (1 - lam) * p0[o]) for o in held)


def test_lambda_em_finds_the_likelihood_maximum():
    rng = random.Random(5)
    m = InterpolatedModel(1, InterpolationTable("freq", boundaries=(0, 1, 1000)))
    # context "a" is skewed, the marginal is flatter
    for _ in range(400):
        m.observe(("a",), rng.choices("xyz", [0.7, 0.2, 0.1])[0])
        m.observe(("b",), rng.choice("xyz"))
    true_lam = 0.6
    held = []
    ctx_a = m.counts[1][("a",)]
    n_a = sum(ctx_a.values())
    rf = {o: ctx_a[o] / n_a for o in "xyz"}
    p0 = {o: m.counts[0][()][o] / m.totals[0][()] for o in "xyz"}
    mixed = {o: true_lam * rf[o] + (1 - true_lam) * p0[o] for o in "xyz"}
    for _ in range(3000):
        held.append(rng.choices("xyz", [mixed[o] for o in "xyz"])[0])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        table = estimate_lambdas(m, [(("a",), o) for o in held], tol=1e-12, max_iter=2000)
    got = table.lambdas[(1, 1)]
    grid = max((i / 10000 for i in range(1, 10000)), key=lambda l: _loglik(l, rf, p0, held))
    assert abs(got - grid) < 2e-4
    assert abs(got - true_lam) < 0.1


def test_empty_buckets_warn():
    m = InterpolatedModel(1)
    m.observe(("a",), 1)
    with pytest.warns(UserWarning):
        estimate_lambdas(m, [(("a",), 1)])


def test_markov_normalization_on_sampled_contexts(small_sample):
    g = train_markov(small_sample)
    keys = [k for k in g.counts[g.depth]]
    rng = random.Random(0)
    for _ in range(1000):
        ctx = list(rng.choice(keys))
        if rng.random() < 0.3:
            ctx[-1] = "NN"  # some unseen combinations too
        d = g.dist(tuple(ctx))
        assert abs(math.fsum(d.values()) - 1.0) <= 1e-9


def test_backoff_extremes(toy_trees):
    g = train_markov(toy_trees, order=2)
    ctx = g.context("VP", ["VBZ", "NP"])
    g.table.lambdas = {(j, b): 0.0 for j in range(1, 4) for b in range(1, 12)}
    g._cache.clear()
    flat = {o: c / g.totals[0][()] for o, c in g.counts[0][()].items()}
    assert g.dist(ctx) == pytest.approx(flat)
    g.table.lambdas = {(j, b): 1.0 for j in range(1, 4) for b in range(1, 12)}
    g._cache.clear()
    deep = g.counts[3][ctx]
    n = sum(deep.values())
    got = {o: v for o, v in g.dist(ctx).items() if v > 0}
    assert got == pytest.approx({o: c / n for o, c in deep.items()})


class TestMarkov:
    def test_context_padding(self):
        g = MarkovGrammar(order=2)
        assert g.context("NP", []) == ("NP", None, None)
        assert g.context("NP", ["DT", "JJ", "NN"]) == ("NP", "NN", "JJ")

    def test_generalizes_to_unseen_rules(self, toy_trees):
        g = train_markov(toy_trees, order=1)
        # NP -> DT NN NN never occurs but gets mass
        p = 1.0
        prev = []
        for c in ["DT", "NN", "NN", STOP]:
            p *= markov_child_prob(g, "NP", prev, (), c)
            prev.append(c)
        assert p > 0

    def test_child_distribution_normalized(self, toy_trees):
        g = train_markov(toy_trees)
        d = g.dist(g.context("VP", ["VBZ", "NP"]))
        assert math.fsum(d.values()) == pytest.approx(1.0)

    def test_flc_pins_slash_contexts(self):
        g = MarkovGrammar(order=2, flc=True)
        g.observe_rule("NP/NP", ["PP", "NP/NP"])
        g.observe_rule("NP/NP", ["SBAR"])
        ctx = g.context("NP/NP", ["PP", "NP/NP"])
        assert g.lam(2, ctx[:2]) == 1.0
        assert g.lam(2, g.context("NP/NP", ["PP"])[:2]) < 1.0


class _FakeParser:
    def __init__(self, results):
        self.results = results

    def parse(self, words):
        return self.results[tuple(words)]


class _R:
    def __init__(self, parses, garden_path=False):
        self.parses = parses
        self.garden_path = garden_path


def test_em_weights_normalize():
    t1, t2, t3 = parse_bracketed("(S (A a)) (S (B a)) (S (C a))")
    res = {("a",): _R([(math.log(0.6), t1), (math.log(0.3), t2), (math.log(0.1), t3)]),
           ("b",): _R([], garden_path=True)}
    out = reestimate_em(_FakeParser(res), [["a"], ["b"]], keep_mass=0.85)
    # weights are shares of the whole beam mass, not of the kept prefix
    assert [w.weight for w in out] == pytest.approx([0.6, 0.3])
    assert out.skipped == 1


@pytest.mark.parametrize("probs,weights", [([1e-5], [1.0]), ([0.03, 0.01], [0.75, 0.25])])
def test_em_normalization_examples(probs, weights):
    trees = parse_bracketed(" ".join("(S (X%d a))" % i for i in range(len(probs))))
    res = {("a",): _R([(math.log(p), t) for p, t in zip(probs, trees)])}
    out = reestimate_em(_FakeParser(res), [["a"]], keep_mass=1.0)
    assert [w.weight for w in out] == pytest.approx(weights, rel=1e-12)
