import math

import pytest

from tdparse.evaluation import exhaustive_parse, parseval
from tdparse.grammar import induce_pcfg, reestimate_em
from tdparse.parser import (
    Analysis,
    ParseOptions,
    Parser,
    ParserModel,
    WordQueue,
    above_threshold,
    f_pos,
    f_words,
    lap,
    next_word_probs,
    parse,
    threshold,
    train,
)
from tdparse.treebank import parse_bracketed

from conftest import TOY


@pytest.fixture(scope="module")
def toy():
    return parse_bracketed(TOY)


@pytest.fixture(scope="module")
def pcfg_model(toy):
    return train(toy, mode="pcfg", unk_threshold=0)


@pytest.fixture(scope="module")
def markov_model(small_sample):
    return train(small_sample[:600], heldout=small_sample[600:700], unk_threshold=0)


class TestLookahead:
    def test_determiner_start(self, pcfg_model):
        t = pcfg_model.lap
        lam = t.table.lam(1, 9, 1)
        got = lap(t, [("NP", ())], "the")
        assert got >= lam
        assert got == pytest.approx(1.0)

    def test_end_of_string_on_empty_stack(self, pcfg_model):
        assert lap(pcfg_model.lap, [], None) == 1.0

    def test_non_nullable_top_hides_the_rest(self, pcfg_model):
        t = pcfg_model.lap
        assert t.eps("S", ()) == 0.0
        a = lap(t, [("S", ())], "the")
        b = lap(t, [("S", ()), ("NP", ("NP",))], "the")
        assert a == b

    def test_pos_mode(self, pcfg_model):
        assert lap(pcfg_model.lap, [("VP", ())], "VBZ", pos_mode=True) == pytest.approx(1.0)
        assert lap(pcfg_model.lap, [("VP", ())], "DT", pos_mode=True) == 0.0


class TestBeam:
    def test_worked_thresholds(self):
        assert threshold(1.0, 1e-11, 100, f_words) == pytest.approx(1e-5, rel=1e-12)
        assert threshold(1.0, 1e-4, 100, f_pos) == pytest.approx(1e-2, rel=1e-12)

    def test_empty_queue_passes(self):
        assert above_threshold(-1e9, WordQueue(), 1e-11)
        assert above_threshold(-1e9, None, 1e-11)

    def test_queue_order_is_stable(self):
        q = WordQueue()
        for s, f in enumerate([-1.0, -0.5, -0.5, -2.0]):
            q.push(Analysis(f, None, 0, f, s))
        order = [(a.logF, a.seq) for a in (q.pop() for _ in range(4))]
        assert order == [(-0.5, 1), (-0.5, 2), (-1.0, 0), (-2.0, 3)]


class TestToyParses:
    def test_unique_parse(self, toy, pcfg_model):
        g = induce_pcfg(toy)
        words = "the moon is the moon".split()
        r = parse(words, pcfg_model, gamma=1e-20)
        o = exhaustive_parse(g, words)
        assert len(r.parses) == 1 and len(o.parses) == 1
        assert math.exp(r.parses[0][0]) == pytest.approx(g.tree_prob(toy[0]), rel=1e-12)
        assert math.exp(r.log_string_prob) == pytest.approx(o.string_prob, rel=1e-9)

    def test_attachment_ambiguity(self, toy, pcfg_model):
        g = induce_pcfg(toy)
        words = "the moon is the sun of the night".split()
        r = parse(words, pcfg_model, gamma=1e-20)
        o = exhaustive_parse(g, words)
        assert len(r.parses) == 2
        assert math.fsum(math.exp(lp) for lp, _ in r.parses) == pytest.approx(o.string_prob, rel=1e-9)
        # every returned parse is an oracle parse with the oracle's probability
        table = {t: p for p, t in o.parses}
        for lp, t in r.parses:
            assert math.exp(lp) == pytest.approx(table[t], rel=1e-12)

    def test_masses_never_increase(self, pcfg_model):
        r = parse("the sun is the moon of the night".split(), pcfg_model)
        lm = r.log_masses
        assert lm[0] == pytest.approx(0.0)
        assert all(b <= a + 1e-12 for a, b in zip(lm, lm[1:]))

    def test_widening_never_loses_mass(self, pcfg_model):
        words = "the sun is the moon of the night".split()
        masses = [parse(words, pcfg_model, gamma=g).log_string_prob for g in (1e-3, 1e-8, 1e-14, 1e-20)]
        assert all(b >= a - 1e-12 for a, b in zip(masses, masses[1:]))

    def test_narrow_initial_beam(self, pcfg_model):
        words = "the sun is the moon of the night".split()
        wide = parse(words, pcfg_model, gamma=1e-11)
        narrow = parse(words, pcfg_model, gamma=1e-11, gamma_initial=1e-7)
        same = parse(words, pcfg_model, gamma=1e-11, gamma_initial=1e-11)
        assert narrow.expansions[0] <= wide.expansions[0]
        assert same.parses == wide.parses and same.expansions == wide.expansions


class TestGardenPath:
    def test_ungrammatical_string_is_completed(self, pcfg_model):
        words = "the moon the moon is".split()
        r = parse(words, pcfg_model)
        assert r.garden_path
        assert r.best is not None and r.best.words() == words
        gold = parse_bracketed("(S (NP (DT the) (NN moon)) (NP (DT the) (NN moon)) (VP (VBZ is)))")[0]
        s = parseval(gold, r.best)
        assert 0 <= s.recall <= 100

    def test_failure_at_first_word(self, pcfg_model):
        r = parse(["is", "the"], pcfg_model)
        assert r.garden_path and r.failed_at == 0
        assert r.best.words() == ["is", "the"]
        assert all(c.is_pos for c in r.best.children)


def test_empty_punctuation_mode():
    trees = parse_bracketed(TOY.replace("(NN moon))))", "(NN moon))) (. .))"))
    pm = train(trees, mode="pcfg", unk_threshold=0)
    words = "the moon is the moon".split()
    plain = parse(words, pm)
    empty = parse(words, pm, empty_punct=True)
    assert not empty.garden_path
    assert empty.best.words() == words
    assert empty.log_string_prob != plain.log_string_prob


def test_pos_input(pcfg_model):
    r = parse("DT NN VBZ DT NN".split(), pcfg_model, input_mode="pos")
    assert not r.garden_path
    assert r.best.tags() == ["DT", "NN", "VBZ", "DT", "NN"]


def test_save_and_load(tmp_path, markov_model, small_sample):
    p = tmp_path / "m.txt"
    markov_model.save(str(p))
    again = ParserModel.load(str(p))
    for t in small_sample[700:710]:
        a = parse(t.words(), markov_model)
        b = parse(t.words(), again)
        assert a.parses == b.parses and a.log_masses == b.log_masses


@pytest.mark.parametrize("transform", [None, "lf0", "lc", "rf", "pa", "lc,lf"])
def test_replay_soundness(transform, small_sample):
    pm = train(small_sample[:400], transform=transform, heldout=small_sample[400:450], unk_threshold=0)
    p = Parser(pm, ParseOptions(detransform=False))
    for t in small_sample[450:465]:
        r = p.parse(t.words())
        assert not r.garden_path
        lp, tree = r.parses[0]
        assert pm.score(tree, prepared=True) == pytest.approx(lp, abs=1e-9)
        full = parse(t.words(), pm)
        assert full.best.words() == t.words()


def test_next_word_distribution(pcfg_model):
    p = Parser(pcfg_model, ParseOptions(gamma=1e-20))
    vocab = ["the", "moon", "sun", "night", "is", "of"]
    for prefix in ([], ["the"], ["the", "sun", "is"]):
        d = next_word_probs(p, prefix, vocab)
        assert math.fsum(d.values()) == pytest.approx(1.0, abs=1e-9)


def test_em_counts_match_enumeration(toy, pcfg_model):
    g = induce_pcfg(toy)
    words = "the moon is the sun of the night".split()
    out = reestimate_em(Parser(pcfg_model, ParseOptions(gamma=1e-20)), [words], keep_mass=1.0)
    o = exhaustive_parse(g, words)
    want = {t: p / o.string_prob for p, t in o.parses}
    assert {w.tree: w.weight for w in out} == pytest.approx(want, rel=1e-9)
