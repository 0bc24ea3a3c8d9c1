import random

import pytest
from hypothesis import given, settings, strategies as st

from tdparse.treebank import (
    Corpus,
    TreebankError,
    base_label,
    parse_bracketed,
    partition,
    read_treebank,
    section_of,
    spans,
    strip_punctuation,
    write_bracketed,
    write_treebank,
)

from conftest import random_tree


def test_parse_and_write_round_trip(toy_trees):
    assert len(toy_trees) == 3
    text = "\n".join(write_bracketed(t) for t in toy_trees)
    assert parse_bracketed(text) == toy_trees


def test_words_and_tags(toy_trees):
    t = toy_trees[0]
    assert t.words() == ["the", "moon", "is", "the", "moon"]
    assert t.tags() == ["DT", "NN", "VBZ", "DT", "NN"]


def test_outer_wrapper_and_empty_elements():
    text = "( (S (NP-SBJ (-NONE- *)) (VP (VB go)) (. .)) )"
    (t,) = parse_bracketed(text)
    assert t.label == "S"
    assert t.words() == ["go", "."]


def test_unbalanced_input_is_an_error():
    with pytest.raises(TreebankError):
        parse_bracketed("(S (NP (DT the)")


def test_base_label():
    assert base_label("NP-SBJ-1") == "NP"
    assert base_label("-LRB-") == "-LRB-"


def test_spans(toy_trees):
    got = {(n.label, i, j) for n, i, j in spans(toy_trees[0]) if not n.is_pos}
    assert ("VP", 2, 5) in got and ("S", 0, 5) in got


def test_strip_punctuation_drops_empty_trees():
    trees = parse_bracketed("(S (NP (NN a)) (. .)) (X (, ,))")
    c = strip_punctuation(Corpus.from_trees(trees))
    assert len(c) == 1 and c.dropped == 1
    assert c.trees[0].words() == ["a"]


def test_partition_ratio_is_deterministic():
    trees = [parse_bracketed("(S (NN w%d))" % i)[0] for i in range(20)]
    c = Corpus.from_trees(trees)
    a = partition(c, "8/1/1:seed=3")
    b = partition(c, "8/1/1:seed=3")
    assert [len(x) for x in a] == [16, 2, 2]
    assert [x.trees for x in a] == [x.trees for x in b]


def test_partition_sections_reject_overlap():
    c = Corpus.from_trees([], [])
    with pytest.raises(TreebankError):
        partition(c, "train=2-21;test=21")


def test_section_of():
    assert section_of("wsj/02/wsj_0231.mrg") == 2
    assert section_of("23/foo.mrg") == 23
    assert section_of("foo.mrg") is None


def test_read_write_files(tmp_path, toy_trees):
    p = tmp_path / "a.mrg"
    write_treebank(toy_trees, str(p))
    c = read_treebank([str(p)])
    assert list(c.trees) == list(toy_trees)
    assert c.vocabulary["the"] == 8


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_random_trees_survive_writing(seed):
    t = random_tree(random.Random(seed))
    assert parse_bracketed(write_bracketed(t)) == [t]
