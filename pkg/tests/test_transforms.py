import random

import pytest
from hypothesis import given, settings, strategies as st

from tdparse import transforms as T
from tdparse.grammar import induce_pcfg
from tdparse.treebank import Tree, parse_bracketed

from conftest import random_tree

KINDS = ["lf0", "lf1", "lf2", "rf", "lc", "lc-eps", "slc:NP>NP", "slc-eps:*>NP", "flc:NP", "pa", "lca",
         "lc,lf", "lc-eps,lf", "pa,lf0"]

PP_TREE = parse_bracketed("(NP (NP (DT a) (NN b)) (PP (IN c) (NP (NN d))))")[0]


@pytest.mark.parametrize("kind", KINDS)
@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_round_trip(kind, seed):
    spec = T.parse_transform(kind)
    t = random_tree(random.Random(seed))
    assert T.detransform(spec, T.apply(spec, t)) == t


@pytest.mark.parametrize("kind", KINDS)
def test_yield_is_preserved(kind, toy_trees):
    spec = T.parse_transform(kind)
    for t in toy_trees:
        assert T.apply(spec, t).words() == t.words()


def test_lf0_shape():
    t = parse_bracketed("(A (B b) (C c))")[0]
    out = T.apply(T.parse_transform("lf0"), t)
    assert out.label == "A"
    assert [c.label for c in out.children][0] == "B"
    # the remainder chain ends in an empty node
    node = out.children[1]
    while node.children and not node.children[-1].is_pos:
        node = node.children[-1]
    assert node.children == () or node.children[-1].is_pos


def test_lc_removes_left_recursion():
    out = T.apply(T.parse_transform("lc"), PP_TREE)
    # no node has a leftmost child with its own label after LC
    for n in out.subtrees():
        if n.children and not n.is_pos:
            assert n.children[0].label != n.label or n.children[0].is_pos


def test_constituent_name_peels_layers():
    spec = T.parse_transform("lc,lf")
    for n in T.apply(spec, PP_TREE).subtrees():
        if n.is_pos or n.terminal:
            continue
        assert T.constituent_name(n.label, spec) in {"NP", "PP"}


def test_bad_specs():
    with pytest.raises(T.TransformError):
        T.parse_transform("zz")
    with pytest.raises(T.TransformError):
        T.TransformSpec("rf", eps_remove=True)


def test_detransform_rejects_foreign_annotation():
    spec = T.parse_transform("pa")
    bad = Tree("NP" + T.ANNOTATE + "VP", (Tree.pos("NN", "x"),))
    with pytest.raises(T.TransformError):
        T.detransform(spec, bad)


def test_lf0_preserves_probability(toy_trees):
    g = induce_pcfg(toy_trees)
    spec = T.parse_transform("lf0")
    moved = [T.apply(spec, t) for t in toy_trees]
    g0 = induce_pcfg(moved)
    for t, m in zip(toy_trees, moved):
        assert abs(g0.tree_prob(m) - g.tree_prob(t)) <= 1e-12


def test_chain_stats(toy_trees):
    chains = T.left_child_chains(toy_trees[1])
    assert len(chains) == len(toy_trees[1].words())
    assert chains[0] == ["NP", "S"]
    stats = T.corpus_chain_stats(toy_trees)
    assert sum(stats.depth[("other", "recursion")].values()) == 1
