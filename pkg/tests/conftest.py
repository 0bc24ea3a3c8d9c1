import random

import pytest

from tdparse.grammar import induce_pcfg
from tdparse.treebank import Tree, parse_bracketed

TOY = """
(S (NP (DT the) (NN moon)) (VP (VBZ is) (NP (DT the) (NN moon))))
(S (NP (DT the) (NN sun)) (VP (VBZ is) (NP (NP (DT the) (NN sun)) (PP (IN of) (NP (DT the) (NN night))))))
(S (NP (DT the) (NN night)) (VP (VBZ is) (NP (DT the) (NN sun)) (PP (IN of) (NP (DT the) (NN moon)))))
"""

# same shapes over two nouns: 11 rules plus the start rule
SMALL = TOY.replace("night", "moon")

PHRASAL = ["S", "NP", "VP", "PP", "SBAR", "NP-SBJ", "A/B", "X+Y", "Q%1", "ADJP"]
POS = ["DT", "NN", "VB", "IN", "-LRB-", ",", "PRP$"]


def random_tree(rng: random.Random, depth: int = 0, max_depth: int = 5) -> Tree:
    """Random tree with awkward labels: separators, escapes, punctuation."""
    k = rng.choice([1, 1, 2, 2, 3, 4]) if depth < max_depth else 1
    kids = []
    for _ in range(k):
        if depth >= max_depth or rng.random() < 0.4:
            kids.append(Tree.pos(rng.choice(POS), rng.choice("abc")))
        else:
            kids.append(random_tree(rng, depth + 1, max_depth))
    return Tree(rng.choice(PHRASAL), tuple(kids))


@pytest.fixture(scope="session")
def toy_trees():
    return parse_bracketed(TOY)


@pytest.fixture(scope="session")
def small_grammar():
    return induce_pcfg(parse_bracketed(SMALL))


@pytest.fixture(scope="session")
def small_sample(small_grammar):
    rng = random.Random(1)
    return [small_grammar.sample(rng) for _ in range(2000)]
