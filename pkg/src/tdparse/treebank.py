"""Bracketed treebank reading, writing, normalization and partitioning.

Trees are immutable.  A terminal is a leaf with ``terminal=True``; a POS
node is a nonterminal with exactly one child, which is a terminal.  A
nonterminal with no children is an empty (epsilon) node.
"""

from __future__ import annotations

import random
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

DEFAULT_PUNCT = frozenset({",", ".", ":", "``", "''", "-LRB-", "-RRB-"})
EMPTY_ELEMENT = "-NONE-"


class TreebankError(ValueError):
    """Malformed bracketed input or an invalid partition request."""


@dataclass(frozen=True)
class Tree:
    label: str
    children: tuple = ()
    head: int | None = field(default=None, compare=False)
    terminal: bool = False

    def __post_init__(self):
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))
        if self.terminal and self.children:
            raise TreebankError("terminal %r has children" % self.label)
        if self.head is not None and not 0 <= self.head < len(self.children):
            raise TreebankError("head index %d out of range for %r" % (self.head, self.label))

    @classmethod
    def leaf(cls, word: str) -> "Tree":
        return cls(word, (), None, True)

    @classmethod
    def pos(cls, tag: str, word: str) -> "Tree":
        return cls(tag, (cls.leaf(word),))

    @property
    def is_pos(self) -> bool:
        return len(self.children) == 1 and self.children[0].terminal

    @property
    def is_empty(self) -> bool:
        """True for an epsilon node (a nonterminal leaf)."""
        return not self.terminal and not self.children

    @property
    def is_phrasal(self) -> bool:
        return not self.terminal and not self.is_pos

    @property
    def word(self) -> str:
        return self.children[0].label

    def with_children(self, children: Iterable["Tree"], head: int | None = None) -> "Tree":
        return Tree(self.label, tuple(children), head, False)

    def relabel(self, label: str) -> "Tree":
        return Tree(label, self.children, self.head, self.terminal)

    def words(self) -> list[str]:
        return [t.label for t in self.iter_terminals()]

    def iter_terminals(self) -> Iterator["Tree"]:
        if self.terminal:
            yield self
            return
        for c in self.children:
            yield from c.iter_terminals()

    def pos_nodes(self) -> list["Tree"]:
        out = []
        stack = [self]
        while stack:
            t = stack.pop()
            if t.is_pos:
                out.append(t)
            elif not t.terminal:
                stack.extend(reversed(t.children))
        return out

    def tags(self) -> list[str]:
        return [p.label for p in self.pos_nodes()]

    def subtrees(self) -> Iterator["Tree"]:
        """Pre-order traversal of nonterminal nodes."""
        if self.terminal:
            return
        yield self
        for c in self.children:
            yield from c.subtrees()

    def __str__(self) -> str:
        return write_bracketed(self)


def spans(tree: Tree) -> list[tuple[Tree, int, int]]:
    """(node, start, end) for every nonterminal, over terminal positions."""
    out: list[tuple[Tree, int, int]] = []

    def walk(t: Tree, i: int) -> int:
        if t.terminal:
            return i + 1
        slot = len(out)
        out.append((t, i, i))
        j = i
        for c in t.children:
            j = walk(c, j)
        out[slot] = (t, i, j)
        return j

    walk(tree, 0)
    return out


# -- reading -----------------------------------------------------------------

_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def _tokens(text: str) -> Iterator[tuple[str, int]]:
    for m in _TOKEN.finditer(text):
        yield m.group(), m.start()


def parse_bracketed(text: str, remove_empty: bool = True, normalize: bool = False) -> list[Tree]:
    """Parse every top-level bracketed expression in ``text``.

    An unlabeled wrapper ``( (S ...) )`` is stripped.  With ``remove_empty``
    the ``-NONE-`` subtrees are deleted (and ancestors emptied by that); with
    ``normalize`` functional tags are truncated.
    """
    toks = list(_tokens(text))
    out: list[Tree] = []
    pos = 0
    while pos < len(toks):
        tok, off = toks[pos]
        if tok != "(":
            raise TreebankError("expected '(' at offset %d, got %r" % (off, tok))
        tree, pos = _read(toks, pos, text)
        if tree is None:
            continue
        if remove_empty:
            tree = _drop_empty_elements(tree)
            if tree is None:
                continue
        if normalize:
            tree = normalize_labels(tree)
        out.append(tree)
    return out


def _read(toks, pos, text):
    # toks[pos] is "("
    start = toks[pos][1]
    pos += 1
    if pos >= len(toks):
        raise TreebankError("unbalanced parentheses: '(' at offset %d never closed" % start)
    label = ""
    if toks[pos][0] not in "()":
        label = toks[pos][0]
        pos += 1
    kids = []
    words = []
    while True:
        if pos >= len(toks):
            raise TreebankError("unbalanced parentheses: '(' at offset %d never closed" % start)
        tok, off = toks[pos]
        if tok == ")":
            pos += 1
            break
        if tok == "(":
            sub, pos = _read(toks, pos, text)
            kids.append((sub, off))
        else:
            words.append((tok, off))
            pos += 1
    if words and kids:
        raise TreebankError(
            "format error at offset %d: %r mixes a terminal with subtrees" % (start, label)
        )
    if len(words) > 1:
        raise TreebankError(
            "format error at offset %d: %r has several terminals" % (words[1][1], label)
        )
    if words:
        return Tree.pos(label, words[0][0]), pos
    children = tuple(k for k, _ in kids if k is not None)
    if not label:
        if len(children) == 1:
            return children[0], pos
        if not children:
            return None, pos
        raise TreebankError("unlabeled node at offset %d has %d children" % (start, len(children)))
    return Tree(label, children), pos


def _drop_empty_elements(t: Tree) -> Tree | None:
    if t.is_pos:
        return None if t.label == EMPTY_ELEMENT else t
    if t.terminal or not t.children:
        return t
    kids = [k for k in (_drop_empty_elements(c) for c in t.children) if k is not None]
    if not kids:
        return None
    return t.with_children(kids)


def base_label(label: str) -> str:
    """Strip functional tags and indices: NP-SBJ-1 -> NP, PP=2 -> PP."""
    if label.startswith("-"):
        return label
    m = re.search(r"[-=]", label)
    return label[: m.start()] if m else label


def normalize_labels(t: Tree) -> Tree:
    if t.terminal:
        return t
    if t.is_pos:
        return t.relabel(base_label(t.label))
    return Tree(base_label(t.label), tuple(normalize_labels(c) for c in t.children), t.head)


def read_treebank(paths: Sequence[str], remove_empty: bool = True, normalize: bool = False) -> "Corpus":
    trees: list[Tree] = []
    sources: list[str] = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            got = parse_bracketed(fh.read(), remove_empty=remove_empty, normalize=normalize)
        trees.extend(got)
        sources.extend([str(p)] * len(got))
    return Corpus.from_trees(trees, sources)


# -- writing -----------------------------------------------------------------

def write_bracketed(tree: Tree) -> str:
    if tree.terminal:
        return tree.label
    if tree.is_pos:
        return "(%s %s)" % (tree.label, tree.word)
    if not tree.children:
        return "(%s )" % tree.label
    return "(%s %s)" % (tree.label, " ".join(write_bracketed(c) for c in tree.children))


def write_treebank(trees: Iterable[Tree], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in trees:
            fh.write(write_bracketed(t) + "\n")


# -- corpus ------------------------------------------------------------------

@dataclass(frozen=True)
class Corpus:
    trees: tuple
    vocabulary: Counter
    sources: tuple = ()
    dropped: int = 0

    @classmethod
    def from_trees(cls, trees: Iterable[Tree], sources: Sequence[str] = (), dropped: int = 0) -> "Corpus":
        trees = tuple(trees)
        vocab: Counter = Counter()
        for t in trees:
            vocab.update(t.words())
        return cls(trees, vocab, tuple(sources), dropped)

    @property
    def nonterminals(self) -> frozenset:
        return frozenset(n.label for t in self.trees for n in t.subtrees())

    def __len__(self) -> int:
        return len(self.trees)

    def __iter__(self):
        return iter(self.trees)


def strip_tree(t: Tree, drop: Callable[[Tree], bool]) -> Tree | None:
    """Delete POS nodes matching ``drop``; prune ancestors left childless."""
    if t.terminal:
        return t
    if t.is_pos:
        return None if drop(t) else t
    if not t.children:
        return t
    kids = [k for k in (strip_tree(c, drop) for c in t.children) if k is not None]
    if not kids:
        return None
    return t.with_children(kids)


def strip_punctuation(corpus: Corpus, pos_set: Iterable[str] = DEFAULT_PUNCT) -> Corpus:
    """Remove punctuation POS nodes; trees that become empty are dropped."""
    pos_set = frozenset(pos_set)
    kept, srcs = [], []
    dropped = 0
    for i, t in enumerate(corpus.trees):
        s = strip_tree(t, lambda p: p.label in pos_set)
        if s is None:
            dropped += 1
            continue
        kept.append(s)
        if corpus.sources:
            srcs.append(corpus.sources[i])
    return Corpus.from_trees(kept, srcs, corpus.dropped + dropped)


# -- partition ---------------------------------------------------------------

_SECTION = re.compile(r"wsj_(\d\d)\d\d")


def section_of(source: str) -> int | None:
    """WSJ section number from a file name such as ``wsj_0231.mrg``."""
    m = _SECTION.search(source)
    if m:
        return int(m.group(1))
    parent = re.findall(r"(?:^|/)(\d\d)(?=/)", source)
    return int(parent[-1]) if parent else None


def _parse_ranges(text: str) -> set[int]:
    out: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            out.update(range(int(a), int(b) + 1))
        else:
            out.add(int(part))
    return out


def partition(corpus: Corpus, spec: str) -> tuple[Corpus, Corpus, Corpus]:
    """Split a corpus into (train, heldout, test).

    ``spec`` is either a ratio such as ``"8/1/1"`` (optionally
    ``"8/1/1:seed=7"`` to shuffle reproducibly first) or section ranges such
    as ``"train=2-21;heldout=24;test=23"`` matched against source file names.
    """
    spec = spec.strip()
    if "=" in spec.split(":")[0]:
        return _partition_sections(corpus, spec)
    ratio, _, opt = spec.partition(":")
    parts = [float(x) for x in ratio.split("/")]
    if len(parts) != 3 or any(p < 0 for p in parts) or sum(parts) <= 0:
        raise TreebankError("bad ratio spec %r" % spec)
    idx = list(range(len(corpus)))
    if opt:
        key, _, val = opt.partition("=")
        if key != "seed":
            raise TreebankError("unknown partition option %r" % opt)
        random.Random(int(val)).shuffle(idx)
    n = len(idx)
    total = sum(parts)
    n_train = round(n * parts[0] / total)
    n_held = round(n * parts[1] / total)
    n_train = min(n_train, n)
    n_held = min(n_held, n - n_train)
    cuts = (idx[:n_train], idx[n_train : n_train + n_held], idx[n_train + n_held :])
    return tuple(_subset(corpus, c) for c in cuts)  # type: ignore[return-value]


def _partition_sections(corpus: Corpus, spec: str):
    ranges = {}
    for item in spec.split(";"):
        if not item.strip():
            continue
        name, _, val = item.partition("=")
        name = name.strip()
        if name not in ("train", "heldout", "test"):
            raise TreebankError("unknown split %r" % name)
        ranges[name] = _parse_ranges(val)
    names = list(ranges)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            common = ranges[a] & ranges[b]
            if common:
                raise TreebankError(
                    "overlapping section ranges: %s and %s share %s" % (a, b, sorted(common))
                )
    buckets = {"train": [], "heldout": [], "test": []}
    for i, src in enumerate(corpus.sources or [""] * len(corpus)):
        sec = section_of(src)
        for name, rng in ranges.items():
            if sec is not None and sec in rng:
                buckets[name].append(i)
    return tuple(_subset(corpus, buckets[k]) for k in ("train", "heldout", "test"))


def _subset(corpus: Corpus, idx: Sequence[int]) -> Corpus:
    trees = [corpus.trees[i] for i in idx]
    srcs = [corpus.sources[i] for i in idx] if corpus.sources else []
    return Corpus.from_trees(trees, srcs)
