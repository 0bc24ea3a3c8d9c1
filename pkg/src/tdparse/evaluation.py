"""PARSEVAL scoring, the EDITED-node variant, efficiency reporting and an
exhaustive enumeration oracle for small grammars."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .grammar import PCFG
from .treebank import DEFAULT_PUNCT, Tree

EQUIV = {"PRN": "ADVP"}


class AlignmentError(ValueError):
    """Gold and test trees do not cover the same words."""


class OracleRefusal(RuntimeError):
    """The exhaustive oracle declines instances beyond its bounds."""


# -- PARSEVAL ----------------------------------------------------------------------------------


def constituents(tree: Tree, punct=DEFAULT_PUNCT, equiv=EQUIV, keep_empty: Sequence[str] = ()) -> tuple[Counter, list[str]]:
    """Multiset of (label, start, end) over non-punctuation word positions,
    plus the non-punctuation yield.  POS nodes are not constituents."""
    out = Counter()
    words: list[str] = []

    def walk(t):
        if t.terminal:
            return
        if t.is_pos:
            if t.label not in punct:
                words.append(t.children[0].label)
            return
        start = len(words)
        for c in t.children:
            walk(c)
        end = len(words)
        if end > start or t.label in keep_empty:
            out[(equiv.get(t.label, t.label), start, end)] += 1

    walk(tree)
    return out, words


@dataclass
class SentenceScore:
    matched: int
    gold: int
    test: int
    crossing: int
    exact: bool

    @property
    def recall(self) -> float:
        return 100.0 * self.matched / self.gold if self.gold else 100.0

    @property
    def precision(self) -> float:
        return 100.0 * self.matched / self.test if self.test else 100.0


def _score(g: Counter, t: Counter) -> SentenceScore:
    matched = sum((g & t).values())
    spans = [(s, e) for (_, s, e) in g]
    crossing = 0
    for (_, s, e), n in t.items():
        if any(gs < s < ge < e or s < gs < e < ge for gs, ge in spans):
            crossing += n
    ng, nt = sum(g.values()), sum(t.values())
    return SentenceScore(matched, ng, nt, crossing, matched == ng == nt)


def parseval(gold: Tree, test: Tree, punct=DEFAULT_PUNCT, equiv=EQUIV, check_words: bool = True) -> SentenceScore:
    g, gw = constituents(gold, punct, equiv)
    t, tw = constituents(test, punct, equiv)
    if len(gw) != len(tw) or (check_words and gw != tw):
        raise AlignmentError("yield mismatch: %s vs %s" % (" ".join(gw), " ".join(tw)))
    return _score(g, t)


def _flatten_edited(t: Tree) -> Tree:
    if t.terminal or t.is_pos:
        return t
    if t.label == "EDITED":
        leaves = []
        for c in t.children:
            if c.terminal:
                leaves.append(Tree.pos("XX", c.label))
            else:
                leaves.extend(c.pos_nodes() if not c.is_pos else [c])
        return Tree("EDITED", tuple(leaves))
    kids = []
    for c in (_flatten_edited(c) for c in t.children):
        if c.label == "EDITED" and kids and kids[-1].label == "EDITED":
            kids[-1] = Tree("EDITED", kids[-1].children + c.children)
        else:
            kids.append(c)
    return Tree(t.label, tuple(kids))


def _edited_leaves(t: Tree) -> set[int]:
    """Leaf positions covered by EDITED nodes."""
    out: set[int] = set()
    pos = 0

    def walk(n, inside):
        nonlocal pos
        if n.terminal or n.is_pos:
            if inside:
                out.add(pos)
            pos += 1
            return
        for c in n.children:
            walk(c, inside or n.label == "EDITED")

    walk(t, False)
    return out


def _collapse(t: Tree, leaves: set[int]) -> Tree:
    """Relabel the POS nodes at ``leaves`` so their positions collapse, as
    punctuation positions do."""
    pos = 0

    def walk(n):
        nonlocal pos
        if n.terminal:
            pos += 1
            return n
        if n.is_pos:
            hit = pos in leaves
            pos += 1
            return Tree.pos("-EDITED-", n.children[0].label) if hit else n
        return Tree(n.label, tuple(walk(c) for c in n.children))

    return walk(t)


def edited_metric(gold: Tree, test: Tree, punct=DEFAULT_PUNCT, equiv=EQUIV) -> SentenceScore:
    """PARSEVAL after flattening EDITED nodes and merging adjacent ones.

    Words inside the gold EDITED nodes are treated like punctuation in both
    trees, so EDITED boundaries that differ only across such words match.
    """
    p = frozenset(punct) | {"-EDITED-"}
    g, t = _flatten_edited(gold), _flatten_edited(test)
    leaves = _edited_leaves(g)
    g, t = _collapse(g, leaves), _collapse(t, leaves)
    gc, gw = constituents(g, p, equiv, keep_empty=("EDITED",))
    tc, tw = constituents(t, p, equiv, keep_empty=("EDITED",))
    if gw != tw:
        raise AlignmentError("yield mismatch: %s vs %s" % (" ".join(gw), " ".join(tw)))
    return _score(gc, tc)


@dataclass
class EvalReport:
    LR: float = 0.0
    LP: float = 0.0
    F: float = 0.0
    CB: float = 0.0
    zeroCB: float = 0.0
    leq2CB: float = 0.0
    failed: float = 0.0
    expansions_per_word: float = 0.0
    analyses_per_word: float = 0.0
    exact: float = 0.0
    sentences: int = 0
    # LR/LP over sentences the parser did not garden-path on
    LR_parsed: float = 0.0
    LP_parsed: float = 0.0

    @classmethod
    def from_scores(
        cls,
        scores: Sequence[SentenceScore],
        failed: int = 0,
        expansions: float = 0.0,
        analyses: float = 0.0,
        words: int = 0,
    ) -> "EvalReport":
        n = len(scores)
        if n == 0:
            return cls()
        m = sum(s.matched for s in scores)
        g = sum(s.gold for s in scores)
        t = sum(s.test for s in scores)
        lr = 100.0 * m / g if g else 0.0
        lp = 100.0 * m / t if t else 0.0
        f = 2 * lr * lp / (lr + lp) if lr + lp else 0.0
        return cls(
            LR=lr,
            LP=lp,
            F=f,
            CB=sum(s.crossing for s in scores) / n,
            zeroCB=100.0 * sum(s.crossing == 0 for s in scores) / n,
            leq2CB=100.0 * sum(s.crossing <= 2 for s in scores) / n,
            failed=100.0 * failed / n,
            expansions_per_word=expansions / words if words else 0.0,
            analyses_per_word=analyses / words if words else 0.0,
            exact=100.0 * sum(s.exact for s in scores) / n,
            sentences=n,
        )


def evaluate(gold: Iterable[Tree], test: Iterable[Tree], failed: Sequence[bool] | None = None,
             edited: bool = False, punct=DEFAULT_PUNCT, **counters) -> EvalReport:
    gold, test = list(gold), list(test)
    if len(gold) != len(test):
        raise AlignmentError("%d gold trees but %d test trees" % (len(gold), len(test)))
    fn = edited_metric if edited else parseval
    scores = [fn(g, t, punct) for g, t in zip(gold, test)]
    rep = EvalReport.from_scores(scores, failed=sum(failed or ()), **counters)
    if failed:
        ok = EvalReport.from_scores([s for s, f in zip(scores, failed) if not f])
        rep.LR_parsed, rep.LP_parsed = ok.LR, ok.LP
    else:
        rep.LR_parsed, rep.LP_parsed = rep.LR, rep.LP
    return rep


# -- exhaustive oracle -------------------------------------------------------------------------------


@dataclass
class OracleResult:
    parses: list  # (probability, tree), most probable first
    string_prob: float
    mlp: Tree | None = field(default=None)

    @property
    def mlp_prob(self) -> float:
        return self.parses[0][0] if self.parses else 0.0


def exhaustive_parse(pcfg: PCFG, sentence: Sequence[str], max_len: int = 15, unary_depth: int = 3,
                     max_parses: int = 200000) -> OracleResult:
    """Every parse of ``sentence`` with its exact probability.

    Enumerates top-down over spans with memoization.  A child covering the
    whole span of its parent (a unary step, or a step beside empty
    siblings) spends one unit of ``unary_depth``, which bounds cyclic chains.
    """
    words = list(sentence)
    n = len(words)
    if n > max_len:
        raise OracleRefusal("sentence of length %d exceeds the oracle bound %d" % (n, max_len))
    memo: dict = {}
    budget = [max_parses]
    lexical = {}
    for (lhs, rhs), p in pcfg.rules.items():
        if len(rhs) == 1 and rhs[0] in pcfg.terminals and rhs[0] not in pcfg.by_lhs:
            lexical[(lhs, rhs[0])] = p

    def node(sym, i, j, d):
        key = (sym, i, j, d)
        got = memo.get(key)
        if got is not None:
            return got
        out = []
        if j == i + 1 and (sym, words[i]) in lexical:
            out.append((lexical[(sym, words[i])], Tree.pos(sym, words[i])))
        for rhs, p in pcfg.by_lhs.get(sym, ()):
            if len(rhs) == 1 and (sym, rhs[0]) in lexical:
                continue
            if not rhs:
                if i == j:
                    out.append((p, Tree(sym, ())))
                continue
            for prob, kids in seq(rhs, 0, i, j, (i, j), d):
                out.append((p * prob, Tree(sym, kids)))
        budget[0] -= len(out)
        if budget[0] < 0:
            raise OracleRefusal("parse forest exceeds %d entries" % max_parses)
        memo[key] = out
        return out

    def seq(rhs, k, i, j, span, d):
        if k == len(rhs):
            return [(1.0, ())] if i == j else []
        res = []
        last = k == len(rhs) - 1
        for m in ([j] if last else range(i, j + 1)):
            if (i, m) == span:
                if d == 0:
                    continue
                cd = d - 1
            else:
                cd = unary_depth
            heads = node(rhs[k], i, m, cd)
            if not heads:
                continue
            tails = seq(rhs, k + 1, m, j, span, d)
            for ph, th in heads:
                for pt, tt in tails:
                    res.append((ph * pt, (th,) + tt))
        return res

    parses = []
    for rhs, p in pcfg.by_lhs.get(pcfg.start, ()):
        for prob, t in node(rhs[0], 0, n, unary_depth):
            parses.append((p * prob, t))
    parses.sort(key=lambda pt: -pt[0])
    total = math.fsum(p for p, _ in parses)
    return OracleResult(parses, total, parses[0][1] if parses else None)
