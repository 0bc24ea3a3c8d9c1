"""Probability models induced from (weighted) trees.

``PCFG`` is the plain relative-frequency grammar.  ``InterpolatedModel`` is
the shared smoothing engine: counts are kept for every prefix of a context
tuple and estimates are interpolated from the shortest prefix upward.  The
Markov child model, the POS/word model, the head model and the trigram
baseline are all instances of it.
"""

from __future__ import annotations

import json
import math
import random
import warnings
from bisect import bisect_right
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .treebank import Tree

START = "S†"
STOP = "<STOP>"
NULL = None
DEFAULT_BOUNDARIES = (0, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89)
FORMAT_VERSION = "tdparse-model 1"


@dataclass(frozen=True)
class WeightedTree:
    tree: Tree
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight >= 0:
            raise ValueError("tree weight must be nonnegative, got %r" % (self.weight,))


def _weighted(trees) -> list[WeightedTree]:
    out = []
    for t in trees:
        out.append(t if isinstance(t, WeightedTree) else WeightedTree(t))
    return out


# -- plain PCFG ---------------------------------------------------------------------------


@dataclass
class PCFG:
    """Rules map (lhs, rhs) to probability.  Terminal symbols appear only
    as the single right-hand-side item of a POS rule."""

    rules: dict = field(default_factory=dict)
    start: str = START
    nonterminals: frozenset = frozenset()
    terminals: frozenset = frozenset()

    def __post_init__(self):
        by = defaultdict(list)
        for (lhs, rhs), p in self.rules.items():
            by[lhs].append((rhs, p))
        self.by_lhs = dict(by)

    def prob(self, lhs: str, rhs: Sequence[str]) -> float:
        return self.rules.get((lhs, tuple(rhs)), 0.0)

    def tree_logprob(self, tree: Tree, wrap: bool = True) -> float:
        """Log probability of a tree; ``wrap`` adds the start rule."""
        lp = 0.0
        if wrap:
            p = self.prob(self.start, (tree.label,))
            if p == 0.0:
                return -math.inf
            lp += math.log(p)
        for lhs, rhs in _rules_of(tree):
            p = self.prob(lhs, rhs)
            if p == 0.0:
                return -math.inf
            lp += math.log(p)
        return lp

    def tree_prob(self, tree: Tree, wrap: bool = True) -> float:
        return math.exp(self.tree_logprob(tree, wrap))

    def sample(self, rng: random.Random, max_depth: int = 40) -> Tree:
        """Draw a tree (without the start wrapper)."""

        def draw(sym, depth):
            if depth > max_depth:
                raise RecursionError("sampled tree exceeded depth %d" % max_depth)
            options = self.by_lhs[sym]
            r = rng.random()
            acc = 0.0
            for rhs, p in options:
                acc += p
                if r < acc:
                    break
            if len(rhs) == 1 and rhs[0] in self.terminals and rhs[0] not in self.by_lhs:
                return Tree.pos(sym, rhs[0])
            return Tree(sym, tuple(draw(x, depth + 1) for x in rhs))

        top = draw(self.start, 0)
        return top.children[0]

    def check_normalized(self, tol: float = 1e-9) -> bool:
        return all(abs(sum(p for _, p in opts) - 1.0) <= tol for opts in self.by_lhs.values())

    def to_text(self) -> str:
        lines = ["# " + FORMAT_VERSION + " pcfg"]
        for (lhs, rhs), p in sorted(self.rules.items()):
            lines.append("%s\t%s\t%r" % (lhs, " ".join(rhs), p))
        return "\n".join(lines) + "\n"


def _rules_of(tree: Tree, lexical: bool = True):
    if tree.terminal:
        return
    if tree.is_pos:
        if lexical:
            yield tree.label, (tree.children[0].label,)
        return
    yield tree.label, tuple(c.label for c in tree.children)
    for c in tree.children:
        yield from _rules_of(c, lexical)


def induce_pcfg(trees: Iterable, start: str = START) -> PCFG:
    """Relative-frequency PCFG from weighted trees (plain trees weigh 1)."""
    wts = _weighted(trees)
    if not wts:
        raise ValueError("cannot induce a grammar from an empty corpus")
    counts = Counter()
    lhs_tot = Counter()
    nts, terms = set(), set()
    for wt in wts:
        if wt.weight == 0:
            continue
        counts[(start, (wt.tree.label,))] += wt.weight
        lhs_tot[start] += wt.weight
        for lhs, rhs in _rules_of(wt.tree):
            counts[(lhs, rhs)] += wt.weight
            lhs_tot[lhs] += wt.weight
            nts.add(lhs)
        for leaf in wt.tree.words():
            terms.add(leaf)
    if not counts:
        raise ValueError("all tree weights are zero")
    rules = {r: c / lhs_tot[r[0]] for r, c in counts.items()}
    return PCFG(rules, start, frozenset(nts | {start}), frozenset(terms))


# -- interpolation -------------------------------------------------------------------------


@dataclass
class InterpolationTable:
    """λ per (backoff level, bucket).  Levels count context features, so
    level j mixes the estimate conditioned on the first j features with the
    level j-1 estimate.  Missing entries fall back to Witten-Bell weights."""

    bucketing: str = "avgcount"
    boundaries: tuple = DEFAULT_BOUNDARIES
    lambdas: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.bucketing not in ("freq", "avgcount"):
            raise ValueError("bucketing must be 'freq' or 'avgcount'")
        b = tuple(self.boundaries)
        if any(x >= y for x, y in zip(b, b[1:])):
            raise ValueError("bucket boundaries must be strictly increasing")
        for v in self.lambdas.values():
            if not 0.0 <= v <= 1.0:
                raise ValueError("lambda outside [0,1]: %r" % v)
        self.boundaries = b

    def score(self, count: float, distinct: int) -> float:
        if count <= 0:
            return 0.0
        return count if self.bucketing == "freq" else count / distinct

    def bucket(self, score: float) -> int:
        return max(0, bisect_right(self.boundaries, score) - 1)

    def lam(self, level: int, count: float, distinct: int) -> float:
        if count <= 0:
            return 0.0
        b = self.bucket(self.score(count, distinct))
        got = self.lambdas.get((level, b))
        if got is None:
            return count / (count + distinct)
        return got


class InterpolatedModel:
    """Conditional outcome distribution smoothed over context prefixes."""

    def __init__(self, depth: int, table: InterpolationTable | None = None, slash_pin_level: int | None = None):
        self.depth = depth
        self.table = table or InterpolationTable()
        self.slash_pin_level = slash_pin_level
        self.counts = [defaultdict(Counter) for _ in range(depth + 1)]
        self.totals = [Counter() for _ in range(depth + 1)]
        self._cache: dict = {}

    # training

    def observe(self, ctx: Sequence, outcome, weight: float = 1.0) -> None:
        ctx = tuple(ctx)
        if len(ctx) != self.depth:
            raise ValueError("context has %d features, model expects %d" % (len(ctx), self.depth))
        for j in range(self.depth + 1):
            key = ctx[:j]
            self.counts[j][key][outcome] += weight
            self.totals[j][key] += weight
        self._cache.clear()

    # queries

    @property
    def outcomes(self):
        return self.counts[0][()].keys()

    def count(self, ctx: Sequence) -> float:
        ctx = tuple(ctx)
        return self.totals[len(ctx)].get(ctx, 0.0)

    def distinct(self, ctx: Sequence) -> int:
        ctx = tuple(ctx)
        c = self.counts[len(ctx)].get(ctx)
        return len(c) if c else 0

    def average_count(self, ctx: Sequence) -> float:
        n = self.count(ctx)
        return n / self.distinct(ctx) if n > 0 else 0.0

    def lam(self, j: int, key: tuple) -> float:
        n = self.totals[j].get(key, 0.0)
        if n <= 0:
            return 0.0
        if self.slash_pin_level == j and _is_slash(key[-1]):
            return 1.0
        return self.table.lam(j, n, len(self.counts[j][key]))

    def prob(self, ctx: Sequence, outcome) -> float:
        ctx = tuple(ctx)
        tot0 = self.totals[0].get((), 0.0)
        if tot0 <= 0:
            return 0.0
        p = self.counts[0][()].get(outcome, 0.0) / tot0
        for j in range(1, self.depth + 1):
            key = ctx[:j]
            n = self.totals[j].get(key, 0.0)
            if n <= 0:
                continue
            lam = self.lam(j, key)
            p = lam * self.counts[j][key].get(outcome, 0.0) / n + (1.0 - lam) * p
        return p

    def dist(self, ctx: Sequence) -> dict:
        """Full smoothed distribution over the observed outcome alphabet."""
        ctx = tuple(ctx)
        got = self._cache.get(ctx)
        if got is not None:
            return got
        tot0 = self.totals[0].get((), 0.0)
        if tot0 <= 0:
            return {}
        p = {o: c / tot0 for o, c in self.counts[0][()].items()}
        for j in range(1, self.depth + 1):
            key = ctx[:j]
            n = self.totals[j].get(key, 0.0)
            if n <= 0:
                continue
            lam = self.lam(j, key)
            if lam != 1.0:
                p = {o: (1.0 - lam) * v for o, v in p.items()}
            else:
                p = dict.fromkeys(p, 0.0)
            for o, c in self.counts[j][key].items():
                p[o] = p.get(o, 0.0) + lam * c / n
        self._cache[ctx] = p
        return p

    # serialization

    def to_lines(self) -> list[str]:
        out = ["depth\t%d" % self.depth, "bucketing\t%s" % self.table.bucketing]
        out.append("boundaries\t%s" % json.dumps(list(self.table.boundaries)))
        if self.slash_pin_level is not None:
            out.append("slash_pin\t%d" % self.slash_pin_level)
        for (lev, b), v in sorted(self.table.lambdas.items()):
            out.append("LAMBDA\t%d\t%d\t%r" % (lev, b, v))
        j = self.depth
        for key in sorted(self.counts[j], key=json.dumps):
            for o, c in sorted(self.counts[j][key].items(), key=lambda kv: json.dumps(kv[0])):
                out.append("%d\t%s\t%s\t%r" % (j, json.dumps(list(key), ensure_ascii=False), json.dumps(o, ensure_ascii=False), c))
        return out

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "InterpolatedModel":
        depth = None
        bucketing, bounds, pin, lams, events = "avgcount", DEFAULT_BOUNDARIES, None, {}, []
        for line in lines:
            parts = line.rstrip("\n").split("\t")
            key = parts[0]
            if key == "depth":
                depth = int(parts[1])
            elif key == "bucketing":
                bucketing = parts[1]
            elif key == "boundaries":
                bounds = tuple(json.loads(parts[1]))
            elif key == "slash_pin":
                pin = int(parts[1])
            elif key == "LAMBDA":
                lams[(int(parts[1]), int(parts[2]))] = float(parts[3])
            else:
                events.append((json.loads(parts[1]), json.loads(parts[2]), float(parts[3])))
        if depth is None:
            raise ValueError("model section lacks a depth line")
        m = cls(depth, InterpolationTable(bucketing, bounds, lams), pin)
        for ctx, o, c in events:
            m.observe(ctx, o, c)
        return m


def _is_slash(label) -> bool:
    return isinstance(label, str) and "/" in label


def average_count(model: InterpolatedModel, context: Sequence) -> float:
    """Total count of ``context`` divided by its number of distinct outcomes."""
    return model.average_count(context)


def estimate_lambdas(
    model: InterpolatedModel,
    events: Iterable[tuple[Sequence, object]],
    bucketing: str | None = None,
    boundaries: Sequence | None = None,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> InterpolationTable:
    """Held-out EM for per-(level, bucket) λ.  Installs and returns the table."""
    table = InterpolationTable(bucketing or model.table.bucketing, tuple(boundaries or model.table.boundaries))
    tot0 = model.totals[0].get((), 0.0)
    # per event: p0 and a list of (level, bucket, relative freq, pinned)
    prepared = []
    for ctx, outcome in events:
        ctx = tuple(ctx)
        p0 = model.counts[0][()].get(outcome, 0.0) / tot0 if tot0 else 0.0
        levels = []
        for j in range(1, model.depth + 1):
            key = ctx[:j]
            n = model.totals[j].get(key, 0.0)
            if n <= 0:
                continue
            d = len(model.counts[j][key])
            rf = model.counts[j][key].get(outcome, 0.0) / n
            pinned = model.slash_pin_level == j and _is_slash(key[-1])
            levels.append((j, table.bucket(table.score(n, d)), rf, pinned))
        prepared.append((p0, levels))
    used = {(j, b) for _, lv in prepared for j, b, _, pinned in lv if not pinned}
    lam = {k: 0.5 for k in used}
    prev_ll = -math.inf
    for _ in range(max_iter):
        num = Counter()
        den = Counter()
        ll = 0.0
        for p0, levels in prepared:
            ps = [p0]
            for j, b, rf, pinned in levels:
                l = 1.0 if pinned else lam[(j, b)]
                ps.append(l * rf + (1.0 - l) * ps[-1])
            if ps[-1] <= 0:
                continue
            ll += math.log(ps[-1])
            reach = 1.0
            for k in range(len(levels) - 1, -1, -1):
                j, b, rf, pinned = levels[k]
                l = 1.0 if pinned else lam[(j, b)]
                pk = ps[k + 1]
                if pk <= 0:
                    break
                if not pinned:
                    num[(j, b)] += reach * l * rf / pk
                    den[(j, b)] += reach
                reach *= (1.0 - l) * ps[k] / pk
        for k in used:
            if den[k] > 0:
                lam[k] = min(1.0, max(0.0, num[k] / den[k]))
        if ll - prev_ll < tol:
            break
        prev_ll = ll
    levels_seen = {j for j, _ in used} | set(range(1, model.depth + 1))
    empty = 0
    nb = len(table.boundaries)
    for j in levels_seen:
        for b in range(1, nb):
            if (j, b) not in lam:
                lam[(j, b)] = 0.5
                empty += 1
    if empty:
        warnings.warn("%d interpolation buckets had no held-out events; using lambda=0.5" % empty, stacklevel=2)
    table.lambdas = {k: v for k, v in lam.items() if k[1] > 0}
    model.table = table
    model._cache.clear()
    return table


# -- Markov grammar ----------------------------------------------------------------------------


class MarkovGrammar(InterpolatedModel):
    """Child model: context is (lhs, prev_1 .. prev_order, extra features).

    Outcomes are child labels plus STOP.  With ``flc`` set, the step from
    the first-order to the order-0 estimate is pinned at slash contexts.
    """

    def __init__(self, order: int = 3, n_extra: int = 0, table: InterpolationTable | None = None, flc: bool = False):
        super().__init__(1 + order + n_extra, table, 2 if flc and order >= 1 else None)
        self.order = order
        self.n_extra = n_extra

    def context(self, parent: str, prev: Sequence[str], extra: Sequence = ()) -> tuple:
        prev = list(prev)[-self.order:] if self.order else []
        hist = [prev[-k] if k <= len(prev) else NULL for k in range(1, self.order + 1)]
        extra = list(extra) + [NULL] * (self.n_extra - len(extra))
        return (parent, *hist, *extra[: self.n_extra])

    def observe_rule(self, lhs: str, rhs: Sequence[str], weight: float = 1.0) -> None:
        kids = list(rhs)
        for i in range(len(kids) + 1):
            out = kids[i] if i < len(kids) else STOP
            self.observe(self.context(lhs, kids[:i]), out, weight)


def markov_child_prob(g: MarkovGrammar, parent: str, prev: Sequence[str], extra_context: Sequence, outcome) -> float:
    return g.prob(g.context(parent, prev, extra_context), outcome)


def train_markov(trees: Iterable, order: int = 3, flc: bool = False) -> MarkovGrammar:
    """Markov grammar over the phrase-structure rules of ``trees``."""
    g = MarkovGrammar(order, flc=flc)
    for wt in _weighted(trees):
        g.observe_rule(START, (wt.tree.label,), wt.weight)
        for lhs, rhs in _rules_of(wt.tree, lexical=False):
            g.observe_rule(lhs, rhs, wt.weight)
    return g


# -- EM re-estimation ---------------------------------------------------------------------------


class WeightedTrees(list):
    """List of WeightedTree with a count of sentences that produced none."""

    skipped = 0


def reestimate_em(parser, raw_sentences: Iterable[Sequence[str]], keep_mass: float = 0.99) -> WeightedTrees:
    """Weighted parses of raw sentences for one EM pass.

    ``parser`` is anything with ``parse(words)`` returning an object with
    ``parses`` (list of (log probability, tree)) and ``garden_path``.
    """
    if not 0 < keep_mass <= 1:
        raise ValueError("keep_mass must be in (0, 1]")
    out = WeightedTrees()
    for words in raw_sentences:
        res = parser.parse(list(words))
        if res.garden_path or not res.parses:
            out.skipped += 1
            continue
        ranked = sorted(res.parses, key=lambda lt: -lt[0])
        top = ranked[0][0]
        probs = [math.exp(lp - top) for lp, _ in ranked]
        total = sum(probs)
        acc = 0.0
        for p, (_, tree) in zip(probs, ranked):
            out.append(WeightedTree(tree, p / total))
            acc += p / total
            if acc >= keep_mass - 1e-12:
                break
    return out
