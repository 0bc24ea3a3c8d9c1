"""Incremental top-down beam parser.

Each analysis carries a spine of open frames.  Expanding the top frame
predicts its next child (or STOP) from the child model; a predicted POS
immediately emits the look-ahead word and moves the analysis to the next
word's queue.  Training replays gold derivations through exactly the same
frame operations, so the events counted at training time and the contexts
seen while parsing cannot drift apart.
"""

from __future__ import annotations

import heapq
import itertools
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from . import transforms
from .conditioning import (
    START,
    ConditioningModel,
    Done,
    Frame,
    View,
    assign_heads,
    new_node,
    new_word,
)
from .grammar import STOP, InterpolatedModel, InterpolationTable, MarkovGrammar, estimate_lambdas
from .treebank import DEFAULT_PUNCT, Tree

UNK = "<UNK>"
NEG_INF = -math.inf


def _log(p: float) -> float:
    return math.log(p) if p > 0 else NEG_INF


def logsumexp(xs: Sequence[float]) -> float:
    xs = [x for x in xs if x != NEG_INF]
    if not xs:
        return NEG_INF
    m = max(xs)
    return m + math.log(sum(math.exp(x - m) for x in xs))


# -- exact prefix child model (PCFG) ------------------------------------------------------


class PrefixModel:
    """Relative-frequency child model conditioned on the full prefix, which
    multiplies out to exactly the PCFG rule probability."""

    def __init__(self):
        self.counts: dict[tuple, Counter] = defaultdict(Counter)

    def observe(self, key: tuple, outcome, weight: float = 1.0) -> None:
        self.counts[key][outcome] += weight

    def dist(self, key: tuple) -> dict:
        c = self.counts.get(key)
        if not c:
            return {}
        n = sum(c.values())
        return {o: v / n for o, v in c.items()}

    def prob(self, key: tuple, outcome) -> float:
        return self.dist(key).get(outcome, 0.0)

    def to_lines(self) -> list[str]:
        out = []
        for key in sorted(self.counts, key=json.dumps):
            for o, v in sorted(self.counts[key].items()):
                out.append("%s\t%s\t%r" % (json.dumps(key, ensure_ascii=False), json.dumps(o, ensure_ascii=False), v))
        return out

    @classmethod
    def from_lines(cls, lines) -> "PrefixModel":
        m = cls()
        for line in lines:
            k, o, v = line.rstrip("\n").split("\t")
            key = json.loads(k)
            m.observe((key[0], tuple(key[1])), json.loads(o), float(v))
        return m


# -- look-ahead probability ---------------------------------------------------------------------


class LAPTable:
    """Empirical left-corner statistics per expansion state.

    A state is a frame label plus the children built so far: the full
    prefix when ``exact`` (PCFG mode), otherwise the last ``order`` children
    with shorter histories as backoff.  For each state we count the first
    word (and its POS) of the remaining children, or ε.
    """

    def __init__(self, exact: bool = False, order: int = 3, table: InterpolationTable | None = None):
        self.exact = exact
        self.order = order
        self.table = table or InterpolationTable("freq")
        self.stats: dict[tuple, list] = {}
        self.lex: dict[str, Counter] = defaultdict(Counter)
        self._lex_tot: dict[str, float] = {}
        self._cache: dict = {}

    def keys(self, label: str, klabels: tuple) -> list[tuple]:
        out = []
        if self.exact:
            out.append(("F", label, tuple(klabels)))
        padded = (None,) * self.order + tuple(klabels)
        for k in range(self.order, -1, -1):
            out.append(("T", label, padded[len(padded) - k:] if k else ()))
        return out

    def observe(self, label: str, klabels: tuple, first: tuple | None, weight: float = 1.0) -> None:
        for key in self.keys(label, klabels):
            st = self.stats.get(key)
            if st is None:
                st = self.stats[key] = [0.0, 0.0, Counter(), Counter()]
            st[0] += weight
            if first is None:
                st[1] += weight
            else:
                st[2][first[0]] += weight
                st[3][first[1]] += weight
        self._cache.clear()

    def observe_lex(self, tag: str, word: str, weight: float = 1.0) -> None:
        self.lex[tag][word] += weight
        self._lex_tot.pop(tag, None)

    def p_lex(self, tag: str, word: str) -> float:
        tot = self._lex_tot.get(tag)
        if tot is None:
            tot = self._lex_tot[tag] = sum(self.lex[tag].values())
        return self.lex[tag].get(word, 0.0) / tot if tot else 0.0

    def lookup(self, label: str, klabels: tuple):
        ck = (label, tuple(klabels) if self.exact else tuple(klabels[-self.order:]) if self.order else (), len(klabels) < self.order)
        got = self._cache.get(ck, False)
        if got is not False:
            return got
        got = None
        for key in self.keys(label, klabels):
            st = self.stats.get(key)
            if st is not None and st[0] > 0:
                got = st
                break
        self._cache[ck] = got
        return got

    def eps(self, label: str, klabels: tuple) -> float:
        st = self.lookup(label, klabels)
        return st[1] / st[0] if st else 0.0

    def first(self, label: str, klabels: tuple, word, pos_mode: bool = False) -> float:
        """P(state ⇒* word α), interpolating the word-level estimate with the
        POS-summed one.  In POS mode ``word`` is a tag."""
        st = self.lookup(label, klabels)
        if st is None or word is None:
            return 0.0
        n = st[0]
        if pos_mode:
            return st[3].get(word, 0.0) / n
        direct = st[2].get(word, 0.0) / n
        via = 0.0
        for tag, c in st[3].items():
            pl = self.p_lex(tag, word)
            if pl:
                via += c / n * pl
        lam = self.table.lam(1, n, len(st[2]) or 1)
        return lam * direct + (1.0 - lam) * via

    def value(self, label: str, klabels: tuple, word, pos_mode: bool = False) -> tuple[float, float]:
        return self.first(label, klabels, word, pos_mode), self.eps(label, klabels)

    def estimate(self, events: Iterable[tuple], tol: float = 1e-6, max_iter: int = 100) -> None:
        """Held-out EM for λ per frequency bucket; events are
        (label, klabels, word, tag) with a non-ε first word."""
        prepared = []
        for label, klabels, word, _tag in events:
            st = self.lookup(label, klabels)
            if st is None:
                continue
            n = st[0]
            direct = st[2].get(word, 0.0) / n
            via = sum(c / n * self.p_lex(t, word) for t, c in st[3].items())
            prepared.append((self.table.bucket(self.table.score(n, len(st[2]) or 1)), direct, via))
        lam = {b: 0.5 for b, _, _ in prepared}
        prev = NEG_INF
        for _ in range(max_iter):
            num, den, ll = Counter(), Counter(), 0.0
            for b, d, v in prepared:
                p = lam[b] * d + (1 - lam[b]) * v
                if p <= 0:
                    continue
                ll += math.log(p)
                num[b] += lam[b] * d / p
                den[b] += 1
            for b in lam:
                if den[b]:
                    lam[b] = num[b] / den[b]
            if ll - prev < tol:
                break
            prev = ll
        self.table = InterpolationTable("freq", self.table.boundaries, {(1, b): v for b, v in lam.items() if b > 0})

    def to_lines(self) -> list[str]:
        out = ["exact\t%d" % self.exact, "order\t%d" % self.order]
        out += ["LAMBDA\t%d\t%r" % (b, v) for (_, b), v in sorted(self.table.lambdas.items())]
        for tag in sorted(self.lex):
            for w, c in sorted(self.lex[tag].items()):
                out.append("LEX\t%s\t%s\t%r" % (tag, w, c))
        for key, (n, e, words, tags) in sorted(self.stats.items(), key=lambda kv: json.dumps(kv[0])):
            out.append("S\t%s\t%r\t%r\t%s\t%s" % (json.dumps(key, ensure_ascii=False), n, e,
                                                json.dumps(words, ensure_ascii=False), json.dumps(tags, ensure_ascii=False)))
        return out

    @classmethod
    def from_lines(cls, lines) -> "LAPTable":
        t = cls()
        lams = {}
        for line in lines:
            parts = line.rstrip("\n").split("\t")
            if parts[0] == "exact":
                t.exact = bool(int(parts[1]))
            elif parts[0] == "order":
                t.order = int(parts[1])
            elif parts[0] == "LAMBDA":
                lams[(1, int(parts[1]))] = float(parts[2])
            elif parts[0] == "LEX":
                t.observe_lex(parts[1], parts[2], float(parts[3]))
            elif parts[0] == "S":
                k = json.loads(parts[1])
                key = (k[0], k[1], tuple(k[2]))
                t.stats[key] = [float(parts[2]), float(parts[3]), Counter(json.loads(parts[4])), Counter(json.loads(parts[5]))]
        t.table = InterpolationTable("freq", t.table.boundaries, lams)
        return t


def lap(table: LAPTable, stack: Sequence[tuple], word, pos_mode: bool = False) -> float:
    """Look-ahead probability of a stack of (label, children-so-far) states,
    top first.  ``word`` None is the end of the string."""
    total, carry = 0.0, 1.0
    for label, klabels in stack:
        if carry == 0.0:
            return total
        f, e = table.value(label, tuple(klabels), word, pos_mode)
        total += carry * f
        carry *= e
    if word is None:
        total += carry
    return total


# -- the trained bundle --------------------------------------------------------------------------


@dataclass
class ParserModel:
    """Everything the parser needs: transform, conditioning, the child,
    word and head models, and the look-ahead tables."""

    transform: str | None = None
    mode: str = "markov"  # or "pcfg"
    cond: ConditioningModel = field(default_factory=ConditioningModel)
    punct: frozenset = DEFAULT_PUNCT
    unk_threshold: int = 1
    child: object = None
    words: InterpolatedModel | None = None
    heads: InterpolatedModel | None = None
    lap: LAPTable | None = None
    lap_nopunct: LAPTable | None = None
    vocab: frozenset = frozenset()
    pos_labels: frozenset = frozenset()
    labels: frozenset = frozenset()
    word_tags: dict = field(default_factory=dict)
    root_label: str = "S"

    def __post_init__(self):
        self.spec = transforms.parse_transform(self.transform) if self.transform else []
        self.view = View(self.spec, self.punct)

    @property
    def use_heads(self) -> bool:
        return self.mode == "markov" and self.cond.uses_heads

    def map_word(self, w: str) -> str:
        return w if w in self.vocab else UNK

    # contexts

    def child_key(self, frame: Frame):
        if self.mode == "pcfg":
            return (frame.label, frame.klabels)
        return self.cond.nonpos_vector(new_node(frame, view=self.view), frame)

    def word_key(self, frame: Frame, tag: str):
        if self.mode == "pcfg":
            return (tag,)
        return self.cond.pos_vector(new_word(frame, tag, view=self.view), tag)

    def head_key(self, frame: Frame, label: str):
        return self.cond.head_vector(frame, label)

    # probabilities

    def child_probs(self, frame: Frame) -> dict:
        return self.child.dist(self.child_key(frame))

    def word_prob(self, frame: Frame, tag: str, word: str) -> float:
        if self.mode == "pcfg":
            n = self.words.totals[1].get((tag,), 0.0)
            return self.words.counts[1][(tag,)].get(word, 0.0) / n if n else 0.0
        return self.words.prob(self.word_key(frame, tag), word)

    def head_prob(self, frame: Frame, label: str) -> float:
        return self.heads.prob(self.head_key(frame, label), True)

    def best_tag(self, word: str) -> str:
        tags = self.word_tags.get(word) or self.word_tags.get(UNK)
        if tags:
            return max(sorted(tags), key=lambda t: tags[t])
        return "NN"

    # tree preparation and replay

    def prepare(self, tree: Tree) -> Tree:
        """Apply the model's transform and gold head assignment."""
        t = transforms.apply(self.spec, tree) if self.spec else tree
        if self.use_heads:
            t = assign_heads(t, self.view)
        return t

    def replay(self, tree: Tree):
        """Yield the derivation events of a prepared tree:
        ('child', frame, outcome), ('head', frame, label, is_head),
        ('word', frame, tag, word)."""
        use_heads = self.use_heads

        def run(frame, node):
            for i, c in enumerate(node.children):
                yield ("child", frame, c.label)
                if use_heads and frame.kids and frame.head is None:
                    decision = node.head == i - 1
                    yield ("head", frame, c.label, decision)
                    if decision:
                        frame = frame.with_head(i - 1)
                if c.is_pos:
                    yield ("word", frame, c.label, c.children[0].label)
                    frame = frame.add(Done.pos(c.label, c.children[0].label))
                else:
                    sub = frame.open_child(c.label)
                    done = yield from run(sub, c)
                    frame = frame.add(done)
            yield ("child", frame, STOP)
            return frame.close()

        root = Frame(START)
        wrapper = Tree(START, (tree,), 0)
        yield from run(root, wrapper)

    def score(self, tree: Tree, prepared: bool = False, pos_mode: bool = False) -> float:
        """Log probability of a tree under the model, by derivation replay."""
        t = tree if prepared else self.prepare(tree)
        lp = 0.0
        for ev in self.replay(t):
            if ev[0] == "child":
                p = self.child_probs(ev[1]).get(ev[2], 0.0)
            elif ev[0] == "head":
                ph = self.head_prob(ev[1], ev[2])
                p = ph if ev[3] else 1.0 - ph
            else:
                if pos_mode:
                    continue
                p = self.word_prob(ev[1], ev[2], self.map_word(ev[3]))
            if p <= 0:
                return NEG_INF
            lp += math.log(p)
        return lp

    # serialization

    def save(self, path: str) -> None:
        cfg = {
            "transform": self.transform,
            "mode": self.mode,
            "punct": sorted(self.punct),
            "unk_threshold": self.unk_threshold,
            "vocab": sorted(self.vocab),
            "pos_labels": sorted(self.pos_labels),
            "labels": sorted(self.labels),
            "word_tags": {w: dict(c) for w, c in sorted(self.word_tags.items())},
            "root_label": self.root_label,
        }
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# tdparse-model 1\n")
            fh.write("@config\n" + json.dumps(cfg, ensure_ascii=False, sort_keys=True) + "\n")
            fh.write("@conditioning\n" + self.cond.describe())
            for name, comp in (("child", self.child), ("words", self.words), ("heads", self.heads),
                               ("lap", self.lap), ("lap_nopunct", self.lap_nopunct)):
                if comp is None:
                    continue
                kind = "prefix" if isinstance(comp, PrefixModel) else ""
                fh.write("@%s %s\n" % (name, kind))
                for line in comp.to_lines():
                    fh.write(line + "\n")

    @classmethod
    def load(cls, path: str) -> "ParserModel":
        sections: dict[str, list] = {}
        kinds = {}
        cur = None
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
            if not first.startswith("# tdparse-model"):
                raise ValueError("%s is not a model file" % path)
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("@"):
                    bits = line[1:].split(" ")
                    cur = bits[0]
                    kinds[cur] = bits[1] if len(bits) > 1 else ""
                    sections[cur] = []
                elif cur is not None:
                    sections[cur].append(line)
        cfg = json.loads(sections["config"][0])
        m = cls(
            transform=cfg["transform"],
            mode=cfg["mode"],
            cond=ConditioningModel.from_text("\n".join(sections["conditioning"])),
            punct=frozenset(cfg["punct"]),
            unk_threshold=cfg["unk_threshold"],
            vocab=frozenset(cfg["vocab"]),
            pos_labels=frozenset(cfg["pos_labels"]),
            labels=frozenset(cfg["labels"]),
            word_tags={w: Counter(c) for w, c in cfg["word_tags"].items()},
            root_label=cfg["root_label"],
        )
        if kinds.get("child") == "prefix":
            m.child = PrefixModel.from_lines(sections["child"])
        else:
            base = InterpolatedModel.from_lines(sections["child"])
            g = MarkovGrammar(m.cond.markov_order, base.depth - 1 - m.cond.markov_order, base.table)
            g.counts, g.totals, g.slash_pin_level = base.counts, base.totals, base.slash_pin_level
            m.child = g
        m.words = InterpolatedModel.from_lines(sections["words"])
        if "heads" in sections:
            m.heads = InterpolatedModel.from_lines(sections["heads"])
        m.lap = LAPTable.from_lines(sections["lap"])
        m.lap_nopunct = LAPTable.from_lines(sections["lap_nopunct"])
        return m


def _first_words(tree: Tree, skip: frozenset) -> dict:
    """id(node) -> (word, tag) of its first non-skipped POS, or None."""
    memo = {}

    def f(t):
        if t.is_pos:
            r = None if t.label in skip else (t.children[0].label, t.label)
        else:
            r = None
            for c in t.children:
                got = f(c)
                if r is None and got is not None:
                    r = got
        memo[id(t)] = r
        return r

    f(tree)
    return memo


def _lap_events(tree: Tree, skip: frozenset, mapw: Callable[[str], str]):
    """(label, klabels, first) for every expansion state of a prepared tree."""
    wrapper = Tree(START, (tree,))
    firsts = _first_words(wrapper, skip)

    def walk(t):
        if t.is_pos or t.terminal:
            return
        labels = tuple(c.label for c in t.children)
        suffix = [None] * (len(t.children) + 1)
        for k in range(len(t.children) - 1, -1, -1):
            suffix[k] = firsts[id(t.children[k])] or suffix[k + 1]
        for k in range(len(t.children) + 1):
            fw = suffix[k]
            yield t.label, labels[:k], (mapw(fw[0]), fw[1]) if fw else None
        for c in t.children:
            yield from walk(c)

    yield from walk(wrapper)


def train(
    trees: Iterable[Tree],
    transform: str | None = None,
    conditioning: str | ConditioningModel = "all",
    mode: str = "markov",
    heldout: Iterable[Tree] | None = None,
    bucketing: str = "avgcount",
    unk_threshold: int = 1,
    punct: Iterable[str] = DEFAULT_PUNCT,
    markov_order: int = 3,
    lc_chain: bool = False,
    weights: Sequence[float] | None = None,
) -> ParserModel:
    """Train a parser model from (untransformed) treebank trees."""
    trees = list(trees)
    if not trees:
        raise ValueError("no training trees")
    if mode not in ("markov", "pcfg"):
        raise ValueError("mode must be 'markov' or 'pcfg'")
    weights = list(weights) if weights is not None else [1.0] * len(trees)
    if isinstance(conditioning, ConditioningModel):
        cond = conditioning
    else:
        cond = ConditioningModel.named(conditioning, lc_chain=lc_chain, markov_order=markov_order)
    pm = ParserModel(transform=transform, mode=mode, cond=cond, punct=frozenset(punct), unk_threshold=unk_threshold)
    counts = Counter(w for t in trees for w in t.words())
    pm.vocab = frozenset(w for w, c in counts.items() if c > unk_threshold)
    prepared = [pm.prepare(t) for t in trees]
    pm.labels = frozenset(l for t in trees for l in _phrase_labels(t))
    pm.pos_labels = frozenset(p.label for t in prepared for p in t.pos_nodes())
    pm.root_label = Counter(t.label for t in trees).most_common(1)[0][0]
    flc = any(s.kind == "flc" for s in pm.spec)
    table = InterpolationTable(bucketing)
    if mode == "pcfg":
        pm.child = PrefixModel()
        pm.words = InterpolatedModel(1, InterpolationTable(bucketing))
    else:
        width = cond.nonpos_width()
        pm.child = MarkovGrammar(cond.markov_order, width - 1 - cond.markov_order, table, flc=flc)
        pm.words = InterpolatedModel(cond.pos_width(), InterpolationTable(bucketing))
    pm.heads = InterpolatedModel(5, InterpolationTable(bucketing)) if pm.use_heads else None
    exact = mode == "pcfg"
    pm.lap = LAPTable(exact, cond.markov_order)
    pm.lap_nopunct = LAPTable(exact, cond.markov_order)
    word_tags: dict[str, Counter] = defaultdict(Counter)
    for t, wt in zip(prepared, weights):
        for ev in pm.replay(t):
            _observe(pm, ev, wt)
        for p in t.pos_nodes():
            mw = pm.map_word(p.children[0].label)
            word_tags[mw][p.label] += wt
            pm.lap.observe_lex(p.label, mw, wt)
            pm.lap_nopunct.observe_lex(p.label, mw, wt)
        for label, kl, first in _lap_events(t, frozenset(), pm.map_word):
            pm.lap.observe(label, kl, first, wt)
        for label, kl, first in _lap_events(t, pm.punct, pm.map_word):
            pm.lap_nopunct.observe(label, kl, first, wt)
    pm.word_tags = dict(word_tags)
    if heldout is not None:
        estimate_heldout(pm, heldout)
    return pm


def _phrase_labels(t: Tree):
    for s in t.subtrees():
        if not s.terminal and not s.is_pos:
            yield s.label


def _observe(pm: ParserModel, ev, weight: float) -> None:
    kind = ev[0]
    if kind == "child":
        pm.child.observe(pm.child_key(ev[1]), ev[2], weight)
    elif kind == "head":
        pm.heads.observe(pm.head_key(ev[1], ev[2]), ev[3], weight)
    else:
        pm.words.observe(pm.word_key(ev[1], ev[2]), pm.map_word(ev[3]), weight)


def estimate_heldout(pm: ParserModel, heldout: Iterable[Tree]) -> None:
    """Estimate interpolation λs of every smoothed component on held-out trees."""
    child_ev, word_ev, head_ev, lap_ev, lapn_ev = [], [], [], [], []
    for tree in heldout:
        t = pm.prepare(tree)
        for ev in pm.replay(t):
            if ev[0] == "child":
                child_ev.append((pm.child_key(ev[1]), ev[2]))
            elif ev[0] == "head":
                head_ev.append((pm.head_key(ev[1], ev[2]), ev[3]))
            else:
                word_ev.append((pm.word_key(ev[1], ev[2]), pm.map_word(ev[3])))
        for label, kl, first in _lap_events(t, frozenset(), pm.map_word):
            if first is not None:
                lap_ev.append((label, kl, first[0], first[1]))
        for label, kl, first in _lap_events(t, pm.punct, pm.map_word):
            if first is not None:
                lapn_ev.append((label, kl, first[0], first[1]))
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if pm.mode == "markov":
            estimate_lambdas(pm.child, child_ev)
            estimate_lambdas(pm.words, word_ev)
            if pm.heads is not None:
                estimate_lambdas(pm.heads, head_ev)
    pm.lap.estimate(lap_ev)
    pm.lap_nopunct.estimate(lapn_ev)


# -- search ---------------------------------------------------------------------------------------


class Analysis:
    """A candidate analysis: top frame of the stack, log P_D, log F and the
    index of its look-ahead word.  Once complete, ``frame`` holds the closed
    start node and ``i`` is past the end of the input."""

    __slots__ = ("logp", "logF", "frame", "i", "seq")

    def __init__(self, logp, frame, i, logF=None, seq=0):
        self.logp = logp
        self.frame = frame
        self.i = i
        self.logF = logp if logF is None else logF
        self.seq = seq

    def __lt__(self, other):
        if self.logF != other.logF:
            return self.logF > other.logF
        return self.seq < other.seq


class WordQueue:
    """Max-priority queue on F with stable tie-breaking by creation order."""

    def __init__(self):
        self.heap: list[Analysis] = []
        self.pushed = 0
        self.initial: list[Analysis] = []

    def push(self, a: Analysis, initial: bool = False) -> None:
        heapq.heappush(self.heap, a)
        self.pushed += 1
        if initial:
            self.initial.append(a)

    def pop(self) -> Analysis:
        return heapq.heappop(self.heap)

    def top(self) -> Analysis | None:
        return self.heap[0] if self.heap else None

    def __len__(self) -> int:
        return len(self.heap)

    @property
    def best_logp(self) -> float:
        return self.heap[0].logp if self.heap else NEG_INF


def f_words(gamma: float, k: int) -> float:
    return gamma * k ** 3


def f_pos(gamma: float, k: int) -> float:
    return gamma * k


def threshold(p_tilde: float, gamma: float, k: int, f: Callable = f_words) -> float:
    """Probability below which analyses are discarded."""
    return p_tilde * f(gamma, k)


def above_threshold(c, next_queue, gamma: float, f: Callable = f_words) -> bool:
    """F(c) > p̃·f(γ, |next_queue|), in the log domain; empty queue passes.

    ``c`` is an Analysis or a log figure of merit."""
    if next_queue is None or len(next_queue) == 0:
        return True
    logF = c.logF if isinstance(c, Analysis) else c
    fac = f(gamma, len(next_queue))
    if fac <= 0:
        return True
    return logF > next_queue.best_logp + math.log(fac)


@dataclass
class ParseOptions:
    gamma: float = 1e-11
    gamma_initial: float | None = None
    input_mode: str = "words"  # or "pos"
    empty_punct: bool = False
    max_pop: int = 10000
    floor: float = 1e-12
    nbest: int | None = None
    detransform: bool = True

    def __post_init__(self):
        if self.input_mode not in ("words", "pos"):
            raise ValueError("input mode must be 'words' or 'pos'")
        if not self.gamma > 0 or (self.gamma_initial is not None and not self.gamma_initial > 0):
            raise ValueError("beam factors must be positive")


@dataclass
class ParseResult:
    words: list
    parses: list  # (log probability, tree), best first
    log_masses: list  # log Σ P_D over each initial queue, positions 0..n+1
    expansions: list  # per look-ahead position 0..n
    advanced: list
    pops: list
    garden_path: bool = False
    failed_at: int | None = None
    dead: int = 0

    @property
    def masses(self) -> list[float]:
        return [math.exp(x) for x in self.log_masses]

    @property
    def best(self) -> Tree | None:
        return self.parses[0][1] if self.parses else None

    @property
    def log_string_prob(self) -> float:
        return self.log_masses[-1] if len(self.log_masses) == len(self.words) + 2 else NEG_INF


class Parser:
    def __init__(self, model: ParserModel, options: ParseOptions | None = None, **kw):
        self.model = model
        self.options = options or ParseOptions(**kw)
        o = self.options
        self.pos_mode = o.input_mode == "pos"
        self.f = f_pos if self.pos_mode else f_words
        self.table = model.lap_nopunct if o.empty_punct else model.lap
        self.use_heads = model.use_heads

    # look-ahead over the frame spine, cached on the shared parent frames

    def _state_lap(self, frame: Frame, i: int) -> float:
        f, e = self.table.value(frame.label, frame.klabels, self._la[i], self.pos_mode)
        if e == 0.0:
            return f
        return f + e * self._below(frame, i)

    def _below(self, frame: Frame, i: int) -> float:
        p = frame.parent
        if p is None:
            return 1.0 if self._la[i] is None else 0.0
        if p.cache is None:
            p.cache = {}
        key = (frame.label, i)
        got = p.cache.get(key)
        if got is None:
            kl = p.klabels + (frame.label,)
            f, e = self.table.value(p.label, kl, self._la[i], self.pos_mode)
            got = f + (e * self._below(p, i) if e else 0.0)
            p.cache[key] = got
        return got

    def _make(self, logp: float, frame, i: int) -> Analysis:
        if i > self._n:
            a = Analysis(logp, frame, i, logp)
        else:
            a = Analysis(logp, frame, i, logp + _log(self._state_lap(frame, i)))
        a.seq = next(self._seq)
        return a

    def derive_step(self, c: Analysis) -> list[Analysis]:
        """All successors of ``c``; those with a larger ``i`` consumed a word
        (or, past the last word, are complete)."""
        m, o = self.model, self.options
        frame, i = c.frame, c.i
        tok = self._tokens[i] if i < self._n else None
        out = []
        dist = m.child_probs(frame)
        self._exp[i] += len(dist)
        for outcome, p in dist.items():
            if p < o.floor:
                continue
            lp = c.logp + math.log(p)
            if outcome == STOP:
                if frame.label == START:
                    if not frame.kids:
                        continue
                    if tok is not None:
                        self._dead += 1
                        continue
                    out.append(self._make(lp, frame.close(), self._n + 1))
                else:
                    out.append(self._make(lp, frame.parent.add(frame.close()), i))
                continue
            variants = [(frame, 0.0)]
            if self.use_heads and frame.kids and frame.head is None:
                ph = m.head_prob(frame, outcome)
                self._exp[i] += 1
                variants = []
                if ph >= o.floor:
                    variants.append((frame.with_head(len(frame.kids) - 1), math.log(ph)))
                if 1.0 - ph >= o.floor:
                    variants.append((frame, math.log(1.0 - ph)))
            for fr, hl in variants:
                if outcome in m.pos_labels:
                    if o.empty_punct and outcome in m.punct:
                        out.append(self._make(lp + hl, fr.add(Done.pos(outcome, None)), i))
                        continue
                    if tok is None:
                        continue
                    if self.pos_mode:
                        if outcome != tok:
                            continue
                        wl = 0.0
                    else:
                        pw = m.word_prob(fr, outcome, tok)
                        self._exp[i] += 1
                        if pw < o.floor:
                            continue
                        wl = math.log(pw)
                    out.append(self._make(lp + hl + wl, fr.add(Done.pos(outcome, self._words[i])), i + 1))
                else:
                    out.append(self._make(lp + hl, fr.open_child(outcome), i))
        return out

    def parse(self, words: Sequence[str], prefix_only: bool = False) -> ParseResult:
        """Parse ``words``.  With ``prefix_only`` the search stops once the
        last word is consumed, so only prefix masses are meaningful."""
        m, o = self.model, self.options
        words = list(words)
        if not words:
            raise ValueError("cannot parse an empty sentence")
        n = len(words)
        self._n = n
        self._words = words
        self._tokens = words if self.pos_mode else [m.map_word(w) for w in words]
        self._la = list(self._tokens) + [None, None]
        self._seq = itertools.count()
        self._exp = [0] * (n + 2)
        self._dead = 0
        queues = [WordQueue() for _ in range(n + 2)]
        start = self._make(0.0, Frame(START), 0)
        queues[0].push(start, initial=True)
        init_mass = [[0.0]] + [[] for _ in range(n + 1)]
        advanced = [0] * (n + 1)
        pops = [0] * (n + 1)
        failed_at = None
        for i in range(n if prefix_only else n + 1):
            H, nxt = queues[i], queues[i + 1]
            gamma = o.gamma_initial if (i == 0 and o.gamma_initial is not None) else o.gamma
            while len(H) and pops[i] < o.max_pop and above_threshold(H.top(), nxt, gamma, self.f):
                c = H.pop()
                pops[i] += 1
                for s in self.derive_step(c):
                    if s.i == i:
                        H.push(s)
                    else:
                        nxt.push(s, initial=True)
                        init_mass[i + 1].append(s.logp)
                        advanced[i] += 1
            if not len(nxt):
                failed_at = i
                break
        log_masses = [logsumexp(x) for x in init_mass[: (failed_at + 1 if failed_at is not None else n + 2)]]
        if prefix_only:
            if failed_at is None:
                log_masses = log_masses[: n + 1]
            return ParseResult(words, [], log_masses, self._exp[: n + 1], advanced, pops, failed_at is not None, failed_at, self._dead)
        if failed_at is None:
            finals = sorted(queues[n + 1].heap, key=lambda a: (-a.logp, a.seq))
            if o.nbest:
                finals = finals[: o.nbest]
            parses = [(a.logp, self._output(a.frame)) for a in finals]
            gp = False
        else:
            tree = complete_partial_parse(queues[failed_at], words[failed_at:], m, self.pos_mode)
            parses = [(NEG_INF, self._finish(tree))]
            gp = True
        return ParseResult(words, parses, log_masses, self._exp[: n + 1], advanced, pops, gp, failed_at, self._dead)

    def _output(self, done: Done) -> Tree:
        return self._finish(done.kids[0].to_tree())

    def _finish(self, tree: Tree) -> Tree:
        tree = _drop_empty_pos(tree, self.model.pos_labels)
        if self.options.detransform and self.model.spec:
            return detransform_lenient(self.model, tree)
        return tree


def _drop_empty_pos(t: Tree, pos_labels) -> Tree:
    if t.terminal or t.is_pos:
        return t
    keep = [c for c in t.children if not (c.label in pos_labels and not c.children)]
    kids = tuple(_drop_empty_pos(c, pos_labels) for c in keep)
    return Tree(t.label, kids, t.head if len(keep) == len(t.children) else None)


def detransform_lenient(model: ParserModel, tree: Tree) -> Tree:
    """Detransform, falling back to splicing out nodes whose labels are not
    plain treebank labels when the tree is not a well-formed image."""
    try:
        return transforms.detransform(model.spec, tree)
    except transforms.TransformError:
        return _splice(tree, model.labels, model.pos_labels)


def _splice(t: Tree, keep, pos_labels) -> Tree:
    def kids(node):
        out = []
        for c in node.children:
            if c.is_pos:
                out.append(c)
            elif c.terminal:
                continue
            elif c.label in keep:
                out.append(Tree(c.label, tuple(kids(c))))
            else:
                out.extend(kids(c))
        return out

    label = t.label
    if label not in keep:
        label = sorted(keep)[0] if keep else t.label
    return Tree(label, tuple(kids(t)))


def complete_partial_parse(queue: WordQueue, remaining: Sequence[str], model: ParserModel, pos_mode: bool = False) -> Tree:
    """Close the best initially-ranked analysis on ``queue`` and attach the
    remaining words under its root.  Labels stay in the transformed space."""
    tags = [w if pos_mode else model.best_tag(model.map_word(w)) for w in remaining]
    extra = tuple(Done.pos(t, w) for t, w in zip(tags, remaining))
    best = min(queue.initial) if queue.initial else None
    frame = best.frame if best is not None else None
    root = None
    while frame is not None and frame.label != START:
        done = frame.close()
        if frame.parent is None or frame.parent.label == START:
            root = done
            break
        frame = frame.parent.add(done)
    if root is None and frame is not None and frame.kids:
        root = frame.kids[0]
    if root is None or root.terminal or root.is_pos:
        lead = (root,) if root is not None else ()
        root = Done(model.root_label, lead)
    return Done(root.label, tuple(root.kids) + extra).to_tree()


def parse(sentence: Sequence[str], model: ParserModel, gamma: float = 1e-11, **options) -> ParseResult:
    return Parser(model, ParseOptions(gamma=gamma, **options)).parse(sentence)


def next_word_probs(parser: Parser, prefix: Sequence[str], vocabulary: Iterable[str]) -> dict:
    """P(w | prefix) for every w in ``vocabulary`` plus the end of string,
    from prefix masses.  Used to check how much mass the beam keeps."""
    prefix = list(prefix)
    if prefix:
        base = parser.parse(prefix, prefix_only=True).log_masses
        den = base[len(prefix)] if len(base) > len(prefix) else NEG_INF
    else:
        den = 0.0
    out = {}
    if den == NEG_INF:
        return out
    for w in vocabulary:
        r = parser.parse(prefix + [w], prefix_only=True)
        lm = r.log_masses
        out[w] = math.exp(lm[len(prefix) + 1] - den) if len(lm) > len(prefix) + 1 else 0.0
    if prefix:
        r = parser.parse(prefix)
        out["</s>"] = math.exp(r.log_masses[-1] - den) if not r.garden_path else 0.0
    return out
