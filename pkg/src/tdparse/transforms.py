"""Reversible corpus transforms: factorization, left-corner family, annotation.

Composite labels are built per layer.  Each layer percent-escapes its own
separator characters (and ``%``) inside the pieces it combines, and in the
plain labels it passes through, so every detransform is an exact inverse.
"""

from __future__ import annotations

import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence
from urllib.parse import unquote

from .treebank import Corpus, Tree

KINDS = ("lf0", "lf1", "lf2", "rf", "lc", "slc", "flc", "pa", "lca")
LC_KINDS = ("lc", "slc", "flc")
ANNOTATE = "↑"  # upward arrow, as in NP↑S


class TransformError(ValueError):
    """Bad transform configuration, or a tree the detransform cannot invert."""


def _pct(ch: str) -> str:
    return "".join("%%%02X" % b for b in ch.encode("utf-8"))


def escape(s: str, specials: str) -> str:
    return "".join(_pct(c) if c in specials or c == "%" else c for c in s)


def unescape(s: str) -> str:
    return unquote(s)


# -- specs -------------------------------------------------------------------


def _glob(pat: str) -> Callable[[str], bool]:
    if pat in ("*", ""):
        return lambda s: True
    rx = re.compile("^" + ".*".join(re.escape(p) for p in pat.split("*")) + "$")
    return lambda s: rx.match(s) is not None


@dataclass(frozen=True)
class TransformSpec:
    """One transform step.

    ``predicate`` (SLC) is a ``"PARENT>CHILD"`` pattern with ``*``
    wildcards, e.g. ``"NP>NP"``; ``category`` is FLC's A.
    """

    kind: str
    eps_remove: bool = False
    predicate: str | None = None
    category: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise TransformError("unknown transform kind %r" % self.kind)
        if self.kind == "slc" and not self.predicate:
            raise TransformError("slc needs a PARENT>CHILD predicate")
        if self.kind == "flc" and not self.category:
            raise TransformError("flc needs a category")
        if self.eps_remove and self.kind not in ("lc", "slc"):
            raise TransformError("eps-remove applies only to lc/slc")

    def in_lc_set(self, parent: str, child: str) -> bool:
        if self.kind == "lc":
            return True
        if self.kind == "flc":
            return parent == self.category and child == self.category
        p, _, c = self.predicate.partition(">")
        return _glob(p)(parent) and _glob(c)(child)

    def __str__(self) -> str:
        s = self.kind
        if self.eps_remove:
            s += "-eps"
        if self.predicate:
            s += ":" + self.predicate
        if self.category:
            s += ":" + self.category
        return s


Composition = tuple


def parse_transform(text: str | None, eps_remove: bool = False) -> Composition:
    """Parse ``"lc,lf"`` style compositions, applied left to right.

    A bare ``lf`` following a left-corner step becomes LF1, or LF0 when that
    step removes epsilons; standalone ``lf`` means LF0.
    """
    if not text or text == "none":
        return ()
    out: list[TransformSpec] = []
    for item in text.split(","):
        item = item.strip()
        kind, _, param = item.partition(":")
        kind = kind.lower()
        eps = eps_remove
        if kind.endswith("-eps"):
            kind, eps = kind[:-4], True
        if kind == "lf":
            prev = out[-1] if out else None
            if prev is not None and prev.kind in LC_KINDS:
                kind = "lf0" if prev.eps_remove else "lf1"
            else:
                kind = "lf0"
        if kind not in KINDS:
            raise TransformError("unknown transform kind %r" % kind)
        kw: dict = {}
        if kind == "slc":
            kw["predicate"] = param or "NP>NP"
        elif kind == "flc":
            kw["category"] = param or "NP"
        if kind in ("lc", "slc"):
            kw["eps_remove"] = eps
        out.append(TransformSpec(kind, **kw))
    return tuple(out)


def _as_steps(spec) -> Sequence[TransformSpec]:
    if spec is None:
        return ()
    if isinstance(spec, TransformSpec):
        return (spec,)
    if isinstance(spec, str):
        return parse_transform(spec)
    return tuple(spec)


def apply(spec, tree: Tree) -> Tree:
    """Apply a transform or composition; ``[a, b]`` means b(a(tree))."""
    for step in _as_steps(spec):
        tree = _APPLY[step.kind](step, tree)
    return tree


def detransform(spec, tree: Tree) -> Tree:
    for step in reversed(_as_steps(spec)):
        tree = _UNDO[step.kind](step, tree)
    return tree


def _phrasal(t: Tree) -> bool:
    return not t.terminal and not t.is_pos


# -- left / right factorization ------------------------------------------------

_LF = "-,"


def lf_label(base: str, consumed: Sequence[str]) -> str:
    return escape(base, _LF) + "-" + ",".join(escape(c, _LF) for c in consumed)


def split_lf_label(label: str) -> tuple[str, list[str]] | None:
    if "-" not in label:
        return None
    base, rest = label.split("-", 1)
    return unescape(base), [unescape(c) for c in rest.split(",")] if rest else []


def _keep(spec: TransformSpec) -> int:
    return int(spec.kind[2])


def _lf_apply(spec: TransformSpec, t: Tree) -> Tree:
    if not _phrasal(t):
        return t
    keep = _keep(spec)
    label = escape(t.label, "-")
    kids = [_lf_apply(spec, c) for c in t.children]
    names = [c.label for c in t.children]
    if len(kids) <= keep or not kids:
        return Tree(label, tuple(kids))
    split = len(kids) - keep
    tail = Tree(lf_label(t.label, names[:split]), tuple(kids[split:]))
    for j in range(split - 1, 0, -1):
        tail = Tree(lf_label(t.label, names[:j]), (kids[j], tail))
    return Tree(label, (kids[0], tail))


def _is_lf_node(t: Tree) -> bool:
    return _phrasal(t) and "-" in t.label


def _lf_undo(spec: TransformSpec, t: Tree) -> Tree:
    if not _phrasal(t):
        return t
    if "-" in t.label:
        raise TransformError("factored label %r outside a factored chain" % t.label)
    keep = _keep(spec)
    base = unescape(t.label)
    kids: list[Tree] = []
    node = t
    descended = False
    while True:
        ch = node.children
        if ch and _is_lf_node(ch[-1]):
            kids.extend(_lf_undo(spec, c) for c in ch[:-1])
            node = ch[-1]
            got = split_lf_label(node.label)
            if got[0] != base or got[1] != [k.label for k in kids]:
                raise TransformError("factored label %r does not match its context" % node.label)
            descended = True
        else:
            kids.extend(_lf_undo(spec, c) for c in ch)
            break
    if descended:
        if len(node.children) != keep:
            raise TransformError(
                "factored chain of %r ends in %d children, expected %d" % (base, len(node.children), keep)
            )
    elif t.children and (keep == 0 or len(t.children) > keep):
        raise TransformError("node %r lacks its factored stop child" % t.label)
    return Tree(base, tuple(kids))


_RF = "+"


def _rf_apply(spec: TransformSpec, t: Tree) -> Tree:
    if not _phrasal(t):
        return t
    label = escape(t.label, _RF)
    kids = [_rf_apply(spec, c) for c in t.children]
    if len(kids) < 3:
        return Tree(label, tuple(kids))
    names = [escape(c.label, _RF) for c in t.children]
    node = kids[0]
    for j in range(1, len(kids) - 1):
        node = Tree("+".join(names[: j + 1]), (node, kids[j]))
    return Tree(label, (node, kids[-1]))


def _is_rf_group(t: Tree) -> bool:
    return _phrasal(t) and "+" in t.label


def _rf_expand(g: Tree) -> list[Tree]:
    if len(g.children) != 2:
        raise TransformError("right-factored group %r is not binary" % g.label)
    left, right = g.children
    out = _rf_expand(left) if _is_rf_group(left) else [_rf_undo(None, left)]
    out.append(_rf_undo(None, right))
    if [unescape(x) for x in g.label.split("+")] != [k.label for k in out]:
        raise TransformError("group label %r does not match its children" % g.label)
    return out


def _rf_undo(spec, t: Tree) -> Tree:
    if not _phrasal(t):
        return t
    if "+" in t.label:
        raise TransformError("group label %r outside a factored node" % t.label)
    ch = t.children
    if ch and _is_rf_group(ch[0]):
        if len(ch) != 2:
            raise TransformError("right-factored node %r is not binary" % t.label)
        kids = _rf_expand(ch[0]) + [_rf_undo(spec, ch[1])]
    else:
        kids = [_rf_undo(spec, c) for c in ch]
    return Tree(unescape(t.label), tuple(kids))


# -- left-corner family --------------------------------------------------------


def slash_label(ancestor: str, found: str) -> str:
    return escape(ancestor, "/") + "/" + escape(found, "/")


def split_slash(label: str) -> tuple[str, str] | None:
    if "/" not in label:
        return None
    a, b = label.split("/", 1)
    return unescape(a), unescape(b)


def _slash_of(t: Tree, ancestor: str) -> tuple[str, str] | None:
    if not _phrasal(t):
        return None
    got = split_slash(t.label)
    if got is None or got[0] != ancestor:
        return None
    return got


def _lc_apply(spec: TransformSpec, t: Tree) -> Tree:
    if not _phrasal(t):
        return t
    if not t.children:
        return Tree(escape(t.label, "/"))
    chain = [t]
    while True:
        cur = chain[-1]
        if cur.is_pos or not cur.children:
            break
        if not spec.in_lc_set(cur.label, cur.children[0].label):
            break
        chain.append(cur.children[0])
    if len(chain) == 1:
        return Tree(escape(t.label, "/"), tuple(_lc_apply(spec, c) for c in t.children))
    d = t.label
    bottom = chain[-1]
    if bottom.is_pos:
        front = [bottom]
    else:
        front = [_lc_apply(spec, c) for c in bottom.children]
    k = len(chain) - 1
    if spec.kind == "flc":
        if not front:
            raise TransformError("flattened left-corner would put a slash category leftmost under %r" % d)
        slashes = []
        for j in range(k - 1, -1, -1):
            beta = [_lc_apply(spec, c) for c in chain[j].children[1:]]
            slashes.append(Tree(slash_label(d, chain[j + 1].label), tuple(beta)))
        return Tree(escape(d, "/"), tuple(front + slashes))
    tail = None if spec.eps_remove else Tree(slash_label(d, d))
    for j in range(k):
        beta = [_lc_apply(spec, c) for c in chain[j].children[1:]]
        kids = beta + ([tail] if tail is not None else [])
        tail = Tree(slash_label(d, chain[j + 1].label), tuple(kids))
    return Tree(escape(d, "/"), tuple(front + [tail]))


def _lc_bottom(spec, front: Sequence[Tree], found: str) -> Tree:
    if len(front) == 1 and front[0].is_pos and front[0].label == found:
        return front[0]
    return Tree(found, tuple(_lc_undo(spec, c) for c in front))


def _lc_undo(spec: TransformSpec, t: Tree) -> Tree:
    if not _phrasal(t):
        return t
    if "/" in t.label:
        raise TransformError("slash label %r in a predicted position" % t.label)
    d = unescape(t.label)
    ch = t.children
    if spec.kind == "flc":
        i = len(ch)
        while i > 0 and _slash_of(ch[i - 1], d):
            i -= 1
        if i == len(ch):
            return Tree(d, tuple(_lc_undo(spec, c) for c in ch))
        if i == 0:
            raise TransformError("slash category leftmost under %r" % d)
        cur = _lc_bottom(spec, ch[:i], _slash_of(ch[i], d)[1])
        for s in ch[i:]:
            if _slash_of(s, d)[1] != cur.label:
                raise TransformError("slash label %r does not continue its chain" % s.label)
            cur = Tree(d, (cur,) + tuple(_lc_undo(spec, c) for c in s.children))
        return cur
    if not ch or not _slash_of(ch[-1], d):
        return Tree(d, tuple(_lc_undo(spec, c) for c in ch))
    s = ch[-1]
    cur = _lc_bottom(spec, ch[:-1], _slash_of(s, d)[1])
    while True:
        sch = s.children
        if sch and _slash_of(sch[-1], d):
            nxt = sch[-1]
            cur = Tree(_slash_of(nxt, d)[1], (cur,) + tuple(_lc_undo(spec, c) for c in sch[:-1]))
            s = nxt
            continue
        if spec.eps_remove:
            return Tree(d, (cur,) + tuple(_lc_undo(spec, c) for c in sch))
        if sch or _slash_of(s, d)[1] != d or cur.label != d:
            raise TransformError("slash chain of %r does not end in %s/%s" % (d, d, d))
        return cur


# -- annotation ------------------------------------------------------------------


def _annot(label: str, extra: str | None) -> str:
    if extra is None:
        return escape(label, ANNOTATE)
    return escape(label, ANNOTATE) + ANNOTATE + escape(extra, ANNOTATE)


def _pa_apply(spec, t: Tree, parent: str | None = None) -> Tree:
    if not _phrasal(t):
        return t
    kids = tuple(_pa_apply(spec, c, t.label) for c in t.children)
    return Tree(_annot(t.label, parent), kids)


def _lca_apply(spec, t: Tree, anc: str | None = None) -> Tree:
    if not _phrasal(t):
        return t
    kids = []
    for i, c in enumerate(t.children):
        child_anc = (anc if anc is not None else t.label) if i == 0 else None
        kids.append(_lca_apply(spec, c, child_anc))
    return Tree(_annot(t.label, anc), tuple(kids))


def _strip_annot(label: str) -> tuple[str, str | None]:
    if ANNOTATE in label:
        a, b = label.split(ANNOTATE, 1)
        return unescape(a), unescape(b)
    return unescape(label), None


def _pa_undo(spec, t: Tree, parent: str | None = None) -> Tree:
    if not _phrasal(t):
        return t
    label, ann = _strip_annot(t.label)
    if ann != parent:
        raise TransformError("annotation on %r does not name its parent" % t.label)
    return Tree(label, tuple(_pa_undo(spec, c, label) for c in t.children))


def _lca_undo(spec, t: Tree, anc: str | None = None) -> Tree:
    if not _phrasal(t):
        return t
    label, ann = _strip_annot(t.label)
    if ann != anc:
        raise TransformError("left-corner annotation on %r is inconsistent" % t.label)
    kids = []
    for i, c in enumerate(t.children):
        child_anc = (anc if anc is not None else label) if i == 0 else None
        kids.append(_lca_undo(spec, c, child_anc))
    return Tree(label, tuple(kids))


_APPLY = {
    "lf0": _lf_apply,
    "lf1": _lf_apply,
    "lf2": _lf_apply,
    "rf": _rf_apply,
    "lc": _lc_apply,
    "slc": _lc_apply,
    "flc": _lc_apply,
    "pa": _pa_apply,
    "lca": _lca_apply,
}
_UNDO = {
    "lf0": _lf_undo,
    "lf1": _lf_undo,
    "lf2": _lf_undo,
    "rf": _rf_undo,
    "lc": _lc_undo,
    "slc": _lc_undo,
    "flc": _lc_undo,
    "pa": _pa_undo,
    "lca": _lca_undo,
}


def constituent_name(label: str, spec=None) -> str:
    """The label of the constituent whose factorization produced ``label``.

    Factoring and slash layers are peeled from the outermost step inward;
    annotation layers stop the peeling since they are part of the category.
    """
    for step in reversed(_as_steps(spec)):
        if step.kind in ("pa", "lca"):
            return label
        if step.kind.startswith("lf"):
            got = split_lf_label(label)
            label = got[0] if got else unescape(label)
        elif step.kind == "rf":
            label = unescape(label.split("+")[-1]) if "+" in label else unescape(label)
        else:
            got = split_slash(label)
            label = got[0] if got else unescape(label)
    return label


def transform_corpus(spec, trees: Iterable[Tree]) -> list[Tree]:
    return [apply(spec, t) for t in trees]


# -- left-child chains -----------------------------------------------------------


def left_child_chains(tree: Tree) -> list[list[str]]:
    """Per word, the labels of consecutive leftmost ancestors above its POS.

    The chain climbs from the POS while the current node is the leftmost
    child of its parent; the POS itself is excluded.
    """
    out: list[list[str]] = []

    def walk(t: Tree, up: list[str]):
        # ``up`` is the chain that continues above t if t is reached leftmost
        if t.is_pos:
            out.append(up)
            return
        for i, c in enumerate(t.children):
            if not c.terminal:
                walk(c, [t.label] + up if i == 0 else [])

    walk(tree, [])
    return out


@dataclass
class ChainStats:
    words: Counter = field(default_factory=Counter)
    depth: dict = field(default_factory=lambda: defaultdict(Counter))
    consecutive: dict = field(default_factory=lambda: defaultdict(Counter))
    nonconsecutive: Counter = field(default_factory=Counter)


def corpus_chain_stats(corpus: Corpus | Iterable[Tree]) -> ChainStats:
    """Left-child chain depth histograms, chains longer than one only.

    ``depth[(position, kind)][d]`` with position ``first``/``other`` and kind
    ``recursion``/``none``; ``consecutive[cat][d]`` records, per recursive
    chain, the longest run of ``cat`` as its own leftmost child.
    """
    stats = ChainStats()
    trees = corpus.trees if isinstance(corpus, Corpus) else corpus
    for t in trees:
        for i, chain in enumerate(left_child_chains(t)):
            position = "first" if i == 0 else "other"
            stats.words[position] += 1
            if len(chain) <= 1:
                continue
            counts = Counter(chain)
            recursive = any(v > 1 for v in counts.values())
            stats.depth[(position, "recursion" if recursive else "none")][len(chain)] += 1
            if not recursive:
                continue
            runs: dict[str, int] = {}
            run = 1
            for j in range(1, len(chain) + 1):
                if j < len(chain) and chain[j] == chain[j - 1]:
                    run += 1
                    continue
                if run > 1:
                    runs[chain[j - 1]] = max(runs.get(chain[j - 1], 0), run)
                run = 1
            if runs:
                for cat, r in runs.items():
                    stats.consecutive[cat][r] += 1
            else:
                stats.nonconsecutive[len(chain)] += 1
    return stats
