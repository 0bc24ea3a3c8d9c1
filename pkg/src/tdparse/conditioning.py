"""Partial parses, tree-walking feature functions and conditioning models.

A partial parse is a spine of open :class:`Frame` objects whose completed
children are immutable :class:`Done` nodes.  Feature functions walk a
:class:`Cursor`, which carries its parent so that completed nodes can be
shared between analyses.  NULL is represented by ``None``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from . import transforms
from .treebank import DEFAULT_PUNCT, Tree, base_label

START = "S†"
NULL = None


# -- partial parse structures ----------------------------------------------------


class Done:
    """A completed node: constituent, POS, or terminal word."""

    __slots__ = ("label", "kids", "head", "terminal")

    def __init__(self, label: str, kids: tuple = (), head: int | None = None, terminal: bool = False):
        self.label = label
        self.kids = kids
        self.head = head
        self.terminal = terminal

    @classmethod
    def word(cls, w: str) -> "Done":
        return cls(w, (), None, True)

    @classmethod
    def pos(cls, tag: str, w: str | None) -> "Done":
        if w is None:
            return cls(tag, (), None)
        return cls(tag, (cls.word(w),), 0)

    @property
    def is_pos(self) -> bool:
        return len(self.kids) == 1 and self.kids[0].terminal

    def to_tree(self) -> Tree:
        if self.terminal:
            return Tree.leaf(self.label)
        return Tree(self.label, tuple(k.to_tree() for k in self.kids), self.head)

    @classmethod
    def from_tree(cls, t: Tree) -> "Done":
        if t.terminal:
            return cls.word(t.label)
        head = t.head
        if t.is_pos:
            head = 0
        return cls(t.label, tuple(cls.from_tree(c) for c in t.children), head)


class Frame:
    """An open constituent on the parser stack.

    ``index`` is this frame's position among its parent's children; the
    parent frame object stays the same while this frame is open.
    """

    __slots__ = ("label", "parent", "index", "kids", "head", "klabels", "depth", "cache")

    def __init__(self, label, parent=None, index=0, kids=(), head=None, klabels=()):
        self.label = label
        self.parent = parent
        self.index = index
        self.kids = kids
        self.head = head
        self.klabels = klabels
        self.depth = 0 if parent is None else parent.depth + 1
        self.cache = None

    def add(self, done: Done, head: int | None = None) -> "Frame":
        return Frame(
            self.label,
            self.parent,
            self.index,
            self.kids + (done,),
            self.head if head is None else head,
            self.klabels + (done.label,),
        )

    def with_head(self, head: int | None) -> "Frame":
        return Frame(self.label, self.parent, self.index, self.kids, head, self.klabels)

    def open_child(self, label: str) -> "Frame":
        return Frame(label, self, len(self.kids))

    def close(self) -> Done:
        head = self.head
        if head is None and self.kids:
            head = len(self.kids) - 1
        return Done(self.label, self.kids, head)


# -- views and cursors -------------------------------------------------------------


class View:
    """How labels appear to the feature functions.

    Factored nodes (left- or right-factorization) are transparent: walking
    up or left passes through them.  ``name`` maps a composite label to its
    constituent name.
    """

    def __init__(self, spec=None, punct: Iterable[str] = DEFAULT_PUNCT):
        self.steps = tuple(transforms._as_steps(spec))
        self.punct = frozenset(punct)
        self._names: dict[str, str] = {}
        outer = self.steps[-1].kind if self.steps else None
        self._lf = outer in ("lf0", "lf1", "lf2")
        self._rf = outer == "rf"

    def transparent(self, label: str) -> bool:
        if self._lf:
            return "-" in label
        if self._rf:
            return "+" in label
        return False

    def name(self, label: str) -> str:
        if not self.steps:
            return label
        got = self._names.get(label)
        if got is None:
            got = transforms.constituent_name(label, self.steps)
            self._names[label] = got
        return got


PLAIN = View()


def _transparent(view: View, node) -> bool:
    if node is None:
        return False
    if isinstance(node, Done) and (node.terminal or node.is_pos):
        return False
    return view.transparent(node.label)


class Cursor:
    """A position in a partial parse.

    ``node`` is a Frame, a Done, or None for a hypothesized node whose label
    (if known) is given explicitly.
    """

    __slots__ = ("node", "up", "index", "_label", "view")

    def __init__(self, node, up, index, label=None, view=PLAIN):
        self.node = node
        self.up = up
        self.index = index
        self._label = label
        self.view = view

    @property
    def raw_label(self):
        if self.node is None:
            return self._label
        return self.node.label

    @property
    def label(self):
        lab = self.raw_label
        if lab is None or self.is_word:
            return lab
        return self.view.name(lab)

    @property
    def is_word(self) -> bool:
        n = self.node
        return isinstance(n, Done) and n.terminal or (n is None and self._label is not None and self.index == -1)

    def _kids(self) -> tuple:
        n = self.node
        if n is None:
            return ()
        return n.kids

    def raw_parent(self):
        if self.up is not None:
            return self.up
        n = self.node
        if isinstance(n, Frame) and n.parent is not None and n.parent.label != START:
            return Cursor(n.parent, None, n.parent.index, view=self.view)
        return None

    @property
    def parent(self):
        p = self.raw_parent()
        while p is not None and _transparent(self.view, p.node):
            p = p.raw_parent()
        return p

    @property
    def leftsib(self):
        if self.index > 0:
            rp = self.raw_parent()
            if rp is None:
                return None
            kids = rp._kids()
            i = self.index - 1
            if i >= len(kids):
                return None
            sib = Cursor(kids[i], rp, i, view=self.view)
            while _transparent(self.view, sib.node) and sib.node.kids:
                j = len(sib.node.kids) - 1
                sib = Cursor(sib.node.kids[j], sib, j, view=self.view)
            return sib
        if self.index == 0:
            rp = self.raw_parent()
            if rp is not None and _transparent(self.view, rp.node):
                return rp.leftsib
        return None

    @property
    def child(self):
        kids = self._kids()
        if not kids:
            return None
        c = Cursor(kids[0], self, 0, view=self.view)
        while _transparent(self.view, c.node) and c.node.kids:
            c = Cursor(c.node.kids[0], c, 0, view=self.view)
        return c

    @property
    def head(self):
        n = self.node
        if n is None or n.head is None or n.head >= len(n.kids):
            return None
        return Cursor(n.kids[n.head], self, n.head, view=self.view)


def frame_cursor(frame: Frame, view: View = PLAIN) -> Cursor | None:
    if frame is None or frame.label == START:
        return None
    return Cursor(frame, None, frame.index, view=view)


def new_node(frame: Frame, label: str | None = None, view: View = PLAIN) -> Cursor:
    """Cursor for a hypothesized next child of ``frame``."""
    return Cursor(None, frame_cursor(frame, view), len(frame.kids), label, view)


def new_word(frame: Frame, tag: str, word: str | None = None, view: View = PLAIN) -> Cursor:
    """Cursor for the word under a hypothesized POS child of ``frame``."""
    pos = Cursor(None, frame_cursor(frame, view), len(frame.kids), tag, view)
    return Cursor(None, pos, -1, word, view)


def tree_cursor(tree: Tree, path: Sequence[int] = (), view: View = PLAIN) -> Cursor:
    """Cursor on a node of a complete tree, reached by child indices."""
    cur = Cursor(Done.from_tree(tree), None, 0, view=view)
    for i in path:
        cur = Cursor(cur.node.kids[i], cur, i, view=view)
    return cur


# -- tree-walking functions -----------------------------------------------------------


def par_sib(node, m, n):
    for _ in range(m):
        if node is not None:
            node = node.parent
    for _ in range(n):
        if node is not None:
            node = node.leftsib
    return node.label if node is not None else NULL


def leftmost_ps(node, m, n):
    if node.leftsib is not None:
        return NULL
    return par_sib(node, m, n)


def lex_head(node, m):
    if node is not None:
        node = node.head
    while node is not None and node.child is not None:
        node = node.head
    for _ in range(m):
        if node is not None:
            node = node.parent
    return node


def curr_head(node, m):
    if node is None:
        return NULL
    h = lex_head(node.parent, m)
    if h is not None:
        return h.label
    h = lex_head(node.leftsib, m)
    return h.label if h is not None else NULL


def left_ccommand(node):
    while node is not None and node.leftsib is None:
        node = node.parent
    if node is None:
        return None
    parent = node.parent
    ph = parent.head if parent is not None else None
    return ph if ph is not None else node.leftsib


def cc_head(node, m, n):
    # Lexical head of the m-th left c-commanding node.  That node is
    # complete, so its lexical head is settled; CURR-HEAD would add nothing.
    for _ in range(m):
        if node is not None:
            node = left_ccommand(node)
    h = lex_head(node, n) if node is not None else None
    return h.label if h is not None else NULL


def leftmost_cch(node, m, n):
    if node.leftsib is not None:
        return NULL
    return cc_head(node, m, n)


def conj_parallel(node):
    if node is not None and node.leftsib is None:
        node = node.parent
    if node is None:
        return NULL
    this = node.label
    if this is None:
        # the hypothesized node itself: its label is what is being predicted
        return NULL
    if par_sib(node, 0, 1) == "CC":
        node = node.leftsib
        while node is not None and node.label != this:
            node = node.leftsib
        if node is not None:
            c = node.child
            return c.label if c is not None else NULL
    return NULL


def lc_chain(node, m):
    for _ in range(m):
        if node is not None and node.leftsib is None:
            node = node.parent
        else:
            return NULL
    return node.label if node is not None else NULL


def edit_skip(node) -> bool:
    lab = node.label
    if lab in node.view.punct:
        return True
    return lab in ("PRN", "INTJ")


def edit_child(node):
    if node is not None and node.leftsib is None and node.parent is not None:
        node = node.parent
    else:
        return NULL
    this = node.label
    node = node.leftsib
    while node is not None and edit_skip(node):
        node = node.leftsib
    if node is None or node.label != "EDITED":
        return NULL
    parent = node.parent
    parentlabel = parent.label if parent is not None else NULL
    node = node.child
    if node is None:
        return NULL
    if node.label == parentlabel:
        node = node.child
        if node is None:
            return NULL
    if node.label != this:
        return NULL
    node = node.child
    return node.label if node is not None else NULL


def edit_lex(node, m):
    while node is not None and node.leftsib is None:
        node = node.parent
    if node is None:
        return NULL
    node = node.leftsib
    while node is not None and edit_skip(node):
        node = node.leftsib
    if node is None or node.label != "EDITED":
        return NULL
    while node.child is not None:
        node = node.child
    for _ in range(m):
        if node is not None:
            node = node.parent
    return node.label if node is not None else NULL


_FUNCS: dict[str, tuple[Callable, int]] = {
    "PAR-SIB": (par_sib, 2),
    "LEFTMOST-PS": (leftmost_ps, 2),
    "LEX-HEAD": (lambda node, m: getattr(lex_head(node, m), "label", NULL), 1),
    "CURR-HEAD": (curr_head, 1),
    "LEFT-CCOMMAND": (lambda node: getattr(left_ccommand(node), "label", NULL), 0),
    "CC-HEAD": (cc_head, 2),
    "LEFTMOST-CCH": (leftmost_cch, 2),
    "CONJ-PARALLEL": (conj_parallel, 0),
    "LC-CHAIN": (lc_chain, 1),
    "EDIT-SKIP": (edit_skip, 0),
    "EDIT-CHILD": (edit_child, 0),
    "EDIT-LEX": (edit_lex, 1),
}
STRUCTURAL = ("PAR-SIB", "LEFTMOST-PS", "LC-CHAIN", "CONJ-PARALLEL")
HEAD_FNS = ("LEX-HEAD", "CURR-HEAD", "LEFT-CCOMMAND", "CC-HEAD", "LEFTMOST-CCH")
EDIT_FNS = ("EDIT-SKIP", "EDIT-CHILD", "EDIT-LEX")


@dataclass(frozen=True)
class FeatureFn:
    name: str
    params: tuple = ()

    def __post_init__(self):
        if self.name not in _FUNCS:
            raise ValueError("unknown feature function %r" % self.name)
        if len(self.params) != _FUNCS[self.name][1]:
            raise ValueError("%s takes %d parameters" % (self.name, _FUNCS[self.name][1]))
        if any(p < 0 for p in self.params):
            raise ValueError("feature parameters must be nonnegative")

    @classmethod
    def parse(cls, text: str) -> "FeatureFn":
        m = re.fullmatch(r"\s*([A-Z-]+)\s*(?:\(([^)]*)\))?\s*", text)
        if not m:
            raise ValueError("bad feature %r" % text)
        params = tuple(int(x) for x in m.group(2).split(",")) if m.group(2) else ()
        return cls(m.group(1), params)

    def __call__(self, node):
        return _FUNCS[self.name][0](node, *self.params)

    def __str__(self) -> str:
        if not self.params:
            return self.name
        return "%s(%s)" % (self.name, ",".join(map(str, self.params)))


def eval_structural(fn: FeatureFn, node: Cursor):
    if fn.name not in STRUCTURAL:
        raise ValueError("%s is not a structural function" % fn.name)
    return fn(node)


def eval_head(fn: FeatureFn, node: Cursor):
    if fn.name not in HEAD_FNS:
        raise ValueError("%s is not a head function" % fn.name)
    return fn(node)


def eval_edited(fn: FeatureFn, node: Cursor):
    if fn.name not in EDIT_FNS:
        raise ValueError("%s is not an EDITED function" % fn.name)
    return fn(node)


# -- conditioning models -----------------------------------------------------------------

F = FeatureFn.parse

# (function, truncation level) for non-POS expansions
TWF1 = [
    (F("PAR-SIB(1,0)"), 0),
    (F("PAR-SIB(0,1)"), 0),
    (F("PAR-SIB(0,2)"), 0),
    (F("PAR-SIB(0,3)"), 0),
    (F("PAR-SIB(2,0)"), 1),
    (F("PAR-SIB(1,1)"), 2),
    (F("PAR-SIB(3,0)"), 3),
    (F("PAR-SIB(2,1)"), 4),
    (F("CONJ-PARALLEL"), 5),
    (F("CURR-HEAD(0)"), 6),
]
LC_CHAIN_FEATURES = [(F("LC-CHAIN(4)"), 4), (F("LC-CHAIN(5)"), 4)]
TWF1_SWBD = TWF1[:5] + [(F("EDIT-CHILD"), 1)] + TWF1[5:]

# (function, level when the POS is leftmost, level otherwise or None)
TWF2 = [
    (F("PAR-SIB(1,0)"), 0, 0),
    (F("PAR-SIB(2,0)"), 1, 1),
    (F("PAR-SIB(1,1)"), 2, 2),
    (F("LEFTMOST-PS(3,0)"), 3, None),
    (F("LEFTMOST-CCH(1,1)"), 4, None),
    (F("CC-HEAD(1,0)"), 5, 3),
    (F("CC-HEAD(2,0)"), 6, 4),
]
TWF2_SWBD = TWF2[:3] + [(F("EDIT-LEX(1)"), 3, 3), (F("EDIT-LEX(0)"), 3, 3)] + TWF2[3:]

HEAD_FEATURES = [F("PAR-SIB(0,1)"), F("PAR-SIB(1,0)"), F("PAR-SIB(0,0)"), F("PAR-SIB(0,2)"), F("PAR-SIB(0,3)")]

LEVELS = {
    "none": (0, 0, 0),
    "par+sib": (2, 2, 2),
    "ntstruct": (5, 2, 2),
    "nthead": (6, 2, 2),
    "posstruct": (6, 3, 2),
    "attach": (6, 5, 2),
    "all": (6, 6, 4),
    "swbd": (6, 6, 4),
}


@dataclass
class ConditioningModel:
    """Ordered feature lists per expansion class plus a truncation triple.

    ``markov_order`` is how many previous-child features (PAR-SIB(0,k)) the
    non-POS model keeps at level 0.
    """

    nonpos: list = field(default_factory=lambda: list(TWF1))
    pos: list = field(default_factory=lambda: list(TWF2))
    head: list = field(default_factory=lambda: list(HEAD_FEATURES))
    level: tuple = (6, 6, 4)
    markov_order: int = 3

    @classmethod
    def named(cls, name: str = "all", lc_chain: bool = False, markov_order: int = 3) -> "ConditioningModel":
        if name not in LEVELS:
            raise ValueError("unknown conditioning level %r" % name)
        nonpos = list(TWF1_SWBD if name == "swbd" else TWF1)
        pos = list(TWF2_SWBD if name == "swbd" else TWF2)
        if lc_chain:
            at = 8 if name != "swbd" else 9
            nonpos = nonpos[:at] + LC_CHAIN_FEATURES + nonpos[at:]
        return cls(nonpos, pos, list(HEAD_FEATURES), LEVELS[name], markov_order)

    @property
    def uses_heads(self) -> bool:
        a, b, c = self.level
        for fn, lev in self._nonpos_active():
            if fn.name in HEAD_FNS:
                return True
        for fn, lb, lc in self.pos:
            if fn.name in HEAD_FNS and ((lb is not None and lb <= b) or (lc is not None and lc <= c)):
                return True
        return False

    def _nonpos_active(self):
        a = self.level[0]
        out = []
        for i, (fn, lev) in enumerate(self.nonpos):
            if fn.name == "PAR-SIB" and fn.params[0] == 0 and fn.params[1] > self.markov_order:
                continue
            if lev <= a:
                out.append((fn, lev))
        return out

    def nonpos_width(self) -> int:
        return len(self._nonpos_active())

    def pos_width(self) -> int:
        _, b, c = self.level
        w = 0
        for i, (fn, lb, lc) in enumerate(self.pos):
            if (lb is not None and lb <= b) or (lc is not None and lc <= c):
                w = i + 1
        return w

    def nonpos_vector(self, node: Cursor, frame: Frame | None = None) -> tuple:
        """Active non-POS conditioning values at a hypothesized node.

        With ``frame`` given, the left-hand side and previous-child slots are
        read from the frame itself (raw labels, i.e. the expansion state).
        """
        vals = []
        for fn, lev in self._nonpos_active():
            if frame is not None and fn.name == "PAR-SIB" and fn.params in ((1, 0), (0, 1), (0, 2), (0, 3)):
                m, n = fn.params
                if m == 1:
                    vals.append(frame.label)
                else:
                    vals.append(frame.klabels[-n] if len(frame.klabels) >= n else NULL)
                continue
            vals.append(fn(node))
        return tuple(vals)

    def pos_vector(self, word: Cursor, tag: str | None = None) -> tuple:
        """POS-expansion values at a word node; the branch depends on whether
        the POS has a left sibling."""
        _, b, c = self.level
        posnode = word.parent
        leftmost = posnode is None or posnode.leftsib is None
        lim = b if leftmost else c
        vals = []
        for i, (fn, lb, lc) in enumerate(self.pos[: self.pos_width()]):
            lev = lb if leftmost else lc
            if lev is None or lev > lim:
                vals.append(NULL)
            elif i == 0 and tag is not None:
                vals.append(tag)
            else:
                vals.append(fn(word))
        return tuple(vals)

    def head_vector(self, frame: Frame, new_label: str) -> tuple:
        k = frame.klabels
        return (
            k[-1] if k else NULL,
            frame.label,
            new_label,
            k[-2] if len(k) >= 2 else NULL,
            k[-3] if len(k) >= 3 else NULL,
        )

    def describe(self) -> str:
        lines = ["level\t%d,%d,%d" % self.level, "markov_order\t%d" % self.markov_order]
        lines += ["nonpos\t%s\t%d" % (fn, lev) for fn, lev in self.nonpos]
        lines += [
            "pos\t%s\t%s\t%s" % (fn, lb, "NULL" if lc is None else lc) for fn, lb, lc in self.pos
        ]
        lines += ["head\t%s" % fn for fn in self.head]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ConditioningModel":
        m = cls([], [], [], (0, 0, 0), 3)
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            key = parts[0]
            if key == "level":
                m.level = tuple(int(x) for x in parts[1].split(","))
            elif key == "markov_order":
                m.markov_order = int(parts[1])
            elif key == "nonpos":
                m.nonpos.append((F(parts[1]), int(parts[2])))
            elif key == "pos":
                lc = None if parts[3] == "NULL" else int(parts[3])
                lb = None if parts[2] in ("None", "NULL") else int(parts[2])
                m.pos.append((F(parts[1]), lb, lc))
            elif key == "head":
                m.head.append(F(parts[1]))
            else:
                raise ValueError("unknown model line %r" % line)
        return m


def context_vector(model: ConditioningModel, node: Cursor, level: tuple | None = None) -> tuple:
    """Conditioning values at ``node`` for the applicable branch.

    A word node (child of a POS) selects the POS model; any other node the
    non-POS model.  Values below the truncation level come back NULL.
    """
    if level is not None:
        model = ConditioningModel(model.nonpos, model.pos, model.head, tuple(level), model.markov_order)
    p = node.parent
    if node.is_word or (p is not None and p.node is None and node.index == -1):
        return model.pos_vector(node)
    return model.nonpos_vector(node)


# -- head finding -------------------------------------------------------------------------

# Collins-style percolation table: (direction, priority list)
HEAD_TABLE: dict[str, list[tuple[str, list[str]]]] = {
    "ADJP": [("left", "NNS QP NN $ ADVP JJ VBN VBG ADJP JJR NP JJS DT FW RBR RBS SBAR RB".split())],
    "ADVP": [("right", "RB RBR RBS FW ADVP TO CD JJR JJ IN NP JJS NN".split())],
    "CONJP": [("right", "CC RB IN".split())],
    "FRAG": [("right", [])],
    "INTJ": [("left", [])],
    "LST": [("right", "LS :".split())],
    "NAC": [("left", "NN NNS NNP NNPS NP NAC EX $ CD QP PRP VBG JJ JJS JJR ADJP FW".split())],
    "PP": [("right", "IN TO VBG VBN RP FW".split())],
    "PRN": [("left", [])],
    "PRT": [("right", ["RP"])],
    "QP": [("left", "$ IN NNS NN JJ RB DT CD NCD QP JJR JJS".split())],
    "RRC": [("right", "VP NP ADVP ADJP PP".split())],
    "S": [("left", "TO IN VP S SBAR ADJP UCP NP".split())],
    "SBAR": [("left", "WHNP WHPP WHADVP WHADJP IN DT S SQ SINV SBAR FRAG".split())],
    "SBARQ": [("left", "SQ S SINV SBARQ FRAG".split())],
    "SINV": [("left", "VBZ VBD VBP VB MD VP S SINV ADJP NP".split())],
    "SQ": [("left", "VBZ VBD VBP VB MD VP SQ".split())],
    "UCP": [("right", [])],
    "VP": [("left", "TO VBD VBN MD VBZ VB VBG VBP AUX VP ADJP NN NNS NP".split())],
    "WHADJP": [("left", "CC WRB JJ ADJP".split())],
    "WHADVP": [("right", "CC WRB".split())],
    "WHNP": [("left", "WDT WP WP$ WHADJP WHPP WHNP".split())],
    "WHPP": [("right", "IN TO FW".split())],
    "NX": [("right", "NN NNS NNP NNPS NX".split())],
    "X": [("right", [])],
    "EDITED": [("left", [])],
}
NP_LIKE = ("NP", "NML")


def _np_head(names: list[str]) -> int:
    if names[-1] == "POS":
        return len(names) - 1
    for i in range(len(names) - 1, -1, -1):
        if names[i] in ("NN", "NNP", "NNPS", "NNS", "NX", "POS", "JJR"):
            return i
    for i, n in enumerate(names):
        if n in NP_LIKE:
            return i
    for group in (("$", "ADJP", "PRN"), ("CD",), ("JJ", "JJS", "RB", "QP")):
        for i in range(len(names) - 1, -1, -1):
            if names[i] in group:
                return i
    return len(names) - 1


def find_head(label: str, child_labels: Sequence[str]) -> int:
    """Head child index by the percolation table (labels already base names)."""
    if not child_labels:
        raise ValueError("no children")
    if len(child_labels) == 1:
        return 0
    base = base_label(label)
    if base in NP_LIKE:
        return _np_head(list(child_labels))
    rules = HEAD_TABLE.get(base, [("left", [])])
    for direction, prio in rules:
        order = range(len(child_labels)) if direction == "left" else range(len(child_labels) - 1, -1, -1)
        for cat in prio:
            for i in order:
                if child_labels[i] == cat:
                    return i
        return next(iter(order))
    return 0


def assign_heads(tree: Tree, view: View = PLAIN) -> Tree:
    """Copy of ``tree`` with head indices on every nonterminal with children.

    Labels are compared through the view's constituent names, so factored
    and slash nodes find heads among their own children.
    """
    if tree.terminal:
        return tree
    if tree.is_pos:
        return Tree(tree.label, tree.children, 0)
    kids = tuple(assign_heads(c, view) for c in tree.children)
    if not kids:
        return Tree(tree.label, (), None)
    names = [c.label if c.terminal else view.name(c.label) for c in kids]
    return Tree(tree.label, kids, find_head(view.name(tree.label), names))
