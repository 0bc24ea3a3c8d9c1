"""Language modelling with the parser: per-word probabilities from prefix
masses, an interpolated trigram baseline, mixing, perplexity, n-best
rescoring and word error rate."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .grammar import InterpolatedModel, InterpolationTable, estimate_lambdas

BOS = "<s>"
EOS = "</s>"
UNK = "<UNK>"
PARSER_WEIGHT = 0.999


# -- parser-derived probabilities ------------------------------------------------------------


def word_probs(result, unigram: Callable[[str], float] | dict | None = None, backstop: bool = True,
               weight: float = PARSER_WEIGHT) -> list[float]:
    """Conditional probability of each word and of the end of the string.

    Ratios of successive initial-queue masses, mixed with a unigram
    backstop; positions whose denominator mass is zero use the unigram alone.
    """
    uni = unigram.get if isinstance(unigram, dict) else unigram
    lm = list(result.log_masses)
    toks = list(result.words) + [EOS]
    out = []
    for i, w in enumerate(toks):
        den = lm[i] if i < len(lm) else -math.inf
        num = lm[i + 1] if i + 1 < len(lm) else -math.inf
        ratio = math.exp(num - den) if den > -math.inf and num > -math.inf else 0.0
        if not backstop:
            out.append(ratio)
            continue
        pu = (uni(w, 0.0) if isinstance(unigram, dict) else uni(w)) if uni else 0.0
        if den == -math.inf:
            out.append(pu)
        else:
            out.append(weight * ratio + (1.0 - weight) * pu)
    return out


def perplexity(probs: Iterable[float], n: int | None = None) -> float:
    """exp of the mean negative log probability over ``n`` tokens."""
    probs = list(probs)
    n = len(probs) if n is None else n
    if n <= 0:
        raise ValueError("perplexity needs at least one token")
    tot = 0.0
    for p in probs:
        if not p > 0:
            raise ValueError("zero probability in perplexity stream")
        tot += math.log(p)
    return math.exp(-tot / n)


# -- trigram baseline -----------------------------------------------------------------------------


class TrigramModel:
    """Interpolated trigram; context is (w_{-1}, w_{-2}) so the backoff
    order is trigram, bigram, unigram."""

    def __init__(self, bucketing: str = "avgcount", unk_threshold: int = 1):
        self.model = InterpolatedModel(2, InterpolationTable(bucketing))
        self.vocab: frozenset = frozenset()
        self.unk_threshold = unk_threshold

    def map(self, w: str) -> str:
        return w if w in self.vocab or w == EOS else UNK

    def _events(self, sentence: Sequence[str]):
        toks = [self.map(w) for w in sentence] + [EOS]
        h = [BOS, BOS]
        for w in toks:
            yield (h[-1], h[-2]), w
            h.append(w)

    def train(self, sentences: Iterable[Sequence[str]]) -> "TrigramModel":
        sentences = [list(s) for s in sentences]
        counts = Counter(w for s in sentences for w in s)
        self.vocab = frozenset(w for w, c in counts.items() if c > self.unk_threshold)
        for s in sentences:
            for ctx, w in self._events(s):
                self.model.observe(ctx, w)
        return self

    def estimate(self, heldout: Iterable[Sequence[str]]) -> InterpolationTable:
        ev = [e for s in heldout for e in self._events(list(s))]
        return estimate_lambdas(self.model, ev)

    def prob(self, w: str, history: Sequence[str]) -> float:
        h = [BOS, BOS] + [self.map(x) for x in history]
        return self.model.prob((h[-1], h[-2]), self.map(w))

    def sentence_probs(self, sentence: Sequence[str]) -> list[float]:
        return [self.model.prob(ctx, w) for ctx, w in self._events(list(sentence))]

    def unigram(self, w: str) -> float:
        return self.model.prob((), self.map(w))

    @property
    def alphabet(self) -> list[str]:
        return sorted(self.model.outcomes)

    def mix_bucket(self, history: Sequence[str]) -> tuple[int, int]:
        """(0,0) sentence-initially; (0, trigram bucket) when the two-word
        history was seen; else (1, bigram bucket)."""
        if not history:
            return (0, 0)
        h = [BOS, BOS] + [self.map(x) for x in history]
        ctx = (h[-1], h[-2])
        t = self.model.table
        n2 = self.model.count(ctx)
        if n2 > 0:
            return (0, t.bucket(t.score(n2, self.model.distinct(ctx))))
        n1 = self.model.count(ctx[:1])
        return (1, t.bucket(t.score(n1, self.model.distinct(ctx[:1]))))


def trigram_prob(m: TrigramModel, w: str, history: Sequence[str]) -> float:
    return m.prob(w, history)


# -- mixing ----------------------------------------------------------------------------------------


@dataclass
class MixPolicy:
    """Weight on the trigram: a fixed λ or a table keyed by bucket index."""

    fixed: float | None = 0.36
    table: dict = field(default_factory=dict)
    default: float = 0.36

    def __post_init__(self):
        vals = list(self.table.values()) + [self.default] + ([self.fixed] if self.fixed is not None else [])
        if any(not 0.0 <= v <= 1.0 for v in vals):
            raise ValueError("mixing weights must lie in [0,1]")

    def lam(self, bucket=None) -> float:
        if self.fixed is not None:
            return self.fixed
        return self.table.get(bucket, self.default)

    @classmethod
    def estimate(cls, triples: Iterable[tuple[float, float, tuple]], tol: float = 1e-6, max_iter: int = 100) -> "MixPolicy":
        """EM for bucketed λ from (p_parser, p_trigram, bucket) held-out triples."""
        triples = list(triples)
        lam = {b: 0.5 for _, _, b in triples}
        prev = -math.inf
        for _ in range(max_iter):
            num, den, ll = Counter(), Counter(), 0.0
            for pp, pt, b in triples:
                p = lam[b] * pt + (1 - lam[b]) * pp
                if p <= 0:
                    continue
                ll += math.log(p)
                num[b] += lam[b] * pt / p
                den[b] += 1
            for b in lam:
                if den[b]:
                    lam[b] = num[b] / den[b]
            if ll - prev < tol:
                break
            prev = ll
        return cls(fixed=None, table=lam)


def mix(p_parser: float, p_trigram: float, policy: MixPolicy | float, bucket=None) -> float:
    lam = policy if isinstance(policy, (int, float)) else policy.lam(bucket)
    return lam * p_trigram + (1.0 - lam) * p_parser


def contraction_merge(split_tokens: Sequence[str], probs: Sequence[float], joined_tokens: Sequence[str],
                      utterance: str = "") -> list[float]:
    """Multiply the parser probabilities of split pieces ("he", "'s") into
    the probability of the joined token ("he's").  Extra trailing
    probabilities (the end marker) pass through."""
    if len(probs) < len(split_tokens):
        raise ValueError("fewer probabilities than tokens in %s" % (utterance or "utterance"))
    out = []
    k = 0
    for tok in joined_tokens:
        acc, p = "", 1.0
        while k < len(split_tokens) and len(acc) < len(tok):
            acc += split_tokens[k]
            p *= probs[k]
            k += 1
        if acc != tok:
            raise ValueError("cannot align %r with split tokens in %s" % (tok, utterance or "utterance"))
        out.append(p)
    if k != len(split_tokens):
        raise ValueError("unaligned split tokens remain in %s" % (utterance or "utterance"))
    out.extend(probs[len(split_tokens):])
    return out


# -- n-best rescoring ----------------------------------------------------------------------------------


@dataclass
class Hypothesis:
    words: list
    acoustic: float
    lm: float


@dataclass
class NBestList:
    utt: str
    reference: list
    hyps: list

    def __post_init__(self):
        if not self.hyps:
            raise ValueError("n-best list %s is empty" % self.utt)
        for h in self.hyps:
            if not (math.isfinite(h.acoustic) and math.isfinite(h.lm)):
                raise ValueError("non-finite score in n-best list %s" % self.utt)


def read_nbest(path: str) -> list[NBestList]:
    out, cur = [], None
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "UTT":
                if cur is not None:
                    out.append(NBestList(*cur))
                cur = [parts[1], [], []]
            elif parts[0] == "REF" and cur is not None:
                cur[1] = parts[1:]
            elif parts[0] == "HYP" and cur is not None:
                cur[2].append(Hypothesis(parts[3:], float(parts[1]), float(parts[2])))
            else:
                raise ValueError("%s:%d: unexpected line %r" % (path, ln, line.rstrip()))
    if cur is not None:
        out.append(NBestList(*cur))
    return out


def write_nbest(lists: Iterable[NBestList], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for nb in lists:
            fh.write("UTT %s %d\n" % (nb.utt, len(nb.reference)))
            fh.write("REF %s\n" % " ".join(nb.reference))
            for h in nb.hyps:
                fh.write("HYP %r %r %s\n" % (h.acoustic, h.lm, " ".join(h.words)))


@dataclass
class Rescored:
    ranked: list  # (score, original index)
    flagged: list

    @property
    def best(self) -> int:
        return self.ranked[0][1]


def rescore(nbest: NBestList, lm: Callable[[Sequence[str]], float | None] | None, beta: float, wip: float = 0.0) -> Rescored:
    """Rank hypotheses by acoustic + β·LM − wip·length (natural logs).

    ``lm`` returns a log probability or None; None (or no lm) falls back to
    the list's own LM score and flags the hypothesis."""
    if beta < 0:
        raise ValueError("LM weight must be nonnegative")
    scored, flagged = [], []
    for k, h in enumerate(nbest.hyps):
        lp = lm(h.words) if lm is not None else None
        if lp is None or not math.isfinite(lp):
            if lm is not None:
                flagged.append(k)
            lp = h.lm
        scored.append((h.acoustic + beta * lp - wip * len(h.words), k))
    scored.sort(key=lambda sk: (-sk[0], sk[1]))
    return Rescored(scored, flagged)


# -- word error rate ---------------------------------------------------------------------------------


@dataclass
class WERResult:
    substitutions: int
    insertions: int
    deletions: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def wer(self) -> float:
        return 100.0 * self.errors / self.ref_len

    @property
    def sentence_error(self) -> bool:
        return self.errors > 0

    def __iter__(self):
        return iter((self.substitutions, self.insertions, self.deletions, self.wer))


def wer(reference: Sequence[str], hypothesis: Sequence[str]) -> WERResult:
    """Minimum edit distance alignment with unit costs.  Among optimal
    alignments, the one with fewest insertions plus deletions is reported."""
    r, h = list(reference), list(hypothesis)
    if not r:
        raise ValueError("empty reference")
    n, m = len(r), len(h)
    # cell: (errors, indels, S, I, D)
    prev = [(j, j, 0, j, 0) for j in range(m + 1)]
    for i in range(1, n + 1):
        cur = [(i, i, 0, 0, i)]
        for j in range(1, m + 1):
            e, x, s, ins, d = prev[j - 1]
            if r[i - 1] == h[j - 1]:
                diag = (e, x, s, ins, d)
            else:
                diag = (e + 1, x, s + 1, ins, d)
            e, x, s, ins, d = prev[j]
            up = (e + 1, x + 1, s, ins, d + 1)
            e, x, s, ins, d = cur[j - 1]
            left = (e + 1, x + 1, s, ins + 1, d)
            cur.append(min(diag, up, left, key=lambda c: (c[0], c[1])))
        prev = cur
    _, _, s, ins, d = prev[m]
    return WERResult(s, ins, d, n)


def corpus_wer(pairs: Iterable[tuple[Sequence[str], Sequence[str]]]) -> tuple[float, float]:
    """(WER%, sentence error %) over reference/hypothesis pairs."""
    errs = refs = sents = bad = 0
    for ref, hyp in pairs:
        w = wer(ref, hyp)
        errs += w.errors
        refs += w.ref_len
        sents += 1
        bad += w.sentence_error
    if not refs:
        raise ValueError("no reference words")
    return 100.0 * errs / refs, 100.0 * bad / sents
