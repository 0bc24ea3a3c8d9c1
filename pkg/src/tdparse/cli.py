"""Command line front end: corpus preparation, transforms, training,
parsing, evaluation and language-model tasks."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext

from . import transforms
from .evaluation import EvalReport, evaluate
from .grammar import WeightedTree, reestimate_em
from .langmodel import (
    MixPolicy,
    TrigramModel,
    mix,
    perplexity,
    read_nbest,
    rescore,
    word_probs,
    corpus_wer,
)
from .parser import ParseOptions, Parser, ParserModel, train
from .treebank import (
    TreebankError,
    parse_bracketed,
    partition,
    read_treebank,
    strip_punctuation,
    write_bracketed,
    write_treebank,
)

MODEL_DIR_ENV = "TDPARSE_MODEL_DIR"
VERSION = "0.1.0"

EVAL_COLUMNS = ["LR", "LP", "CB", "0 CB", "≤ 2 CB", "Pct. failed", "Avg. rule expansions", "Average analyses"]
PPL_COLUMNS = ["Trigram Baseline", "Model", "Interpolation"]


class CLIError(Exception):
    def __init__(self, msg: str, code: int = 1):
        super().__init__(msg)
        self.code = code


# -- reports ------------------------------------------------------------------------------------


def _render(header: list[str], rows: list[list[str]], tsv: bool) -> str:
    if tsv:
        return "\n".join("\t".join(r) for r in [header] + rows) + "\n"
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    line = lambda r: " | ".join(c.rjust(w) for c, w in zip(r, widths))
    out = [line(header), "-+-".join("-" * w for w in widths)]
    out += [line(r) for r in rows]
    return "\n".join(out) + "\n"


def eval_table(results: list[tuple[str, EvalReport]], tsv: bool = False) -> str:
    """The eight-column accuracy/efficiency table, one row per system."""
    header = ["System"] + EVAL_COLUMNS
    rows = []
    for name, r in results:
        rows.append([
            name,
            "%.1f" % r.LR,
            "%.1f" % r.LP,
            "%.2f" % r.CB,
            "%.1f" % r.zeroCB,
            "%.1f" % r.leq2CB,
            "%.1f" % r.failed,
            "%.0f" % r.expansions_per_word,
            "%.1f" % r.analyses_per_word,
        ])
    return _render(header, rows, tsv)


def ppl_table(results: list[tuple[str, float, float, float]], tsv: bool = False) -> str:
    header = ["Test set"] + PPL_COLUMNS
    rows = [[name] + ["%.2f" % x for x in vals] for name, *vals in results]
    return _render(header, rows, tsv)


# -- config and manifests --------------------------------------------------------------------------


def read_config(path: str) -> dict:
    """key=value lines; '#' starts a comment."""
    cfg = {}
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CLIError("%s:%d: expected key=value" % (path, ln))
            k, v = line.split("=", 1)
            cfg[k.strip().replace("-", "_")] = v.strip()
    return cfg


def write_manifest(outdir: str, args: argparse.Namespace) -> None:
    os.makedirs(outdir, exist_ok=True)
    items = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    with open(os.path.join(outdir, "manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write("# tdparse %s\n" % VERSION)
        for k, v in items.items():
            fh.write("%s=%s\n" % (k, json.dumps(v, ensure_ascii=False)))


def resolve_model(path: str) -> str:
    if os.path.exists(path):
        return path
    base = os.environ.get(MODEL_DIR_ENV)
    if base and not os.path.isabs(path):
        cand = os.path.join(base, path)
        if os.path.exists(cand):
            return cand
    raise CLIError("model file not found: %s" % path, code=2)


def load_model(path: str) -> ParserModel:
    return ParserModel.load(resolve_model(path))


def _out(path: str | None):
    if path in (None, "-"):
        return nullcontext(sys.stdout)
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    return open(path, "w", encoding="utf-8")


def read_sentences(path: str) -> list[list[str]]:
    """Token lists from plain text (one sentence per line) or, for files
    that look bracketed, from tree yields."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("("):
        return [t.words() for t in parse_bracketed(text)]
    return [line.split() for line in text.splitlines() if line.strip()]


# -- worker pool -----------------------------------------------------------------------------------

_WORKER = {}


def _init_worker(model_path, options):
    _WORKER["parser"] = Parser(ParserModel.load(model_path), options)


def _parse_one(words):
    r = _WORKER["parser"].parse(words)
    return r


def parse_all(model_path: str, model: ParserModel, options: ParseOptions, sentences, workers: int = 1):
    if workers <= 1:
        p = Parser(model, options)
        return [p.parse(s) for s in sentences]
    with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(model_path, options)) as ex:
        return list(ex.map(_parse_one, sentences, chunksize=4))


# -- subcommands ----------------------------------------------------------------------------------------


def cmd_treebank(args) -> int:
    corpus = read_treebank(args.inputs)
    if args.action == "stats":
        n_words = sum(len(t.words()) for t in corpus)
        print("trees\t%d" % len(corpus))
        print("words\t%d" % n_words)
        print("vocabulary\t%d" % len(corpus.vocabulary))
        print("nonterminals\t%d" % len(corpus.nonterminals))
        if args.chains:
            st = transforms.corpus_chain_stats(corpus)
            for k, v in sorted(st.depth.items()):
                print("chain-depth\t%s\t%s" % ("/".join(k), json.dumps(dict(sorted(v.items())))))
        return 0
    if args.action == "strip-punct":
        out = strip_punctuation(corpus)
        write_treebank(out.trees, args.out)
        print("dropped %d all-punctuation trees" % out.dropped, file=sys.stderr)
        return 0
    if args.action == "split":
        parts = partition(corpus, args.spec)
        os.makedirs(args.out, exist_ok=True)
        for name, part in zip(("train", "heldout", "test"), parts):
            write_treebank(part.trees, os.path.join(args.out, name + ".mrg"))
        write_manifest(args.out, args)
        return 0
    raise CLIError("unknown treebank action %s" % args.action)


def cmd_transform(args) -> int:
    if "," in args.kind and not args.compose:
        raise CLIError("composed transforms need --compose")
    spec = transforms.parse_transform(args.kind, eps_remove=args.eps_remove)
    corpus = read_treebank(args.inputs)
    fn = transforms.detransform if args.detransform else transforms.apply
    with _out(args.out) as fh:
        for t in corpus:
            fh.write(write_bracketed(fn(spec, t)) + "\n")
    return 0


def _read_weighted(path: str) -> list[WeightedTree]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            w, text = line.split("\t", 1)
            out += [WeightedTree(t, float(w)) for t in parse_bracketed(text)]
    return out


def _train_from_args(args, extra: list[WeightedTree] = ()) -> ParserModel:
    corpus = read_treebank(args.train)
    trees = list(corpus.trees) + [wt.tree for wt in extra]
    weights = [1.0] * len(corpus) + [wt.weight for wt in extra]
    heldout = read_treebank(args.heldout).trees if args.heldout else None
    return train(
        trees,
        transform=args.transform,
        conditioning=args.conditioning,
        mode=args.grammar,
        heldout=heldout,
        bucketing=args.bucketing,
        markov_order=args.order,
        lc_chain=args.lc_chain,
        weights=weights,
    )


def cmd_train(args) -> int:
    extra = _read_weighted(args.weighted) if args.weighted else []
    pm = _train_from_args(args, extra)
    d = os.path.dirname(args.out)
    if d:
        os.makedirs(d, exist_ok=True)
    pm.save(args.out)
    write_manifest(d or ".", args)
    return 0


def _options(args) -> ParseOptions:
    return ParseOptions(
        gamma=args.beam,
        gamma_initial=args.beam_initial,
        input_mode=args.mode,
        empty_punct=args.empty_punct,
        max_pop=args.max_pop,
        nbest=args.nbest_parses,
    )


def cmd_parse(args) -> int:
    path = resolve_model(args.model)
    pm = ParserModel.load(path)
    sents = read_sentences(args.input)
    results = parse_all(path, pm, _options(args), sents, args.workers)
    with _out(args.out) as fh:
        for r in results:
            k = args.nbest_parses or 1
            for lp, t in r.parses[:k]:
                if k > 1:
                    fh.write("%r\t" % lp)
                fh.write(write_bracketed(t) + "\n")
    if args.emit_prefix_masses:
        with _out(args.emit_prefix_masses) as fh:
            for s, r in enumerate(results):
                toks = r.words + ["</s>"]
                for i, lm in enumerate(r.log_masses[1:]):
                    fh.write("%d\t%d\t%s\t%r\n" % (s, i, toks[i], math.exp(lm)))
    if args.stats:
        _write_stats(args.stats, results)
    return 0


def _write_stats(path: str, results) -> None:
    with _out(path) as fh:
        for r in results:
            fh.write(json.dumps({
                "words": len(r.words),
                "garden_path": r.garden_path,
                "expansions": sum(r.expansions),
                "advanced": sum(r.advanced),
            }) + "\n")


def cmd_eval(args) -> int:
    gold = read_treebank([args.gold]).trees
    test = read_treebank([args.test]).trees
    failed, counters = None, {}
    if args.stats:
        with open(args.stats, encoding="utf-8") as fh:
            st = [json.loads(l) for l in fh if l.strip()]
        failed = [s["garden_path"] for s in st]
        counters = dict(
            expansions=sum(s["expansions"] for s in st),
            analyses=sum(s["advanced"] for s in st),
            words=sum(s["words"] for s in st),
        )
    rep = evaluate(gold, test, failed=failed, edited=args.edited_metric, **counters)
    with _out(args.out) as fh:
        fh.write(eval_table([(args.name, rep)], tsv=args.tsv))
        if not args.tsv:
            fh.write("F %.2f\texact %.1f\tparsed-only LR %.1f LP %.1f\n"
                     % (rep.F, rep.exact, rep.LR_parsed, rep.LP_parsed))
    return 0


def _parser_stream(pm, options, sents, uni, workers, model_path):
    results = parse_all(model_path, pm, options, sents, workers)
    return [word_probs(r, uni) for r in results]


def cmd_ppl(args) -> int:
    sents = read_sentences(args.test)
    tri = None
    if args.trigram_train:
        tri = TrigramModel(bucketing=args.bucketing).train(read_sentences(args.trigram_train))
        if args.trigram_heldout:
            tri.estimate(read_sentences(args.trigram_heldout))
    n_tokens = sum(len(s) + 1 for s in sents)
    if args.lm in ("trigram", "mix") and tri is None:
        raise CLIError("--lm %s needs --trigram-train" % args.lm)
    tri_probs = [tri.sentence_probs(s) for s in sents] if tri else None
    par_probs = None
    if args.lm in ("parser", "mix"):
        if not args.model:
            raise CLIError("--lm %s needs --model" % args.lm)
        path = resolve_model(args.model)
        pm = ParserModel.load(path)
        uni = tri.unigram if tri else None
        par_probs = _parser_stream(pm, _options(args), sents, uni, args.workers, path)
    rows = {}
    if tri_probs:
        rows["tri"] = perplexity([p for ps in tri_probs for p in ps], n_tokens)
    if par_probs:
        rows["par"] = perplexity([p for ps in par_probs for p in ps], n_tokens)
    if tri_probs and par_probs:
        if args.mix_lambda == "bucketed":
            policy = MixPolicy(fixed=None, default=0.36)
        else:
            policy = MixPolicy(fixed=float(args.mix_lambda))
        mixed = []
        for s, tp, pp in zip(sents, tri_probs, par_probs):
            for i, (a, b) in enumerate(zip(pp, tp)):
                mixed.append(mix(a, b, policy, tri.mix_bucket(s[:i])))
        rows["mix"] = perplexity(mixed, n_tokens)
    with _out(args.out) as fh:
        fh.write(ppl_table([(args.name, rows.get("tri", float("nan")), rows.get("par", float("nan")), rows.get("mix", float("nan")))], tsv=args.tsv))
    return 0


def _logsum(probs):
    """Sum of logs, or None when some probability is zero (the caller then
    falls back to the list's own LM score)."""
    if any(p <= 0 for p in probs):
        return None
    return math.fsum(math.log(p) for p in probs)


def cmd_rescore(args) -> int:
    lists = read_nbest(args.nbest)
    lm = None
    if args.lm == "trigram":
        if not args.trigram_train:
            raise CLIError("--lm trigram needs --trigram-train")
        tri = TrigramModel().train(read_sentences(args.trigram_train))
        lm = lambda ws: _logsum(tri.sentence_probs(ws)) if ws else None
    elif args.lm == "parser":
        pm = load_model(args.model)
        p = Parser(pm, _options(args))
        lm = lambda ws: _logsum(word_probs(p.parse(ws), backstop=False)) if ws else None
    pairs = []
    with _out(args.out) as fh:
        for nb in lists:
            res = rescore(nb, lm, args.beta, args.wip)
            best = nb.hyps[res.best].words
            fh.write("%s\t%s\n" % (nb.utt, " ".join(best)))
            pairs.append((nb.reference, best))
        w, se = corpus_wer(pairs)
        fh.write("WER %.2f\tSER %.2f\n" % (w, se))
    return 0


def cmd_em(args) -> int:
    path = resolve_model(args.model)
    pm = ParserModel.load(path)
    parser = Parser(pm, _options(args))
    sents = read_sentences(args.raw)
    weighted = reestimate_em(parser, sents, args.keep_mass)
    with _out(args.out) as fh:
        for wt in weighted:
            fh.write("%r\t%s\n" % (wt.weight, write_bracketed(wt.tree)))
    print("weighted trees %d, skipped sentences %d" % (len(weighted), weighted.skipped), file=sys.stderr)
    return 0


def cmd_pipeline(args) -> int:
    outdir = args.outdir
    os.makedirs(outdir, exist_ok=True)
    pm = _train_from_args(args)
    model_path = os.path.join(outdir, "model.txt")
    pm.save(model_path)
    gold = read_treebank([args.test]).trees
    sents = [t.words() for t in gold]
    results = parse_all(model_path, pm, _options(args), sents, args.workers)
    test = [r.best for r in results]
    write_treebank(test, os.path.join(outdir, "parses.mrg"))
    rep = evaluate(
        gold,
        test,
        failed=[r.garden_path for r in results],
        expansions=sum(sum(r.expansions) for r in results),
        analyses=sum(sum(r.advanced) for r in results),
        words=sum(len(s) for s in sents),
    )
    report = eval_table([(args.name, rep)])
    with open(os.path.join(outdir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(report)
        # head-sensitive scores depend on this choice
        fh.write("head rules: built-in Collins-style table\n")
    with open(os.path.join(outdir, "report.tsv"), "w", encoding="utf-8") as fh:
        fh.write(eval_table([(args.name, rep)], tsv=True))
    write_manifest(outdir, args)
    sys.stdout.write(report)
    return 0


# -- argument parsing ------------------------------------------------------------------------------------


def _beam_args(p):
    p.add_argument("--beam", type=float, default=1e-11, help="base beam factor")
    p.add_argument("--beam-initial", type=float, default=None, help="beam factor at the first word")
    p.add_argument("--mode", choices=("words", "pos"), default="words")
    p.add_argument("--empty-punct", action="store_true")
    p.add_argument("--max-pop", type=int, default=10000)
    p.add_argument("--nbest-parses", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)


def _train_args(p, required=True):
    p.add_argument("--train", nargs="+", required=required)
    p.add_argument("--heldout", nargs="+")
    p.add_argument("--transform", default=None)
    p.add_argument("--conditioning", default="all")
    p.add_argument("--grammar", choices=("markov", "pcfg"), default="markov")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--bucketing", choices=("freq", "avgcount"), default="avgcount")
    p.add_argument("--lc-chain", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tdparse", description=__doc__)
    ap.add_argument("--config", help="key=value file; flags override it")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("treebank", help="corpus statistics and preparation")
    p.add_argument("action", choices=("stats", "strip-punct", "split"))
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out")
    p.add_argument("--spec", default="8/1/1")
    p.add_argument("--chains", action="store_true")
    p.set_defaults(func=cmd_treebank)

    p = sub.add_parser("transform", help="apply or undo a tree transform")
    p.add_argument("kind")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out")
    p.add_argument("--eps-remove", action="store_true")
    p.add_argument("--compose", action="store_true")
    p.add_argument("--detransform", action="store_true")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("train", help="train a parser model")
    _train_args(p)
    p.add_argument("--weighted", help="weighted trees from the em subcommand")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("parse", help="parse sentences")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.add_argument("--emit-prefix-masses")
    p.add_argument("--stats")
    _beam_args(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", help="PARSEVAL scoring")
    p.add_argument("--gold", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--stats", help="per-sentence counters written by parse --stats")
    p.add_argument("--edited-metric", action="store_true")
    p.add_argument("--tsv", action="store_true")
    p.add_argument("--name", default="parser")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ppl", help="perplexity of parser, trigram and mixture")
    p.add_argument("--lm", choices=("parser", "trigram", "mix"), default="mix")
    p.add_argument("--model")
    p.add_argument("--test", required=True)
    p.add_argument("--trigram-train")
    p.add_argument("--trigram-heldout")
    p.add_argument("--bucketing", choices=("freq", "avgcount"), default="avgcount")
    p.add_argument("--lambda", dest="mix_lambda", default="0.36")
    p.add_argument("--tsv", action="store_true")
    p.add_argument("--name", default="test")
    p.add_argument("--out")
    _beam_args(p)
    p.set_defaults(func=cmd_ppl)

    p = sub.add_parser("rescore", help="n-best rescoring and WER")
    p.add_argument("--nbest", required=True)
    p.add_argument("--lm", choices=("none", "trigram", "parser"), default="none")
    p.add_argument("--model")
    p.add_argument("--trigram-train")
    p.add_argument("--beta", type=float, default=16.0)
    p.add_argument("--wip", type=float, default=0.0)
    p.add_argument("--out")
    _beam_args(p)
    p.set_defaults(func=cmd_rescore)

    p = sub.add_parser("em", help="weighted parses of raw text for re-estimation")
    p.add_argument("--model", required=True)
    p.add_argument("--raw", required=True)
    p.add_argument("--keep-mass", type=float, default=0.99)
    p.add_argument("--out")
    _beam_args(p)
    p.set_defaults(func=cmd_em)

    p = sub.add_parser("pipeline", help="train, parse and evaluate in one go")
    _train_args(p)
    p.add_argument("--test", required=True)
    p.add_argument("--outdir", default="run")
    p.add_argument("--name", default="parser")
    p.add_argument("--seed", type=int, default=0)
    _beam_args(p)
    p.set_defaults(func=cmd_pipeline)
    return ap


def _apply_config(ap, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    args = ap.parse_args(argv)
    if known.config:
        cfg = read_config(known.config)
        sub = ap._subparsers._group_actions[0].choices[args.command]
        for key, val in cfg.items():
            action = next((a for a in sub._actions if a.dest == key), None)
            if action is None:
                raise CLIError("unknown config key %r for %s" % (key, args.command))
            flag_given = any(opt in argv for opt in action.option_strings)
            if flag_given:
                continue
            if action.nargs in ("+", "*"):
                v = val.split()
            elif action.const is True and action.nargs == 0:
                v = val.lower() in ("1", "true", "yes")
            else:
                v = action.type(val) if action.type else val
            setattr(args, key, v)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = _apply_config(ap, argv)
        return args.func(args)
    except CLIError as e:
        print("tdparse: %s" % e, file=sys.stderr)
        return e.code
    except FileNotFoundError as e:
        print("tdparse: file not found: %s" % e.filename, file=sys.stderr)
        return 2
    except (TreebankError, transforms.TransformError, ValueError) as e:
        print("tdparse: %s: %s" % (type(e).__module__.split(".")[-1], e), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
