"""``needcast`` command line: extract, train, predict, eval, synth, analyze.

Options may also come from a ``key=value`` config file (``--config``); flags
given on the command line win.  Exit codes: 0 success, 1 usage error, 2 data
error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, checkpoint
from .analytics import CORPUS_SIZE, evaluate_pairs, write_analytics
from .base import TrainConfig
from .corpus import align, load_tweets, load_weather, parse_timestamp
from .encoding import InputSequence, TrainingPair, build_vocab, pairs_to_csv, read_pairs, write_pairs
from .errors import NeedcastError, NumericError
from .extraction import NeedClassifier, load_lexicon, train_classifier
from .fileio import atomic_write_text, write_csv_rows
from .forecaster import Seq2SeqForecaster
from .pipeline import as_predicate, extract_pairs, load_labeled, make_model, split_pairs
from .synth import OracleSpec, generate, write_corpus

log = logging.getLogger("needcast")

MODEL_CHOICES = ("seq2seq", "trigram", "genlstm", "cnn")
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _on_off(text: str) -> bool:
    low = text.strip().lower()
    if low in ("on", "true", "yes", "1"):
        return True
    if low in ("off", "false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def read_config(path) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment, dashes become underscores."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (p.strip() for p in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


# -- manifest ----------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, args, outputs) -> None:
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k not in ("func", "config_path")}
    manifest = {
        "command": command,
        "config": cfg,
        "seed": getattr(args, "seed", None),
        "versions": {"needcast": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "outputs": {p.name if p.parent == out else str(p.relative_to(out)): _sha256(p) for p in sorted(outputs)},
    }
    atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# -- shared loading ----------------------------------------------------------


def _require(path, what):
    if path is None:
        raise UsageError(f"--{what} is required")
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{what} file not found: {p}")
    return p


def _classifier(args, lexicon):
    """Train on --labeled when given, else fall back to the lexicon rule."""
    if getattr(args, "labeled", None):
        model, metrics = train_classifier(load_labeled(_require(args.labeled, "labeled")), seed=args.seed)
        return model, metrics
    return None, None


def _extract(args):
    lexicon = load_lexicon(args.lexicon)
    tweets = load_tweets(_require(args.tweets, "tweets"))
    weather = load_weather(_require(args.weather, "weather"))
    if not tweets:
        raise NeedcastError(f"{args.tweets}: no tweets to process")
    clf, metrics = _classifier(args, lexicon)
    records = align(tweets, weather, args.location)
    ex = extract_pairs(records, lexicon, clf)
    return lexicon, tweets, ex, clf, metrics


def _load_pairs(args) -> list[TrainingPair]:
    if args.pairs:
        return read_pairs(_require(args.pairs, "pairs"))
    if args.tweets and args.weather:
        return _extract(args)[2].pairs
    raise UsageError("give --pairs, or --tweets and --weather")


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        hidden=args.hidden,
        seed=args.seed,
        lr=args.lr,
        teacher_forcing=args.teacher_forcing,
        split=args.split,
        batch_size=args.batch_size,
        max_updates=args.max_updates,
        optimizer=args.optimizer,
        clip=args.clip,
        dropout=args.dropout,
    )


def _canonical(args):
    lexicon = load_lexicon(args.lexicon)
    size = args.corpus_size if args.corpus_size else CORPUS_SIZE
    return set(lexicon.canonical_needs), size


def _predictions_csv(pairs, preds) -> str:
    rows = [TrainingPair(p.input, pred, p.block) for p, pred in zip(pairs, preds)]
    return pairs_to_csv(rows)


# -- commands ----------------------------------------------------------------


def cmd_extract(args) -> list[Path]:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lexicon, _, ex, _, metrics = _extract(args)
    files = [out / "pairs.csv", out / "review_queue.txt", out / "hourly_needs.csv"]
    write_pairs(files[0], ex.pairs)
    lexicon.write_review_queue(files[1])
    write_csv_rows(
        files[2],
        ("date", "hour", "location", "need", "count"),
        [(h.block.date.isoformat(), h.block.hour, h.block.location, n, h.counts[n]) for h in ex.hourly for n in h.needs],
    )
    summary = [
        f"blocks={len(ex.records)}",
        f"pairs={len(ex.pairs)}",
        f"excluded_empty={len(ex.excluded)}",
        f"need_tweets={ex.need_tweets}",
        f"tagger_failures={ex.stats.tagger_failures}",
        f"review_queue={len(lexicon.review_queue)}",
        metrics.format() if metrics else "classifier=lexicon",
    ]
    files.append(out / "extract_summary.txt")
    atomic_write_text(files[-1], "\n".join(summary) + "\n")
    print(" ".join(summary[:3]))
    return files


def cmd_train(args) -> list[Path]:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = _train_config(args)
    pairs = _load_pairs(args)
    train, test = split_pairs(pairs, cfg.split, cfg.seed)
    vocab = build_vocab(train)
    model = make_model(args.model, vocab, cfg)
    log.info("training %s on %d pairs (vocab %d)", args.model, len(train), vocab.size)
    model.fit(train, cfg)
    model.meta.update(model_type=args.model, n_train=len(train), n_test=len(test), vocab_size=vocab.size)
    files = [out / "model.ckpt", out / "loss.csv", out / "loss_epochs.csv"]
    checkpoint.save(model, files[0])
    write_csv_rows(files[1], ("update", "loss"), model.loss_curve.csv_rows())
    write_csv_rows(files[2], ("epoch", "loss"), [(i + 1, f"{v:.10g}") for i, v in enumerate(model.loss_curve.epochs)])
    if test:
        canonical, size = _canonical(args)
        preds = model.predict_many([p.input for p in test])
        report = evaluate_pairs(test, preds, size, canonical)
        files += report.write(out)
        files.append(out / "predictions.csv")
        atomic_write_text(files[-1], _predictions_csv(test, preds))
        print(f"{args.model}: held-out SMC {report.overall:.6f} on {len(test)} blocks")
    summary = [
        f"model={args.model}",
        f"train_pairs={len(train)}",
        f"test_pairs={len(test)}",
        f"vocab_size={vocab.size}",
        f"need_symbols={len(vocab.needs)}",
        f"updates={model.meta.get('updates', 0)}",
    ]
    files.append(out / "train_summary.txt")
    atomic_write_text(files[-1], "\n".join(summary) + "\n")
    return files


def cmd_predict(args) -> list[Path]:
    model = checkpoint.load(_require(args.checkpoint, "checkpoint"))
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    files = []
    if args.input:
        inp = InputSequence.parse(args.input)
        if isinstance(model, Seq2SeqForecaster):
            seq, trace = model.predict_traced(inp)
            if out:
                files.append(out / "attention.csv")
                atomic_write_text(files[-1], trace.to_csv())
        else:
            seq = model.predict(inp)
        line = " ".join([*seq.needs, "[EOS]" if seq.terminated else "[CUT]"])
        print(line)
        if out:
            files.append(out / "prediction.txt")
            atomic_write_text(files[-1], line + "\n")
        return files
    if not args.pairs:
        raise UsageError("give --input or --pairs")
    if out is None:
        raise UsageError("--out is required with --pairs")
    pairs = read_pairs(_require(args.pairs, "pairs"))
    inputs = [p.input for p in pairs]
    if isinstance(model, Seq2SeqForecaster):
        traced = []
        for start in range(0, len(inputs), 256):
            traced.extend(model.predict_with_trace(inputs[start : start + 256]))
        preds = [s for s, _ in traced]
        att = out / "attention"
        att.mkdir(exist_ok=True)
        for p, (_, trace) in zip(pairs, traced):
            b = p.block
            files.append(att / f"{b.date.isoformat()}_{b.hour:02d}_{b.location.replace(' ', '_')}.csv")
            atomic_write_text(files[-1], trace.to_csv())
    else:
        preds = model.predict_many(inputs)
    files.append(out / "predictions.csv")
    atomic_write_text(files[-1], _predictions_csv(pairs, preds))
    print(f"wrote {len(preds)} predictions")
    return files


def cmd_eval(args) -> list[Path]:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truth = read_pairs(_require(args.pairs, "pairs"))
    canonical, size = _canonical(args)
    if args.predictions:
        preds = {p.block: p.target for p in read_pairs(_require(args.predictions, "predictions"))}
        known = {p.block for p in truth}
        stray = [b for b in preds if b not in known]
        if stray:
            raise NeedcastError(f"{len(stray)} predicted block(s) have no ground truth, e.g. {stray[0]}")
        test = [p for p in truth if p.block in preds]
        predicted = [preds[p.block] for p in test]
    elif args.checkpoint:
        model = checkpoint.load(_require(args.checkpoint, "checkpoint"))
        if args.all:
            test = truth
        else:
            split = float(model.meta.get("split", args.split))
            seed = int(model.meta.get("seed", args.seed))
            _, test = split_pairs(truth, split, seed)
        predicted = model.predict_many([p.input for p in test])
    else:
        raise UsageError("give --checkpoint or --predictions")
    if not test:
        raise NeedcastError("nothing to evaluate")
    report = evaluate_pairs(test, predicted, size, canonical)
    print(f"SMC {report.overall:.6f} over {len(test)} blocks")
    return report.write(out)


def cmd_synth(args) -> list[Path]:
    locations = tuple(s for s in args.locations.split(",") if s.strip())
    kw = dict(noise=args.noise, seed=args.seed)
    if args.blocks:
        start = parse_timestamp(args.start) if args.start else None
        spec = OracleSpec.for_blocks(args.blocks, locations, start, **kw)
    else:
        spec = OracleSpec(locations, parse_timestamp(args.start), parse_timestamp(args.end), **kw)
    corpus = generate(spec)
    paths = write_corpus(corpus, args.out)
    print(f"{len(corpus.truth)} blocks, {len(corpus.tweets)} tweets, substitutions {corpus.substitutions}/{corpus.slots}")
    return list(paths.values())


def cmd_analyze(args) -> list[Path]:
    out = Path(args.out)
    lexicon, tweets, ex, clf, _ = _extract(args)
    is_need = as_predicate(clf) if isinstance(clf, NeedClassifier) else (lambda tw: bool(ex.tweet_needs.get(tw.id)))
    units = None
    if args.phi_unit == "tweet":
        units = [n for n in ex.tweet_needs.values() if n]
    return write_analytics(out, ex.hourly, tweets, is_need, args.block_width, args.threshold, units)


# -- parser ------------------------------------------------------------------


def _add_data(p, labeled=True):
    p.add_argument("--tweets", help="tweet JSON-lines file")
    p.add_argument("--weather", help="weather CSV file")
    p.add_argument("--lexicon", help="lexicon file (default: bundled 75-need lexicon)")
    if labeled:
        p.add_argument("--labeled", help="labelled tweets for the need classifier")
    p.add_argument("--location", help="location for tweets without a city")


def _add_seed(p, default=0):
    p.add_argument("--seed", type=int, default=default)


def _add_eval_opts(p):
    p.add_argument("--corpus-size", type=int, default=None, help=f"SMC denominator (default {CORPUS_SIZE})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="needcast", description="Forecast hourly disaster needs from weather symbols.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", dest="config_path", help="key=value config file; flags override it")
    parser.add_argument("-v", "--verbose", action="store_true")
    # accepted after the subcommand too; SUPPRESS keeps the top-level values
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", dest="config_path", default=argparse.SUPPRESS, help="key=value config file")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", parents=[common], help="tweets + weather -> training pairs")
    _add_data(p)
    _add_seed(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", parents=[common], help="train a forecaster on an 80/20 split")
    p.add_argument("--pairs", help="pairs CSV from `extract` (or give --tweets/--weather)")
    _add_data(p)
    p.add_argument("--model", choices=MODEL_CHOICES, default="seq2seq")
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--epochs", type=int, default=100)
    _add_seed(p)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--teacher-forcing", type=_on_off, default=True, metavar="{on,off}")
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--clip", type=float, default=5.0)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--max-updates", type=int, default=None)
    _add_eval_opts(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="predict needs for one input or a pairs file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", help='eight symbols, e.g. "houston 08-26 D9 H15 W20 P0 HU C3"')
    p.add_argument("--pairs", help="pairs CSV whose inputs are predicted")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", parents=[common], help="SMC of a checkpoint or a predictions file")
    p.add_argument("--pairs", required=True, help="ground-truth pairs CSV")
    p.add_argument("--checkpoint")
    p.add_argument("--predictions", help="predictions CSV (pairs format)")
    p.add_argument("--all", action="store_true", help="score every pair, not just the held-out split")
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--lexicon")
    _add_seed(p)
    _add_eval_opts(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic oracle corpus")
    p.add_argument("--locations", default="houston,dallas,austin,beaumont")
    p.add_argument("--blocks", type=int, help="total hour blocks (overrides --end)")
    p.add_argument("--start", default="2017-08-17T00:00:00Z")
    p.add_argument("--end", default="2017-08-27T10:00:00Z")
    p.add_argument("--noise", type=float, default=0.1)
    _add_seed(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", parents=[common], help="concern flow, tweet rate, co-occurrence, phi, city counts")
    _add_data(p)
    _add_seed(p)
    p.add_argument("--block-width", type=int, default=4, help="tweet-rate block width in hours")
    p.add_argument("--threshold", type=int, default=0, help="minimum co-occurrence count exported")
    p.add_argument("--phi-unit", choices=("block", "tweet"), default="block")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)
    return parser


def parse_args(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", dest="config_path")
    known, _ = pre.parse_known_args(argv)
    if known.config_path:
        try:
            cfg = read_config(known.config_path)
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
        except UsageError as exc:
            parser.error(str(exc))
        subparsers = parser._subparsers._group_actions[0].choices
        command = next((a for a in argv if a in subparsers), None)
        if command is None:
            parser.error("no command given")
        sub = subparsers[command]
        actions = {a.dest: a for a in sub._actions}
        unknown = sorted(set(cfg) - set(actions) - {"help", "config_path"})
        if unknown:
            parser.error(f"unknown config key(s) for {command}: {', '.join(unknown)}")
        for key, value in cfg.items():
            action = actions[key]
            if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                try:
                    value = _on_off(value)
                except argparse.ArgumentTypeError as exc:
                    parser.error(f"config key {key}: {exc}")
            action.default = value
            action.required = False
    return parser.parse_args(argv)


def _format_warning(message, category, filename, lineno, line=None):
    return f"needcast: warning: {message}\n"


def main(argv=None) -> int:
    args = parse_args(argv)
    warnings.formatwarning = _format_warning
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            outputs = args.func(args)
        out = getattr(args, "out", None)
        if out:
            out = Path(out)
            write_manifest(out, args.command, args, [p for p in outputs if p.exists()])
    except UsageError as exc:
        print(f"needcast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"needcast: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NeedcastError, ValueError, OSError, KeyError) as exc:
        print(f"needcast: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
