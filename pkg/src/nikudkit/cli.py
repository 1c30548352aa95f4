"""Command-line entry point.

Subcommands: ``dot`` (restore marks over plain text), ``strip`` (remove
marks), ``train`` (curriculum training from a manifest), ``evaluate``
(DEC/CHA/WOR/VOC between gold and prediction), ``stats`` (corpus label
distribution), ``pos-train`` and ``pos-compare`` (transfer harness).

``dot`` and ``strip`` stream stdin to stdout when ``--input``/``--output``
are ``-`` (the default), so the tool composes in pipelines.  Exit codes
are stable for scripting: 0 success, 2 configuration/model errors, 3
data/codec errors, 4 corpus errors.  Commands that write files also drop
a ``RunManifest`` JSON next to their outputs (command, config snapshot,
seed, input digests, tool version); timestamps appear only there.

Training config file (JSON)::

    {"model": {"d_model": 64, "n_layers": 2, ...},
     "train": {"peak_lr": 1e-5, "epochs_per_tier": 1, ...}}

Both sections are optional; unknown keys are rejected.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

from . import __version__
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .corpus import CorpusError, build_chunks, label_distribution, load_manifest, tier_partition
from .hebrew import CodecError, LABELS, compose, strip_marks
from .metrics import MetricsError, align, report, word_diffs
from .model import InvalidConfig, Model, ModelConfig, ModelError, alphabet_from_chunks
from .pos import EmptyDataset, LengthMismatch, PosEpoch, compare, load_conllu, pos_train
from .training import TrainConfig, train_curriculum


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write(path: str, text: str):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


def _run_manifest(path: str, command: str, config: dict, seed, inputs):
    doc = {
        "command": command,
        "tool_version": __version__,
        "seed": seed,
        "config": config,
        "input_digests": {p: _digest(p) for p in inputs if os.path.isfile(p)},
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def _load_model(path: str) -> Model:
    try:
        return load_checkpoint(path)
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from None


def _load_run_config(path: str) -> tuple[dict, TrainConfig]:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as e:
        raise InvalidConfig(f"cannot read config {path}: {e}") from None
    except ValueError as e:
        raise InvalidConfig(f"config {path} is not valid JSON: {e}") from None
    if not isinstance(raw, dict) or set(raw) - {"model", "train"}:
        raise InvalidConfig("config must be an object with only "
                            "'model' and/or 'train' sections")
    model_kwargs = raw.get("model", {})
    allowed = {"d_model", "n_layers", "n_heads", "attn_dropout",
               "neck_hidden", "neck_dropout", "max_len"}
    if not isinstance(model_kwargs, dict) or set(model_kwargs) - allowed:
        raise InvalidConfig(f"model section allows keys {sorted(allowed)}")
    try:
        train_cfg = TrainConfig(**raw.get("train", {}))
    except TypeError as e:
        raise InvalidConfig(f"bad train section: {e}") from None
    return model_kwargs, train_cfg


# -- subcommands ----------------------------------------------------------

def cmd_dot(args) -> int:
    model = _load_model(args.model)
    text = _read(args.input)
    out = compose(model.predict(text))
    _write(args.output, out)
    if args.output != "-":
        _run_manifest(args.output + ".manifest.json", "dot",
                      {"model": args.model}, None,
                      [args.model] + ([args.input] if args.input != "-" else []))
    return 0


def cmd_strip(args) -> int:
    _write(args.output, strip_marks(_read(args.input)))
    return 0


def cmd_train(args) -> int:
    model_kwargs, train_cfg = _load_run_config(args.config)
    if args.seed is not None:
        train_cfg = TrainConfig(**{**train_cfg.as_dict(), "seed": args.seed})
    entries = load_manifest(args.manifest)
    max_len = model_kwargs.get("max_len", 512)
    train_chunks = build_chunks(
        [e for e in entries if e.split == "train"], max_len=max_len)
    dev_chunks = build_chunks(
        [e for e in entries if e.split == "dev"], max_len=max_len)
    alphabet = alphabet_from_chunks(train_chunks + dev_chunks)
    config = ModelConfig(alphabet=alphabet, **model_kwargs)
    model = Model.init(config, seed=train_cfg.seed)
    best, log = train_curriculum(
        model, tier_partition(train_chunks), dev_chunks, train_cfg)
    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, "best.ckpt")
    save_checkpoint(best, ckpt)
    _write(os.path.join(args.out, "train_log.jsonl"), log.lines() + "\n")
    _run_manifest(os.path.join(args.out, "run_manifest.json"), "train",
                  {"model": model_kwargs, "train": train_cfg.as_dict()},
                  train_cfg.seed,
                  [args.config, args.manifest] + [e.path for e in entries])
    best_rec = log.epochs[log.best_epoch]
    print(f"best dev WOR {best_rec.wor:.6f} "
          f"({best_rec.phase} epoch {best_rec.epoch}); checkpoint: {ckpt}")
    return 0


def _metric_line(r) -> str:
    return (f"DEC={r.dec:.6f} CHA={r.cha:.6f} "
            f"WOR={r.wor:.6f} VOC={r.voc:.6f}")


def cmd_evaluate(args) -> int:
    gold_text = _read(args.gold)
    if args.pred:
        pred_text = _read(args.pred)
    else:
        model = _load_model(args.model)
        pred_text = compose(model.predict(gold_text))
    pair = align(gold_text, pred_text)
    r = report([pair])
    print(_metric_line(r))
    if args.report:
        _write(args.report, r.render() + "\n")
        _write(args.report + ".diff.txt", word_diffs([pair]) + "\n")
        inputs = [args.gold] + ([args.pred] if args.pred else [args.model])
        _run_manifest(args.report + ".manifest.json", "evaluate",
                      {"gold": args.gold, "pred": args.pred,
                       "model": args.model}, None, inputs)
    return 0


def cmd_stats(args) -> int:
    entries = load_manifest(args.manifest)
    wanted = [e for e in entries
              if args.split == "all" or e.split == args.split]
    chunks = build_chunks(wanted, max_len=args.max_len)
    dists = label_distribution(chunks)
    doc = {"split": args.split,
           "chunks": len(chunks),
           "hebrew_letters": sum(c.char_count for c in chunks),
           "letters_by_era": {}, "labels": {}}
    for chunk in chunks:
        era = chunk.source.era
        doc["letters_by_era"][era] = \
            doc["letters_by_era"].get(era, 0) + chunk.char_count
    for c, cat in enumerate("SDN"):
        names = LABELS.names(c)
        doc["labels"][cat] = {names[lab]: cnt
                              for lab, cnt in sorted(dists[c].items())}
    print(json.dumps(doc, ensure_ascii=False, indent=2))
    return 0


def cmd_pos_train(args) -> int:
    train_sents = load_conllu(args.train)
    dev_sents = load_conllu(args.dev)
    if args.model:
        encoder = _load_model(args.model)
        arm = args.arm or "finetuned"
    else:
        alphabet = "".join(sorted(
            {ch for s in train_sents + dev_sents for ch in s.text}))
        config = ModelConfig(alphabet=alphabet, d_model=args.d_model,
                             n_layers=args.n_layers, n_heads=args.n_heads,
                             neck_hidden=max(4 * args.d_model, 64),
                             max_len=args.max_len)
        encoder = Model.init(config, seed=args.seed)
        arm = args.arm or "fresh"
    log = pos_train(encoder, train_sents, dev_sents, epochs=args.epochs,
                    seed=args.seed, finetune_encoder=args.finetune_encoder)
    lines = "\n".join(json.dumps(r.as_dict(arm), ensure_ascii=False)
                      for r in log) + "\n"
    _write(args.out, lines)
    if args.out != "-":
        _run_manifest(args.out + ".manifest.json", "pos-train",
                      {"arm": arm, "epochs": args.epochs,
                       "finetune_encoder": args.finetune_encoder,
                       "model": args.model}, args.seed,
                      [args.train, args.dev] + ([args.model] if args.model else []))
    for r in log:
        print(f"{arm} epoch {r.epoch}: accuracy {r.accuracy:.6f} "
              f"macro_f1 {r.macro_f1:.6f}")
    return 0


def _read_pos_log(path: str) -> list[PosEpoch]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                records.append(PosEpoch(rec["epoch"], rec["accuracy"],
                                        rec["macro_f1"]))
    return records


def cmd_pos_compare(args) -> int:
    table = compare(_read_pos_log(args.log_a), _read_pos_log(args.log_b),
                    threshold=args.threshold)
    rendered = table.render()
    print(rendered)
    if args.report:
        _write(args.report, rendered + "\n")
        _run_manifest(args.report + ".manifest.json", "pos-compare",
                      {"log_a": args.log_a, "log_b": args.log_b,
                       "threshold": args.threshold}, None,
                      [args.log_a, args.log_b])
    return 0


# -- argument wiring ------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nikudkit",
        description="Hebrew diacritization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dot", help="restore diacritics over plain text")
    p.add_argument("--model", required=True)
    p.add_argument("--input", default="-")
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_dot)

    p = sub.add_parser("strip", help="remove diacritics from text")
    p.add_argument("--input", default="-")
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_strip)

    p = sub.add_parser("train", help="train from a corpus manifest")
    p.add_argument("--config", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a prediction against gold")
    p.add_argument("--gold", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--pred")
    group.add_argument("--model")
    p.add_argument("--report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="corpus label distribution")
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="train",
                   choices=["train", "dev", "test", "all"])
    p.add_argument("--max-len", type=int, default=512)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("pos-train", help="train the POS transfer head")
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--model", default=None,
                   help="encoder checkpoint; omitted = fresh init")
    p.add_argument("--arm", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--finetune-encoder", action="store_true")
    p.add_argument("--out", default="-")
    p.add_argument("--d-model", type=int, default=64)
    p.add_argument("--n-layers", type=int, default=2)
    p.add_argument("--n-heads", type=int, default=4)
    p.add_argument("--max-len", type=int, default=128)
    p.set_defaults(func=cmd_pos_train)

    p = sub.add_parser("pos-compare", help="compare two pos-train logs")
    p.add_argument("--log-a", required=True)
    p.add_argument("--log-b", required=True)
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_pos_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CheckpointError, InvalidConfig, ModelError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except CorpusError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except (CodecError, MetricsError, EmptyDataset, LengthMismatch,
            ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
