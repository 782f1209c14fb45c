"""``adapterlab`` command line.

Every command that produces results writes a run directory::

    OUT/config.json    resolved configuration (defaults < --config < flags)
    OUT/record.json    run record (no wall-clock fields, so reruns match)
    OUT/metrics.csv    one row per evaluation / analysis point
    OUT/checkpoints/   init/ and best/ (train) or final/ (tapt)

Exit status: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import functools
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..analysis import RSAConfig, landscape_from_model, lr_sweep, rsa_to_reference
from ..config import POLICY_NAMES
from ..data.dataset import SPLITS, load_corpus, load_task_dir, subsample_low_resource
from ..data.synthetic import SyntheticTaskSpec, generate_synthetic_task, synthetic_corpus
from ..data.dataset import write_task_dir
from ..data.vocab import Vocabulary
from ..model import EncoderModel, count_parameters, is_adapter_param, is_trainable, parameter_shapes
from ..tuning.metrics import METRICS, compute_metric
from ..tuning.tapt import tapt_pretrain
from ..tuning.train import predict, train
from .checkpoint import load_checkpoint, load_vocab, save_checkpoint
from .runconfig import RunConfig

log = logging.getLogger("adapterlab")


class UsageError(Exception):
    def __init__(self, message: str, usage: str = ""):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self.format_usage())


# -- output helpers ---------------------------------------------------------


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".9g")
    return v


def write_csv(path, rows: list, columns: Sequence[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True))


def _out_dir(args) -> Path:
    if not args.out:
        raise UsageError("--out is required for this command")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- data and model helpers ------------------------------------------------


def _data_vocab(data: Path) -> Optional[Vocabulary]:
    return load_vocab(data) if data.is_dir() else None


def _load_task(cfg: RunConfig, data, vocab: Optional[Vocabulary] = None):
    data = Path(data)
    vocab = vocab or _data_vocab(data)
    ds = load_task_dir(data, cfg.min_freq, cfg.max_seq_len, vocab)
    if cfg.train_size:
        ds = subsample_low_resource(ds, cfg.train_size, cfg.seed, cfg.stratified)
    return ds


def _backbone(cfg: RunConfig):
    if not cfg.init_checkpoint:
        return None, None
    return load_checkpoint(cfg.init_checkpoint), load_vocab(cfg.init_checkpoint)


def build_model(cfg: RunConfig, vocab_size: int, num_classes: int, seed: int, backbone=None) -> EncoderModel:
    policy = cfg.tuning_policy()
    adapters = policy.base.adapter if policy.is_adapter else None
    if backbone is not None:
        if backbone.config.vocab_size != vocab_size:
            raise ValueError(f"init checkpoint vocabulary ({backbone.config.vocab_size}) differs from the data ({vocab_size})")
        return EncoderModel.from_pretrained(backbone, num_classes, adapters, seed)
    return EncoderModel(cfg.transformer(vocab_size), num_classes, adapters, seed)


def _split(ds, name: str):
    if name not in SPLITS:
        raise UsageError(f"split must be one of {', '.join(SPLITS)}, got {name!r}")
    examples = ds.split(name)
    if not examples:
        raise ValueError(f"split {name!r} is empty")
    return examples


# -- commands --------------------------------------------------------------


def cmd_train(args, cfg: RunConfig) -> None:
    out = _out_dir(args)
    backbone, vocab = _backbone(cfg)
    ds = _load_task(cfg, _require(args, "data"), vocab)
    policy = cfg.tuning_policy()
    model = build_model(cfg, len(ds.vocab), ds.num_classes, cfg.seed, backbone)
    cfg.write(out / "config.json")
    save_checkpoint(model, out / "checkpoints" / "init", policy, 0, ds.vocab)
    record, model = train(model, ds, policy, cfg.train_config())
    save_checkpoint(model, out / "checkpoints" / "best", policy, record.selected_step or 0, ds.vocab)
    _write_json(out / "record.json", record.comparable())
    write_csv(out / "metrics.csv", record.evaluations, ["step", "epoch", "train_loss", "dev_loss", "dev_metric"])
    log.info("best dev %s %.4f at step %s; test %s", cfg.metric, record.best_dev_metric, record.selected_step, record.test_metric)


def _corpus(cfg: RunConfig, data: Path, vocab: Optional[Vocabulary]):
    vocab = vocab or _data_vocab(data)
    if data.is_dir():
        text = data / "corpus.txt"
        if text.exists():
            return load_corpus(text, vocab, cfg.min_freq, cfg.max_seq_len)
        ds = load_task_dir(data, cfg.min_freq, cfg.max_seq_len, vocab)
        return ds.vocab, [e.ids for e in ds.train]
    return load_corpus(data, vocab, cfg.min_freq, cfg.max_seq_len)


def cmd_tapt(args, cfg: RunConfig) -> None:
    out = _out_dir(args)
    backbone, vocab = _backbone(cfg)
    vocab, corpus = _corpus(cfg, Path(_require(args, "data")), vocab)
    policy = cfg.tuning_policy()
    num_classes = backbone.num_classes if backbone is not None else 2
    model = build_model(cfg, len(vocab), num_classes, cfg.seed, backbone)
    cfg.write(out / "config.json")
    save_checkpoint(model, out / "checkpoints" / "init", policy, 0, vocab)
    record, model = tapt_pretrain(model, corpus, policy, cfg.train_config())
    save_checkpoint(model, out / "checkpoints" / "final", policy, record.selected_step, vocab)
    _write_json(out / "record.json", record.comparable())
    write_csv(out / "metrics.csv", record.evaluations, ["step", "epoch", "train_loss", "masked"])
    log.info("MLM loss %.4f -> %.4f", record.extra["mlm_loss_start"], record.extra["mlm_loss_end"])


def cmd_eval(args, cfg: RunConfig) -> None:
    out = _out_dir(args)
    ckpt = _require(args, "model")
    model = load_checkpoint(ckpt)
    ds = _load_task(cfg, _require(args, "data"), load_vocab(ckpt))
    split = cfg.split or "test"
    examples = _split(ds, split)
    preds, loss = predict(model, examples)
    labels = [e.label for e in examples]
    rows = [{"split": split, "metric": m, "value": compute_metric(m, labels, preds)} for m in METRICS]
    rows.append({"split": split, "metric": "loss", "value": loss})
    cfg.write(out / "config.json")
    _write_json(out / "record.json", {"kind": "eval", "model": str(ckpt), "split": split, "metrics": {r["metric"]: r["value"] for r in rows}})
    write_csv(out / "metrics.csv", rows, ["split", "metric", "value"])
    for r in rows:
        print(f"{r['metric']}\t{_cell(r['value'])}")


def cmd_rsa(args, cfg: RunConfig) -> None:
    out = _out_dir(args)
    a_path, b_path = _require(args, "model_a"), _require(args, "model_b")
    model_a, model_b = load_checkpoint(a_path), load_checkpoint(b_path)
    vocab_a, vocab_b = load_vocab(a_path), load_vocab(b_path)
    if vocab_a is not None and vocab_b is not None and vocab_a != vocab_b:
        raise ValueError("the two checkpoints were trained with different vocabularies")
    ds = _load_task(cfg, _require(args, "data"), vocab_a or vocab_b)
    split = cfg.split or "test"
    result = rsa_to_reference(model_a, model_b, _split(ds, split), RSAConfig(cfg.rsa_sample_size, cfg.seed))
    rows = [{"layer": i, "score": s} for i, s in enumerate(result.scores)]
    cfg.write(out / "config.json")
    _write_json(out / "record.json", {"kind": "rsa", "model_a": str(a_path), "model_b": str(b_path), "split": split, "scores": list(result.scores)})
    write_csv(out / "metrics.csv", rows, ["layer", "score"])
    for r in rows:
        print(f"layer {r['layer']}\t{_cell(r['score'])}")


def cmd_landscape(args, cfg: RunConfig) -> None:
    out = _out_dir(args)
    ckpt = _require(args, "model")
    model = load_checkpoint(ckpt)
    ds = _load_task(cfg, _require(args, "data"), load_vocab(ckpt))
    split = cfg.split or "train"
    curve = landscape_from_model(model, _split(ds, split))
    cfg.write(out / "config.json")
    _write_json(out / "record.json", {"kind": "landscape", "model": str(ckpt), "split": split, "alphas": list(curve.alphas), "losses": list(curve.losses)})
    write_csv(out / "metrics.csv", curve.to_rows(), ["alpha", "loss"])


def _sweep_model(cfg: RunConfig, vocab_size: int, num_classes: int, backbone, seed: int) -> EncoderModel:
    return build_model(cfg, vocab_size, num_classes, seed, backbone)


def cmd_sweep(args, cfg: RunConfig) -> None:
    out = _out_dir(args)
    backbone, vocab = _backbone(cfg)
    ds = _load_task(cfg, _require(args, "data"), vocab)
    factory = functools.partial(_sweep_model, cfg, len(ds.vocab), ds.num_classes, backbone)
    result = lr_sweep(ds, factory, cfg.tuning_policy(), cfg.sweep_lrs, cfg.sweep_seeds, cfg.train_config(), cfg.workers)
    cfg.write(out / "config.json")
    summary = {format(lr, "g"): dict(zip(("min", "q1", "median", "q3", "max"), q)) for lr, q in result.summary().items()}
    _write_json(
        out / "record.json",
        {"kind": "sweep", "policy": result.policy, "summary": summary, "pooled_iqr": result.pooled_iqr(), "failed": len(result.failures)},
    )
    write_csv(out / "metrics.csv", result.to_rows(), ["policy", "lr", "seed", "metric", "failed"])


def cmd_params(args, cfg: RunConfig) -> None:
    policy = cfg.tuning_policy()
    adapters = policy.base.adapter if policy.is_adapter else None
    shapes = parameter_shapes(cfg.transformer(args.vocab_size), args.num_classes, adapters)
    sizes = {n: int(np.prod(s)) for n, s in shapes.items()}
    total = sum(sizes.values())
    groups = {
        "all": total,
        "adapters": count_parameters(shapes, "adapters").count,
        # the MLM head is inactive during supervised tuning
        "trainable": sum(v for n, v in sizes.items() if is_trainable(n, policy) and not n.startswith("mlm_head.")),
    }
    rows = [{"filter": k, "count": v, "total": total, "fraction": v / total} for k, v in groups.items()]
    for r in rows:
        print(f"{r['filter']}\t{r['count']}\t{r['fraction']:.4%}")
    if args.out:
        out = _out_dir(args)
        cfg.write(out / "config.json")
        write_csv(out / "metrics.csv", rows, ["filter", "count", "total", "fraction"])


def cmd_synth(args, cfg: RunConfig) -> None:
    out = _out_dir(args)
    spec = SyntheticTaskSpec(
        vocab_size=cfg.synth_vocab_size, num_classes=cfg.synth_classes, label_noise=cfg.synth_label_noise, seed=cfg.seed
    )
    ds = generate_synthetic_task(spec, tuple(cfg.synth_sizes))
    write_task_dir(ds, out)
    (out / "vocab.json").write_text(json.dumps(ds.vocab.to_dict()))
    with open(out / "corpus.txt", "w", encoding="utf-8") as fh:
        for ids in synthetic_corpus(spec, cfg.synth_corpus_size):
            fh.write(" ".join(ds.vocab.decode(ids)) + "\n")
    cfg.write(out / "config.json")
    _write_json(out / "spec.json", {"spec": ds.extra["spec"], "bayes_accuracy": spec.bayes_accuracy()})


COMMANDS = {
    "train": (cmd_train, "supervised tuning with dev-based checkpoint selection"),
    "tapt": (cmd_tapt, "masked-LM pretraining on unlabeled task text"),
    "eval": (cmd_eval, "evaluate a checkpoint on one split"),
    "rsa": (cmd_rsa, "per-layer RSA between two checkpoints"),
    "landscape": (cmd_landscape, "loss along the initial-to-tuned segment"),
    "sweep": (cmd_sweep, "learning-rate x seed grid"),
    "params": (cmd_params, "parameter counts for a configuration"),
    "synth": (cmd_synth, "write a synthetic keyword task"),
}


def _require(args, name: str):
    value = getattr(args, name, None)
    if value is None:
        raise UsageError(f"--{name.replace('_', '-')} is required for this command")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adapterlab", description="Adapter vs fine-tuning experiments on a numpy transformer.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file of run settings (flags override its keys)")
        p.add_argument("--data", help="task directory (train/dev/test.tsv) or corpus file")
        p.add_argument("--out", help="run directory to write")
        p.add_argument("--seed", type=int)
        p.add_argument("--policy", choices=POLICY_NAMES)
        p.add_argument("--adapter-size", type=int, dest="adapter_size")
        p.add_argument("--lr", type=float)
        p.add_argument("--epochs", type=int)
        p.add_argument("--batch-size", type=int, dest="batch_size")
        p.add_argument("--max-steps", type=int, dest="max_steps")
        p.add_argument("--init-checkpoint", dest="init_checkpoint", help="start from this checkpoint's weights")
        p.add_argument("--split", choices=SPLITS)
        if name in ("eval", "landscape"):
            p.add_argument("--model", help="checkpoint directory")
        if name == "rsa":
            p.add_argument("--model-a", dest="model_a", help="reference checkpoint")
            p.add_argument("--model-b", dest="model_b", help="compared checkpoint")
        if name == "sweep":
            p.add_argument("--workers", type=int)
        if name == "params":
            p.add_argument("--vocab-size", type=int, default=64, dest="vocab_size")
            p.add_argument("--num-classes", type=int, default=2, dest="num_classes")
    return parser


OVERRIDES = ("seed", "policy", "adapter_size", "lr", "epochs", "batch_size", "max_steps", "init_checkpoint", "split", "workers")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc.usage}adapterlab: error: {exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        if args.config is not None and not Path(args.config).is_file():
            raise UsageError(f"config file {args.config} does not exist")
        overrides = {k: getattr(args, k, None) for k in OVERRIDES}
        try:
            cfg = RunConfig.resolve(args.config, overrides)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid configuration: {exc}") from exc
        COMMANDS[args.command][0](args, cfg)
    except UsageError as exc:
        sys.stderr.write(f"{parser.format_usage()}adapterlab: error: {exc}\n")
        return 1
    except Exception as exc:
        sys.stderr.write(f"adapterlab {args.command}: {type(exc).__name__}: {exc}\n")
        log.debug("traceback", exc_info=True)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
