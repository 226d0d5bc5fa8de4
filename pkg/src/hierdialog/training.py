"""Training loop, evaluation and ablation runs."""

from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import checkpoint as ckpt_io
from .checkpoint import Checkpoint
from .config import RunConfig
from .corpus import Corpus, Instance, dump_corpus, read_corpus
from .errors import ConfigError, DataError, NumericError
from .metrics import LengthBuckets, MetricReport, f1_scores, group_report
from .model import ModelParams, Prepared, collate, init_params, loss, predict_prepared, prepare
from .preprocess import Vocab, truncate_to_prefix

log = logging.getLogger(__name__)

GTN_LOGITS = "graph.gtn_logits"
VARIANTS = ("full", "no_mask", "no_special_tokens", "intra_only")


def _load_split(cfg: RunConfig, path: str | None) -> Corpus | None:
    if path is None:
        return None
    if cfg.schema_path is None:
        raise ConfigError("MISSING_PATH", "schema_path is required to read a corpus")
    return read_corpus(path, cfg.schema_path)


def neutral_index(cfg: RunConfig, class_names: Sequence[str], default: int | None) -> int | None:
    if cfg.neutral_class is None:
        return default
    if cfg.neutral_class not in class_names:
        raise ConfigError("BAD_NEUTRAL", f"neutral_class {cfg.neutral_class!r} is not a class")
    return list(class_names).index(cfg.neutral_class)


def sgd_step(params: ModelParams, lr: float, gtn_lr_scale: float = 1.0) -> None:
    for name, t in params.named().items():
        if t.grad is not None:
            t.data -= (lr * gtn_lr_scale if name == GTN_LOGITS else lr) * t.grad
    # the no-speaker embedding row stays zero
    params.encoder.spk_emb.data[0] = 0.0


def length_pooled_batches(
    items: Sequence[Prepared], size: int, rng: np.random.Generator, pool_factor: int = 4
) -> list[list[Prepared]]:
    """Shuffle, sort within pools of ``pool_factor`` batches by length, chunk,
    then shuffle the batch order.  Keeps padding low without fixing batches."""
    order = rng.permutation(len(items))
    pool = size * pool_factor
    out = []
    for start in range(0, len(order), pool):
        chunk = sorted(order[start:start + pool], key=lambda i: len(items[i].seq))
        out.extend([items[i] for i in chunk[j:j + size]] for j in range(0, len(chunk), size))
    return [out[i] for i in rng.permutation(len(out))]


def train(
    cfg: RunConfig,
    train_corpus: Corpus | None = None,
    dev_corpus: Corpus | None = None,
    checkpoint_path: str | None = None,
) -> Checkpoint:
    """Mini-batch SGD on batch-mean cross-entropy; deterministic given the seed."""
    cfg.validate()
    if train_corpus is None:
        train_corpus = _load_split(cfg, cfg.train_path)
    if train_corpus is None:
        raise ConfigError("MISSING_PATH", "train_path is required")
    if dev_corpus is None:
        dev_corpus = _load_split(cfg, cfg.dev_path)
    if not train_corpus.instances:
        raise DataError("EMPTY_CORPUS", "training corpus is empty")

    vocab = Vocab.from_instances(train_corpus.instances)
    train_items = [prepare(inst, vocab, cfg) for inst in train_corpus.instances]
    dev_items = [prepare(inst, vocab, cfg) for inst in dev_corpus.instances] if dev_corpus else []
    num_classes = len(train_corpus.class_names)
    params = init_params(cfg, num_classes, len(vocab))
    rng = np.random.default_rng([cfg.seed, 1])
    history: list[dict] = []

    for epoch in range(1, cfg.epochs + 1):
        total, count = 0.0, 0
        for chunk in length_pooled_batches(train_items, cfg.batch_size, rng):
            batch = collate(chunk, cfg.k_max)
            params.zero_grad()
            value = loss(batch, params, cfg.intra_turn_only, dropout=cfg.dropout, rng=rng if cfg.dropout else None)
            if not np.isfinite(value.data):
                raise NumericError("NONFINITE_LOSS", f"loss is {float(value.data)} at epoch {epoch}")
            value.backward()
            sgd_step(params, cfg.lr, cfg.gtn_lr_scale)
            total += float(value.data) * len(chunk)
            count += len(chunk)
        entry = {"epoch": epoch, "train_loss": total / count}
        if dev_items and (epoch % cfg.eval_every == 0 or epoch == cfg.epochs):
            entry["dev_micro_f1"] = f1_scores(predict_prepared(dev_items, params, cfg), num_classes).micro_f1
        history.append(entry)
        log.info("epoch %d %s", epoch, " ".join(f"{k}={v:.6f}" for k, v in entry.items() if k != "epoch"))

    result = Checkpoint(cfg, vocab, params, list(train_corpus.class_names), train_corpus.neutral_class, history)
    if checkpoint_path:
        os.makedirs(os.path.dirname(checkpoint_path) or ".", exist_ok=True)
        ckpt_io.save(result, checkpoint_path)
    return result


def predict(ckpt: Checkpoint, instances: Sequence[Instance]) -> list:
    cfg = ckpt.config
    items = [prepare(inst, ckpt.vocab, cfg) for inst in instances]
    return predict_prepared(items, ckpt.params, cfg)


def evaluate_f1c(ckpt: Checkpoint, instances: Sequence[Instance]) -> float | None:
    """Micro-F1 after cutting each dialogue at the first turn where all arguments
    have been mentioned.  Only two-argument instances take part; returns None
    when there are none."""
    relational = [truncate_to_prefix(inst) for inst in instances if inst.k == 2]
    if not relational:
        return None
    return f1_scores(predict(ckpt, relational), len(ckpt.class_names)).micro_f1


def check_compatible(ckpt: Checkpoint, corpus: Corpus) -> None:
    if list(corpus.class_names) != list(ckpt.class_names):
        raise ConfigError("CONFIG_MISMATCH", "corpus classes differ from the checkpoint's")


def evaluate(ckpt: Checkpoint, corpus: Corpus, cfg: RunConfig | None = None) -> MetricReport:
    """Metrics for ``corpus`` under the checkpoint's model and ablation flags.

    ``cfg`` only selects reporting options (metrics, neutral class, buckets).
    """
    check_compatible(ckpt, corpus)
    cfg = cfg or ckpt.config
    num_classes = len(ckpt.class_names)
    neutral = neutral_index(cfg, ckpt.class_names, corpus.neutral_class)
    preds = predict(ckpt, corpus.instances)
    report = group_report(preds, LengthBuckets(tuple(cfg.length_edges)), num_classes, neutral, ckpt.class_names)
    if corpus.class_groups:
        by_index = {i: corpus.class_groups[name] for i, name in enumerate(ckpt.class_names) if name in corpus.class_groups}
        grouped = group_report(preds, by_index, num_classes, neutral, ckpt.class_names)
        report.groups.update(grouped.groups)
    if "f1c" in cfg.metrics:
        report.f1c = evaluate_f1c(ckpt, corpus.instances)
    return report


def variant_config(cfg: RunConfig, variant: str) -> RunConfig:
    base = cfg.replace(no_turn_mask=False, no_special_tokens=False, intra_turn_only=False)
    if variant == "full":
        return base
    if variant == "no_mask":
        return base.replace(no_turn_mask=True)
    if variant == "no_special_tokens":
        return base.replace(no_turn_mask=True, no_special_tokens=True)
    if variant == "intra_only":
        return base.replace(intra_turn_only=True)
    raise ConfigError("UNKNOWN_VARIANT", f"unknown ablation variant {variant!r}")


def corpus_hash(*corpora: Corpus | None) -> str:
    h = hashlib.sha256()
    for c in corpora:
        if c is not None:
            h.update(dump_corpus(c.instances, c.class_names).encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


@dataclass
class AblationRow:
    variant: str
    data_hash: str
    train: MetricReport
    dev: MetricReport | None


def ablate(
    cfg: RunConfig,
    variants: Sequence[str] = VARIANTS,
    train_corpus: Corpus | None = None,
    dev_corpus: Corpus | None = None,
) -> list[AblationRow]:
    """Train and evaluate each variant on the same data with the same seed."""
    if train_corpus is None:
        train_corpus = _load_split(cfg, cfg.train_path)
    if train_corpus is None:
        raise ConfigError("MISSING_PATH", "train_path is required")
    if dev_corpus is None:
        dev_corpus = _load_split(cfg, cfg.dev_path)
    rows = []
    for variant in variants:
        vcfg = variant_config(cfg, variant)
        digest = corpus_hash(train_corpus, dev_corpus)
        model = train(vcfg, train_corpus, dev_corpus)
        rows.append(AblationRow(
            variant,
            digest,
            evaluate(model, train_corpus),
            evaluate(model, dev_corpus) if dev_corpus else None,
        ))
    return rows


def render_ablation(rows: Sequence[AblationRow]) -> str:
    lines = [f"{'variant':<20}{'train_micro_f1':>16}{'dev_micro_f1':>14}  data_hash"]
    for r in rows:
        dev = f"{r.dev.micro_f1:.4f}" if r.dev else "-"
        lines.append(f"{r.variant:<20}{r.train.micro_f1:>16.4f}{dev:>14}  {r.data_hash[:16]}")
    return "\n".join(lines) + "\n"
