"""Command-line entry point.

Every command reads an optional flat config file (``--config``) and applies
``--set key=value`` overrides on top.  Exit codes: 0 success, 1 data error,
2 config error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Sequence

from . import checkpoint as ckpt_io
from . import synthetic
from .config import RunConfig
from .corpus import Corpus, Instance, dump_corpus, dump_schema, read_corpus
from .errors import ConfigError, DataError, HierDialogError, NumericError
from .graph import CHANNELS, graph_structure, gtn_compose
from .masking import build_turn_mask, render_mask, row_sums
from .preprocess import Vocab, encode_instance, truncate_to_prefix

log = logging.getLogger("hierdialog")

CHECKPOINT_NAME = "model.ckpt"


def _parse_sets(pairs: Sequence[str]) -> dict[str, str]:
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError("MALFORMED_OVERRIDE", f"--set expects key=value, got {pair!r}")
        out[key.strip()] = value.strip()
    return out


def _config(args: argparse.Namespace, base: RunConfig | None = None) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else (base or RunConfig())
    return cfg.update(_parse_sets(args.set))


def _read(path: str | None, cfg: RunConfig, what: str) -> Corpus:
    if not path:
        raise ConfigError("MISSING_PATH", f"no {what} corpus configured")
    if not cfg.schema_path:
        raise ConfigError("MISSING_PATH", "schema_path is required")
    try:
        return read_corpus(path, cfg.schema_path)
    except OSError as exc:
        raise DataError("UNREADABLE", str(exc)) from None


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_checkpoint(path: str):
    try:
        return ckpt_io.load(path)
    except OSError as exc:
        raise DataError("UNREADABLE", str(exc)) from None


# commands


def cmd_train(args: argparse.Namespace) -> int:
    from .training import evaluate, train

    cfg = _config(args)
    path = args.checkpoint or os.path.join(cfg.checkpoint_dir, CHECKPOINT_NAME)
    train_corpus = _read(cfg.train_path, cfg, "train")
    dev_corpus = _read(cfg.dev_path, cfg, "dev") if cfg.dev_path else None
    model = train(cfg, train_corpus, dev_corpus, checkpoint_path=path)
    report = evaluate(model, dev_corpus or train_corpus)
    _emit(report.to_text(), args.out)
    log.info("checkpoint written to %s", path)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    from .training import evaluate

    model = _load_checkpoint(args.checkpoint)
    cfg = _config(args, base=model.config)
    path = args.corpus or getattr(cfg, f"{args.split}_path")
    report = evaluate(model, _read(path, cfg, args.split), cfg)
    _emit(report.to_text(), args.out)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    from .training import VARIANTS, ablate, render_ablation

    cfg = _config(args)
    variants = [v.strip() for v in args.variants.split(",")] if args.variants else list(VARIANTS)
    unknown = set(variants) - set(VARIANTS)
    if unknown:
        raise ConfigError("UNKNOWN_VARIANT", f"unknown variants {sorted(unknown)}")
    train_corpus = _read(cfg.train_path, cfg, "train")
    dev_corpus = _read(cfg.dev_path, cfg, "dev") if cfg.dev_path else None
    rows = ablate(cfg, variants, train_corpus, dev_corpus)
    if args.report_dir:
        os.makedirs(args.report_dir, exist_ok=True)
        for row in rows:
            with open(os.path.join(args.report_dir, f"{row.variant}.txt"), "w", encoding="utf-8") as fh:
                fh.write(f"variant = {row.variant}\ndata_hash = {row.data_hash}\n")
                fh.write("".join(f"train.{line}\n" for line in row.train.to_text().splitlines()))
                if row.dev:
                    fh.write("".join(f"dev.{line}\n" for line in row.dev.to_text().splitlines()))
    _emit(render_ablation(rows), args.out)
    return 0


def cmd_gen_synthetic(args: argparse.Namespace) -> int:
    try:
        schema = synthetic.schema(args.classes)
    except ValueError as exc:
        raise ConfigError("BAD_VALUE", str(exc)) from None
    os.makedirs(args.out_dir, exist_ok=True)
    schema_path = os.path.join(args.out_dir, "schema.json")
    with open(schema_path, "w", encoding="utf-8") as fh:
        fh.write(dump_schema(schema))
    paths, counts = {}, {}
    # each split gets its own generator stream derived from the one seed
    for offset, split in enumerate(("train", "dev", "test")):
        n = getattr(args, split)
        if n <= 0:
            continue
        instances = synthetic.generate(
            n, args.classes, seed=args.seed + offset, cue=args.cue,
            min_turns=args.min_turns, max_turns=args.max_turns,
            distractor_rate=args.distractor_rate, id_prefix=split,
        )
        paths[split] = os.path.join(args.out_dir, f"{split}.jsonl")
        counts[split] = len(instances)
        with open(paths[split], "w", encoding="utf-8") as fh:
            fh.write(dump_corpus(instances, schema.class_names))
    cfg = RunConfig(
        train_path=paths.get("train"), dev_path=paths.get("dev"), test_path=paths.get("test"),
        schema_path=schema_path, checkpoint_dir=os.path.join(args.out_dir, "checkpoints"),
    )
    with open(os.path.join(args.out_dir, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(cfg.to_text())
    print(f"wrote {' '.join(f'{k}={n}' for k, n in counts.items())} to {args.out_dir}")
    return 0


def _inspect_target(args: argparse.Namespace) -> tuple[RunConfig, Instance, Vocab]:
    model = _load_checkpoint(args.checkpoint) if args.checkpoint else None
    cfg = _config(args, base=model.config if model else None)
    corpus = _read(args.corpus or cfg.train_path, cfg, "input")
    matches = [inst for inst in corpus.instances if inst.id == args.id] if args.id else corpus.instances[:1]
    if not matches:
        raise DataError("UNKNOWN_ID", f"no instance with id {args.id!r}")
    inst = truncate_to_prefix(matches[0]) if args.prefix else matches[0]
    vocab = model.vocab if model else Vocab.from_instances(corpus.instances)
    return cfg, inst, vocab


def _encode(cfg: RunConfig, inst: Instance, vocab: Vocab):
    return encode_instance(inst, vocab, cfg.max_len, special_tokens=not cfg.no_special_tokens)


def render_sequence(inst: Instance, seq) -> str:
    roles = {seq.cls_position: "cls"}
    for i, (start, end) in enumerate(seq.spans):
        name = f"turn{i + 1}" if i < seq.num_turns else f"arg{i - seq.num_turns + 1}"
        for p in range(start, end):
            roles[p] = name
        if seq.has_tau:
            roles[seq.tau_positions[i]] = f"{name}.tau"
    lines = [
        f"id = {inst.id}",
        f"turns = {seq.num_turns}",
        f"arguments = {seq.num_args}",
        f"length = {len(seq)}",
        f"spans = {' '.join(f'{s}:{e}' for s, e in seq.spans)}",
        f"tau_positions = {' '.join(map(str, seq.tau_positions)) or 'none'}",
        "",
        f"{'pos':>4}  {'token':<16}{'id':>5}{'spk':>5}  role",
    ]
    for p, (tok, tid, spk) in enumerate(zip(seq.tokens, seq.token_ids, seq.speaker_ids)):
        lines.append(f"{p:>4}  {tok:<16}{tid:>5}{spk:>5}  {roles.get(p, '-')}")
    return "\n".join(lines) + "\n"


def cmd_inspect_sequence(args: argparse.Namespace) -> int:
    cfg, inst, vocab = _inspect_target(args)
    _emit(render_sequence(inst, _encode(cfg, inst, vocab)), args.out)
    return 0


def cmd_inspect_mask(args: argparse.Namespace) -> int:
    cfg, inst, vocab = _inspect_target(args)
    seq = _encode(cfg, inst, vocab)
    mask = build_turn_mask(seq, enabled=not cfg.no_turn_mask)
    sums = " ".join(str(int(v)) for v in row_sums(mask))
    text = f"id = {inst.id}\nsize = {len(seq)}\nrow_sums = {sums}\n\n" + render_mask(mask)
    _emit(text, args.out)
    return 0


def cmd_inspect_graph(args: argparse.Namespace) -> int:
    cfg, inst, vocab = _inspect_target(args)
    seq = _encode(cfg, inst, vocab)
    graph = graph_structure(seq)
    lines = [f"id = {inst.id}", f"nodes = {graph.node_count}"]
    for i in range(graph.node_count):
        lines.append(f"node {i} {graph.node_kind(i)}")
    for channel in CHANNELS:
        edges = graph.edges(channel)
        lines.append(f"channel {channel} {len(edges)}: {' '.join(f'{a}-{b}' for a, b in edges)}".rstrip())
    if args.checkpoint:
        model = _load_checkpoint(args.checkpoint)
        composed = gtn_compose(graph, model.params.graph)
        lines.append("composed adjacency")
        lines.extend(" ".join(f"{v:.6f}" for v in row) for row in composed)
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_grad_check(args: argparse.Namespace) -> int:
    from .gradcheck import SMALL_CONFIG, check_gradients, render

    cfg = SMALL_CONFIG.replace(seed=args.seed) if args.seed is not None else SMALL_CONFIG
    results = check_gradients(cfg)
    _emit(render(results), args.out)
    if not all(r.ok for r in results):
        raise NumericError("GRADIENT_MISMATCH", f"{sum(not r.ok for r in results)} parameter groups failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hierdialog", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config field")
        p.add_argument("--out", help="write the result here instead of stdout")

    def inspect(p: argparse.ArgumentParser) -> None:
        common(p)
        p.add_argument("--corpus", help="corpus file (default: train_path)")
        p.add_argument("--id", help="instance id (default: first instance)")
        p.add_argument("--checkpoint", help="take vocabulary and config from a checkpoint")
        p.add_argument("--prefix", action="store_true", help="cut the dialogue at the first turn mentioning all arguments")

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    common(p)
    p.add_argument("--checkpoint", help=f"output path (default: <checkpoint_dir>/{CHECKPOINT_NAME})")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a checkpoint on a corpus")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "dev", "test"), default="dev")
    p.add_argument("--corpus", help="corpus file overriding --split")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="train and compare ablation variants")
    common(p)
    p.add_argument("--variants", help="comma separated subset of full,no_mask,no_special_tokens,intra_only")
    p.add_argument("--report-dir", help="also write one full metric report per variant here")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gen-synthetic", help="write a synthetic corpus, schema and config")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--train", type=int, default=200)
    p.add_argument("--dev", type=int, default=100)
    p.add_argument("--test", type=int, default=100)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cue", choices=("key", "last"), default="key")
    p.add_argument("--min-turns", type=int, default=2)
    p.add_argument("--max-turns", type=int, default=5)
    p.add_argument("--distractor-rate", type=float, default=0.5)
    p.set_defaults(func=cmd_gen_synthetic)

    for name, func, text in (
        ("inspect-sequence", cmd_inspect_sequence, "show the encoded token sequence"),
        ("inspect-mask", cmd_inspect_mask, "show the attention mask"),
        ("inspect-graph", cmd_inspect_graph, "show graph nodes and edges"),
    ):
        p = sub.add_parser(name, help=text)
        inspect(p)
        p.set_defaults(func=func)

    p = sub.add_parser("grad-check", help="finite-difference check of all gradients")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_grad_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except HierDialogError as exc:
        print(f"error: {exc.code}: {exc.message}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
