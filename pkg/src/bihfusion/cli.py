"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import tensorcore as tc
from .config import FIELD_TYPES, ConfigError, RunConfig, _convert, load_config
from .protein.dataset import DatasetFormatError, PER_RESIDUE_TASKS, CLASSIFICATION_TASKS, read_dataset, write_dataset
from .protein.graph import EmptyStructure, MissingBackboneAtoms, build_graph, graph_to_dict
from .protein.pdb import PdbError, parse_pdb

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("bihfusion")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    g = p.add_argument_group("configuration keys (override the config file)")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        g.add_argument(flag, dest=f"cfg_{f.name}", metavar=str(FIELD_TYPES[f.name]).upper(),
                       default=argparse.SUPPRESS)


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    try:
        over = {k[4:]: _convert(k[4:], v) for k, v in vars(args).items() if k.startswith("cfg_")}
    except ConfigError as e:
        raise UsageError(f"bad flag value: {e}") from None
    return cfg.replace(**over).validate()


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bihfusion", description="Structure/sequence fusion models for protein tasks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("gendata", help="write a synthetic dataset file")
    s.add_argument("--task", default="mqa")
    s.add_argument("--n", type=int, default=8, help="number of proteins")
    s.add_argument("--min-len", type=int, default=8)
    s.add_argument("--max-len", type=int, default=16)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--level", default="all_atom")
    s.add_argument("--num-classes", type=int, default=8)
    s.add_argument("--out", required=True)

    s = sub.add_parser("featurize", help="dump a residue graph and its geometric features as JSON")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--pdb")
    src.add_argument("--dataset")
    s.add_argument("--index", type=int, default=0, help="record index within --dataset")
    s.add_argument("--chains", help="comma-separated chain ids (PDB input)")
    s.add_argument("--cutoff", type=float, default=10.0)
    s.add_argument("--level", default="base")
    s.add_argument("--out", help="output path (default: stdout)")

    s = sub.add_parser("train", help="train a model")
    _add_config_flags(s)
    s.add_argument("--resume", action="store_true", help="continue from the configured checkpoint")
    s.add_argument("--figures", help="directory for training-curve figures")

    s = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    _add_config_flags(s)
    s.add_argument("--split", default="test", choices=["train", "val", "test"])
    s.add_argument("--report", help="structured (JSON) metric report path")
    s.add_argument("--figures", help="directory for evaluation figures")

    s = sub.add_parser("predict", help="predict one record")
    s.add_argument("--checkpoint", required=True)
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--pdb")
    src.add_argument("--dataset")
    s.add_argument("--index", type=int, default=0)
    s.add_argument("--chains")

    s = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    s.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("invariance", help="rigid-motion and permutation suite")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--proteins", type=int, default=100)
    s.add_argument("--transforms", type=int, default=10)

    s = sub.add_parser("ordinal", help="held-out loss of each fusion mode over seeds")
    s.add_argument("--out", required=True, help="report directory")
    s.add_argument("--proteins", type=int, default=200)
    s.add_argument("--seeds", type=int, default=5)
    s.add_argument("--epochs", type=int, default=20)
    return p


# --- subcommands -------------------------------------------------------------

def cmd_gendata(args, out) -> int:
    from .synth import generate_synthetic

    ds = generate_synthetic(args.task, args.n, (args.min_len, args.max_len), args.seed,
                            level=args.level, num_classes=args.num_classes)
    write_dataset(args.out, ds)
    print(f"wrote {len(ds)} records to {args.out}", file=out)
    return EXIT_OK


def _load_structure(args):
    if args.pdb:
        path = Path(args.pdb)
        chains = args.chains.split(",") if args.chains else None
        return parse_pdb(path.read_text(encoding="utf-8"), chains, id=path.stem), None
    ds = read_dataset(args.dataset)
    if not 0 <= args.index < len(ds):
        raise IndexError(f"{args.dataset} has {len(ds)} records; index {args.index} is out of range")
    return ds[args.index].structure, ds[args.index]


def cmd_featurize(args, out) -> int:
    s, _ = _load_structure(args)
    g = build_graph(s, args.cutoff, args.level)
    text = json.dumps(graph_to_dict(g), indent=1)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text, file=out)
    return EXIT_OK


def cmd_train(args, out) -> int:
    from .train import run_training

    cfg = resolve_config(args)

    def show(rec):
        print(f"epoch={rec['epoch']} train_loss={rec['train_loss']!r} val_loss={rec['val_loss']!r}", file=out)

    st = run_training(cfg, resume=args.resume, on_epoch=show)
    print(f"best_epoch={st.best_epoch} best_val_loss={st.best_val!r} checkpoint={cfg.checkpoint}", file=out)
    if args.figures and st.history:
        from .plotting import plot_training_curves

        plot_training_curves(st.history, Path(args.figures) / "training_curve.png", cfg.task)
    return EXIT_OK


def cmd_eval(args, out) -> int:
    from .train import load_for_eval, load_split, metric_report, predictions

    cfg = resolve_config(args)
    model, stored = load_for_eval(cfg.checkpoint)
    if stored.task != cfg.task:
        raise ConfigError(f"checkpoint {cfg.checkpoint} was trained for {stored.task!r}, not {cfg.task!r}")
    data_cfg = stored.replace(train_path=cfg.train_path, val_path=cfg.val_path, test_path=cfg.test_path,
                              embeddings=cfg.embeddings)
    examples = load_split(data_cfg, args.split)
    preds = predictions(model, examples)
    labels = [ex.label for ex in examples]
    rep = metric_report(stored.task, preds, labels)
    out.write(rep.to_text())
    if args.report:
        rep.write_json(args.report)
    if args.figures:
        from . import plotting

        fig_dir = Path(args.figures)
        if stored.task in PER_RESIDUE_TASKS:
            plotting.plot_pr_curve(np.concatenate([np.ravel(p) for p in preds]),
                                   np.concatenate([np.ravel(t) for t in labels]), fig_dir / "pr_curve.png")
        elif stored.task in CLASSIFICATION_TASKS:
            plotting.plot_confusion([int(np.argmax(p)) for p in preds], labels, stored.num_classes,
                                    fig_dir / "confusion.png")
        else:
            plotting.plot_predictions([float(p) for p in preds], [float(t) for t in labels],
                                      fig_dir / "pred_vs_target.png", stored.task)
    return EXIT_OK


def cmd_predict(args, out) -> int:
    from .train import Example, item_prediction, load_for_eval

    model, cfg = load_for_eval(args.checkpoint)
    s, rec = _load_structure(args)
    lig = rec.ligand if rec is not None else None
    if cfg.task == "lba" and lig is None:
        raise DatasetFormatError("lba prediction needs a ligand; pass a dataset record")
    ex = Example(s.id, build_graph(s, cfg.cutoff, cfg.level), s.tokens, None, lig)
    with tc.no_grad():
        y = item_prediction(model, ex).numpy()
    if cfg.task in CLASSIFICATION_TASKS:
        print(f"id={s.id} class={int(np.argmax(y))} logits={','.join(repr(float(v)) for v in y)}", file=out)
    elif cfg.task in PER_RESIDUE_TASKS:
        print(f"id={s.id} logits={','.join(repr(float(v)) for v in y)}", file=out)
    else:
        print(f"id={s.id} prediction={float(y)!r}", file=out)
    return EXIT_OK


def cmd_gradcheck(args, out) -> int:
    from .suites import GRADCHECK_TOL, gradcheck_suite

    worst = 0.0
    for r in gradcheck_suite(args.seed):
        name = max(r.errors, key=r.errors.get)
        print(f"case={r.mode}/{r.task}/{r.level} groups={len(r.errors)} max_rel_error={r.max_error!r} worst={name}",
              file=out)
        worst = max(worst, r.max_error)
    print(f"max_relative_error={worst!r}", file=out)
    return EXIT_OK if worst < GRADCHECK_TOL else EXIT_NUMERIC


def cmd_invariance(args, out) -> int:
    from .suites import invariance_suite

    rep = invariance_suite(args.proteins, args.transforms, args.seed)
    out.write(rep.to_text())
    for msg in rep.failures:
        print(msg, file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_NUMERIC


def cmd_ordinal(args, out) -> int:
    from .ordinal import ordinal_study, write_ordinal_report

    rep = ordinal_study(args.proteins, range(args.seeds), args.epochs)
    paths = write_ordinal_report(rep, args.out)
    out.write(rep.to_tsv())
    print(f"ordering_holds={rep.ordering_holds} report={paths[0]} figure={paths[1]}", file=out)
    return EXIT_OK


COMMANDS = {
    "gendata": cmd_gendata, "featurize": cmd_featurize, "train": cmd_train, "eval": cmd_eval,
    "predict": cmd_predict, "gradcheck": cmd_gradcheck, "invariance": cmd_invariance, "ordinal": cmd_ordinal,
}

DATA_ERRORS = (OSError, DatasetFormatError, PdbError, tc.FormatError, ConfigError, EmptyStructure,
               MissingBackboneAtoms, IndexError, KeyError, ValueError)


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if not e.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except (FloatingPointError, tc.NumericError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except DATA_ERRORS as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
