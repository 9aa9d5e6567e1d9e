"""Command-line surface: data generation, training, prediction, evaluation,
online runs, clustering and regime classification.

Every run writes its outputs plus a ``resolved_config.json`` (arguments,
seeds, package and library versions) into the chosen output directory, so
a run can be reproduced byte-for-byte from the directory alone.

Exit codes: 0 success, 1 usage error, 2 data/file error, 3 numerical
failure. The measurement parametrizations handled here are opaque vectors;
no command ever needs operator-level measurement descriptions, so encrypted
or proprietary parametrizations work unchanged.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, clustering, datasets, evaluation, svgplot
from . import training as tr
from .fileio import DataError
from .model import HyperParams
from .training import NumericsError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None


def _prepare_out_dir(args, command):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    resolved = {
        "command": command,
        "arguments": {
            k: v for k, v in sorted(vars(args).items()) if k != "func"
        },
        "versions": {
            "gqnq": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    with open(out / "resolved_config.json", "w", encoding="utf-8") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return out


def _train_config(config_dict, dataset, seed_override=None):
    cfg = dict(config_dict)
    hyper = dict(cfg.get("hyper", {}))
    hyper.setdefault("m_dim", dataset.m_dim)
    hyper.setdefault("k", dataset.k)
    if hyper["m_dim"] != dataset.m_dim or hyper["k"] != dataset.k:
        raise DataError(
            f"hyper dims (m_dim={hyper['m_dim']}, k={hyper['k']}) do not match "
            f"dataset (m_dim={dataset.m_dim}, k={dataset.k})"
        )
    cfg["hyper"] = HyperParams.from_dict(hyper)
    if seed_override is not None:
        cfg["seed"] = seed_override
    return tr.TrainConfig(**cfg)


def _write_loss_history(ckpt, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for i, value in enumerate(ckpt.loss_history):
            fh.write(f"{i},{value:.10f}\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_gen_data(args):
    config = _load_json(args.config)
    if args.scale_factor is not None:
        config["scale_factor"] = args.scale_factor
    if args.seed is not None:
        config["seed"] = args.seed
    out = _prepare_out_dir(args, "gen-data")
    train, test = datasets.generate_datasets(config)
    datasets.save_dataset(train, out / "train.gqd")
    datasets.save_dataset(test, out / "test.gqd")
    print(f"wrote {len(train)} train / {len(test)} test states to {out}")
    return EXIT_OK


def cmd_train(args):
    dataset = datasets.load_dataset(args.data)
    config = _train_config(_load_json(args.config), dataset, args.seed)
    out = _prepare_out_dir(args, "train")
    resume = tr.load_checkpoint(args.resume) if args.resume else None

    def progress(epoch, loss_value, lr):
        if epoch % max(1, config.epochs // 20) == 0 or epoch == config.epochs - 1:
            print(f"epoch {epoch:4d}  loss {loss_value:10.4f}  lr {lr:.5f}")

    ckpt = tr.train_multi(dataset.states(), config, resume=resume,
                          progress=progress)
    tr.save_checkpoint(ckpt, out / "model.ckpt")
    _write_loss_history(ckpt, out / "loss_history.csv")
    print(f"checkpoint written to {out / 'model.ckpt'}")
    return EXIT_OK


def cmd_train_single(args):
    dataset = datasets.load_dataset(args.data)
    if not 0 <= args.state_index < len(dataset):
        raise DataError(f"state index {args.state_index} out of range")
    config = _train_config(_load_json(args.config), dataset, args.seed)
    out = _prepare_out_dir(args, "train-single")
    state = dataset.state(args.state_index)
    rng = np.random.default_rng(config.seed)
    performed = np.sort(rng.choice(len(state), size=args.performed, replace=False))
    records = tr.StateExample(
        m=state.m[performed], p=state.p[performed], meta=state.meta
    )
    ckpt = tr.train_single(records, config)
    tr.save_checkpoint(ckpt, out / "model.ckpt")
    _write_loss_history(ckpt, out / "loss_history.csv")
    with open(out / "performed_indices.json", "w", encoding="utf-8") as fh:
        json.dump(performed.tolist(), fh)
        fh.write("\n")
    print(f"single-state checkpoint written to {out / 'model.ckpt'}")
    return EXIT_OK


def _read_jsonl(path):
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rows.append(json.loads(line))
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON lines ({exc})") from None
    return rows


def cmd_predict(args):
    ckpt = tr.load_checkpoint(args.checkpoint)
    hp = ckpt.params.hyper
    context = _read_jsonl(args.context)
    queries = _read_jsonl(args.queries)
    if not context or not queries:
        raise DataError("context and query files must be nonempty")
    try:
        m_ctx = np.array([row["m"] for row in context], dtype=float)
        p_ctx = np.array([row["p"] for row in context], dtype=float)
        m_qry = np.array([row["m"] for row in queries], dtype=float)
    except KeyError as exc:
        raise DataError(f"record missing field {exc}") from None
    if m_ctx.shape[1] != hp.m_dim or p_ctx.shape[1] != hp.k:
        raise DataError(
            f"context dims {m_ctx.shape[1]}/{p_ctx.shape[1]} do not match "
            f"model (m_dim={hp.m_dim}, k={hp.k})"
        )
    r = evaluation.make_representation(ckpt.params, m_ctx, p_ctx)
    preds = evaluation.predict_distributions(ckpt.params, r, m_qry)
    lines = ["query_index," + ",".join(f"p{j}" for j in range(hp.k))]
    for i, row in enumerate(np.atleast_2d(preds)):
        lines.append(f"{i}," + ",".join(f"{v:.10f}" for v in row))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {len(queries)} predictions to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args):
    ckpt = tr.load_checkpoint(args.checkpoint)
    dataset = datasets.load_dataset(args.data)
    out = _prepare_out_dir(args, "eval")
    phases = dataset.info.get("phases")
    builder = None
    if args.phase_jitter_sigma > 0:
        if dataset.info.get("kind") != "cv":
            raise DataError("phase jitter applies to homodyne datasets only")
        builder = datasets.rebuild_cv_state
    report = evaluation.evaluate(
        ckpt.params,
        dataset.states(),
        context_size=args.context_size,
        seed=args.seed,
        shots=args.shots,
        noise_sigma=args.noise_sigma,
        phase_sigma=args.phase_jitter_sigma,
        phases=phases,
        state_builder=builder,
    )
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    table = report.format_table()
    (out / "report.txt").write_text(table + "\n", encoding="utf-8")
    print(table)
    return EXIT_OK


def cmd_online(args):
    ckpt = tr.load_checkpoint(args.checkpoint)
    dataset = datasets.load_dataset(args.data)
    out = _prepare_out_dir(args, "online")
    rng = np.random.default_rng(args.seed)
    indices = (
        [args.state_index] if args.state_index is not None else range(len(dataset))
    )
    mean_curves, worst_curves = [], []
    for idx in indices:
        state = dataset.state(idx)
        order = rng.permutation(len(state))
        trace = evaluation.online_run(ckpt.params, state, order, steps=args.steps)
        mean_curves.append(trace.mean_fidelity)
        worst_curves.append(trace.worst_fidelity)
    mean_avg = np.mean(mean_curves, axis=0)
    worst_avg = np.mean(worst_curves, axis=0)
    with open(out / "online_trace.csv", "w", encoding="utf-8") as fh:
        fh.write("step,mean_fidelity,worst_fidelity\n")
        for i in range(args.steps):
            fh.write(f"{i + 1},{mean_avg[i]:.10f},{worst_avg[i]:.10f}\n")
    if args.plot:
        svgplot.svg_lines(
            np.arange(1, args.steps + 1),
            {"average": mean_avg, "worst": worst_avg},
            out / "online_trace.svg",
            title="online learning",
            ylabel="classical fidelity",
        )
    print(
        f"online run over {len(mean_curves)} state(s): step1 {mean_avg[0]:.4f} "
        f"-> step{args.steps} {mean_avg[-1]:.4f}"
    )
    return EXIT_OK


def _state_representations(params, dataset, context_size, seed):
    rng = np.random.default_rng(seed)
    reps = np.empty((len(dataset), params.hyper.d_r))
    for i in range(len(dataset)):
        state = dataset.state(i)
        sel = rng.choice(len(state), size=context_size, replace=False)
        reps[i] = evaluation.make_representation(
            params, state.m[sel], state.p[sel]
        )
    return reps


def cmd_cluster(args):
    ckpt = tr.load_checkpoint(args.checkpoint)
    dataset = datasets.load_dataset(args.data)
    out = _prepare_out_dir(args, "cluster")
    reps = _state_representations(ckpt.params, dataset, args.context_size,
                                  args.seed)
    families = [m.get("family", "") for m in dataset.meta]
    labels = clustering.gmm_cluster(reps, args.components, seed=args.seed)
    rate = clustering.match_rate(labels, families)
    embedding = clustering.embed2d(reps, method=args.method, seed=args.seed)
    with open(out / "embedding.csv", "w", encoding="utf-8") as fh:
        fh.write("state_index,x,y,cluster,family\n")
        for i in range(len(dataset)):
            fh.write(
                f"{i},{embedding[i, 0]:.8f},{embedding[i, 1]:.8f},"
                f"{labels[i]},{families[i]}\n"
            )
    with open(out / "clusters.json", "w", encoding="utf-8") as fh:
        json.dump(
            {"match_rate": rate, "components": args.components,
             "method": args.method},
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")
    if args.plot:
        svgplot.svg_scatter(embedding, families, out / "embedding.svg",
                            title=f"{args.method} embedding")
    print(f"cluster/type match rate: {rate:.4f}")
    return EXIT_OK


def regime_label(meta):
    """pure (J > 1) vs mixed (0 < J < 1) ferromagnetic regime, else None."""
    j = meta.get("mean_coupling")
    if j is None:
        return None
    if j > 1.0:
        return "pure_ferro"
    if 0.0 < j < 1.0:
        return "mixed_ferro"
    return None


def cmd_classify(args):
    ckpt = tr.load_checkpoint(args.checkpoint)
    train_ds = datasets.load_dataset(args.train_data)
    test_ds = datasets.load_dataset(args.test_data)
    out = _prepare_out_dir(args, "classify")

    def labelled(ds, seed):
        reps = _state_representations(ckpt.params, ds, args.context_size, seed)
        labels = [regime_label(m) for m in ds.meta]
        keep = [i for i, l in enumerate(labels) if l is not None]
        return reps[keep], [labels[i] for i in keep]

    x_train, y_train = labelled(train_ds, args.seed)
    x_test, y_test = labelled(test_ds, args.seed + 1)
    if not y_train or not y_test:
        raise DataError("datasets carry no states in the two coupling regimes")
    clf = evaluation.train_regime_classifier(x_train, y_train, seed=args.seed)
    result = {
        "train_accuracy": evaluation.classifier_accuracy(clf, x_train, y_train),
        "test_accuracy": evaluation.classifier_accuracy(clf, x_test, y_test),
        "train_states": len(y_train),
        "test_states": len(y_test),
    }
    with open(out / "classifier_report.json", "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"regime classifier: train {result['train_accuracy']:.4f}, "
        f"test {result['test_accuracy']:.4f}"
    )
    return EXIT_OK


def cmd_export(args):
    dataset = datasets.load_dataset(args.data)
    datasets.export_jsonl(dataset, args.out)
    print(f"exported {len(dataset)} states to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="gqnq", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate train/test datasets")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--scale-factor", type=float)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="multi-state offline training")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--resume")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train-single", help="unsupervised single-state training")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--state-index", type=int, required=True)
    p.add_argument("--performed", type=int, required=True,
                   help="number of performed measurements to train on")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train_single)

    p = sub.add_parser("predict", help="predict outcome statistics for queries")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--context", required=True,
                   help="JSON-lines file with {m, p} context records")
    p.add_argument("--queries", required=True,
                   help="JSON-lines file with {m} query parametrizations")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="fidelity report on a test dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--context-size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shots", type=int, default=0,
                   help="finite-shot context statistics (0 = exact)")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--phase-jitter-sigma", type=float, default=0.0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("online", help="incremental (online) learning trace")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--steps", type=int, default=15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--state-index", type=int)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_online)

    p = sub.add_parser("cluster", help="cluster state representations")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--components", type=int, required=True)
    p.add_argument("--context-size", type=int, required=True)
    p.add_argument("--method", choices=("pca", "tsne"), default="tsne")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plot", action="store_true")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("classify", help="pure vs mixed ferromagnetic regime")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--train-data", required=True)
    p.add_argument("--test-data", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--context-size", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("export", help="dump a dataset as JSON lines")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
