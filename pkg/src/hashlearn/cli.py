"""Command-line interface.

Subcommands: ``train``, ``hash``, ``retrieve``, ``eval``, ``bound`` and the
``lsh`` baseline (with its own ``train``/``hash``/``retrieve``).  Every run
echoes its resolved configuration to standard output, so a run can be
reproduced from the echo alone.  Exit status: 0 on success, 1 on usage
errors, 2 on data or model errors.

Configuration precedence is flags > ``--config`` key-value file > defaults.
Config files hold one ``key = value`` pair per line, keys matching the long
flag names.

Output files:

* ``train`` writes the model to ``--out`` and a tab-separated training log
  (iteration, surrogate loss, distortion, summed dual objectives, elapsed
  seconds) to ``<out>.log``.
* ``hash`` writes one line per query: ``id<TAB>code<TAB>label`` with the
  code as a 0/1 string (0 for -1) and the label in the input labeling
  (``?`` for the LSH baseline, which has no classifier).
* ``retrieve`` writes ``s<TAB>precision`` rows, ``eval`` writes
  ``radius<TAB>precision<TAB>recall`` rows; both render a PNG figure next
  to the table unless ``--no-figure`` is given.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .core import TrainConfig, load_model, save_model
from .errors import HashLearnError
from .evaluation import generalization_bound, pr_curve, precision_at_s
from .hasher import hash_and_classify, hash_queries, write_hash_file
from .ingest import append_unlabeled, fit_standardization, load, load_features
from .kernels import default_kernel_bank, parse_kernel_spec
from .lsh import (
    load_lsh_model,
    lsh_hash,
    lsh_train,
    save_lsh_model,
    with_standardization,
)
from .report import (
    figure_path,
    render_pr_figure,
    render_precision_figure,
    write_pr_table,
    write_precision_table,
)
from .trainer import train_full

_MODES = {
    "supervised": "supervised",
    "semi": "semi-supervised",
    "semi-supervised": "semi-supervised",
    "transductive": "transductive",
}

DEFAULT_S_LIST = "10:50:5"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract wants 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    top = _Parser(prog="hashlearn", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default=None)
        p.add_argument("--format", default=None, choices=["delimited", "sparse"])

    p = sub.add_parser("train", help="learn a hash function and codewords")
    add_common(p)
    p.add_argument("--data", default=None)
    p.add_argument("--bits", default=None, type=int)
    p.add_argument("--c", default=None, type=float)
    p.add_argument("--p", default=None, type=float)
    p.add_argument("--kernels", default=None)
    p.add_argument("--mode", default=None)
    p.add_argument("--unlabeled", default=None)
    p.add_argument("--groups", default=None, type=int)
    p.add_argument("--seed", default=None, type=int)
    p.add_argument("--max-iterations", default=None, type=int)
    p.add_argument("--tolerance", default=None, type=float)
    p.add_argument("--jitter", default=None, type=float)
    p.add_argument("--threads", default=None, type=int)
    p.add_argument("--out", default=None)

    p = sub.add_parser("hash", help="hash and classify samples")
    add_common(p)
    p.add_argument("--model", default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--out", default=None)

    for name, help_text in (
        ("retrieve", "precision@s against a database"),
        ("eval", "precision-recall curve by Hamming radius"),
    ):
        p = sub.add_parser(name, help=help_text)
        add_common(p)
        p.add_argument("--model", default=None)
        p.add_argument("--database", default=None)
        p.add_argument("--queries", default=None)
        if name == "retrieve":
            p.add_argument("--s-list", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--no-figure", action="store_true")

    p = sub.add_parser("bound", help="margin-based generalization bound")
    add_common(p)
    p.add_argument("--model", default=None)
    p.add_argument("--data", default=None)
    p.add_argument("--rho", default=None, type=float)
    p.add_argument("--delta", default=None, type=float)

    p = sub.add_parser("lsh", help="random-projection baseline")
    lsh_sub = p.add_subparsers(dest="lsh_command", required=True)

    q = lsh_sub.add_parser("train")
    add_common(q)
    q.add_argument("--data", default=None)
    q.add_argument("--bits", default=None, type=int)
    q.add_argument("--seed", default=None, type=int)
    q.add_argument("--out", default=None)

    q = lsh_sub.add_parser("hash")
    add_common(q)
    q.add_argument("--model", default=None)
    q.add_argument("--data", default=None)
    q.add_argument("--out", default=None)

    q = lsh_sub.add_parser("retrieve")
    add_common(q)
    q.add_argument("--model", default=None)
    q.add_argument("--database", default=None)
    q.add_argument("--queries", default=None)
    q.add_argument("--s-list", default=None)
    q.add_argument("--out", default=None)
    q.add_argument("--no-figure", action="store_true")

    return top


def _load_config_file(path) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        lines = open(path, "r", encoding="utf-8").read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise UsageError(f"config line {line_no}: expected key = value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


class _Resolver:
    """Applies flags > config file > defaults and records the echo."""

    def __init__(self, ns: argparse.Namespace):
        self.ns = ns
        self.cfg = _load_config_file(ns.config) if ns.config else {}
        self.echo: list[tuple[str, object]] = []

    def get(self, name, cast=str, default=None, required=False):
        attr = name.replace("-", "_")
        value = getattr(self.ns, attr, None)
        if value is None and attr in self.cfg:
            raw = self.cfg[attr]
            try:
                value = cast(raw) if cast is not bool else raw.lower() in (
                    "1", "true", "yes", "on",
                )
            except ValueError as exc:
                raise UsageError(f"config value for {name}: {exc}") from exc
        if value is None:
            value = default
        if required and value is None:
            raise UsageError(f"--{name} is required")
        self.echo.append((name, value))
        return value

    def flag(self, name) -> bool:
        attr = name.replace("-", "_")
        value = bool(getattr(self.ns, attr, False))
        if not value and attr in self.cfg:
            value = self.cfg[attr].lower() in ("1", "true", "yes", "on")
        self.echo.append((name, value))
        return value

    def print_echo(self, command: str) -> None:
        print(f"# command = {command}")
        for name, value in self.echo:
            print(f"# {name} = {value}")


def _parse_s_list(text: str) -> list[int]:
    try:
        if ":" in text:
            parts = [int(v) for v in text.split(":")]
            if len(parts) != 3 or parts[2] < 1:
                raise ValueError("expected start:stop:step")
            values = list(range(parts[0], parts[1] + 1, parts[2]))
        else:
            values = [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad --s-list {text!r}: {exc}") from exc
    if not values or min(values) < 1:
        raise UsageError(f"--s-list {text!r} yields no valid sizes")
    return values


def _file_format(res: _Resolver) -> str:
    return res.get("format", str, default="delimited")


def _original_labels(dataset) -> np.ndarray:
    if dataset.unlabeled_indices.size:
        raise HashLearnError("retrieval needs fully labeled database/query files")
    names = np.asarray(dataset.label_names)
    return names[dataset.labels - 1]


def _cmd_train(res: _Resolver) -> int:
    fmt = _file_format(res)
    data_path = res.get("data", required=True)
    bits = res.get("bits", int, required=True)
    c = res.get("c", float, default=1000.0)
    p = res.get("p", float, default=2.0)
    kernel_spec = res.get("kernels", str, default="default")
    mode_key = res.get("mode", str, default="supervised")
    unlabeled_path = res.get("unlabeled", str)
    groups = res.get("groups", int)
    seed = res.get("seed", int, default=0)
    max_iter = res.get("max-iterations", int, default=50)
    tolerance = res.get("tolerance", float, default=1e-4)
    jitter = res.get("jitter", float, default=1e-8)
    threads = res.get("threads", int, default=os.cpu_count() or 1)
    out = res.get("out", required=True)
    res.print_echo("train")

    if mode_key not in _MODES:
        raise UsageError(f"unknown mode {mode_key!r}")
    mode = _MODES[mode_key]
    if unlabeled_path and mode == "supervised":
        raise UsageError("--unlabeled requires --mode semi or transductive")
    try:
        kernels = parse_kernel_spec(kernel_spec)
    except HashLearnError as exc:
        raise UsageError(str(exc)) from exc
    if threads < 1:
        raise UsageError("--threads must be >= 1")

    dataset = load(data_path, format=fmt, n_groups=groups)
    if unlabeled_path:
        dataset = append_unlabeled(dataset, load_features(unlabeled_path, format=fmt))
    if mode == "supervised" and dataset.unlabeled_indices.size:
        raise UsageError("supervised mode forbids unlabeled ('?') samples")

    config = TrainConfig(
        bits=bits,
        regularization=c,
        norm_exponent=p,
        kernels=kernels,
        max_outer_iterations=max_iter,
        tolerance=tolerance,
        seed=seed,
        mode=mode,
        jitter=jitter,
    )
    with open(f"{out}.log", "w", encoding="utf-8") as log:
        state = train_full(dataset, config, threads=threads, log=log)
    save_model(state.model, out)
    print(
        f"trained {bits}-bit model in {state.iterations} iterations: "
        f"surrogate {state.surrogate_history[-1]:.6g}, "
        f"distortion {state.distortion_history[-1]}"
    )
    print(f"model written to {out}, log to {out}.log")
    return 0


def _cmd_hash(res: _Resolver) -> int:
    fmt = _file_format(res)
    model_path = res.get("model", required=True)
    data_path = res.get("data", required=True)
    out = res.get("out", required=True)
    res.print_echo("hash")

    model = load_model(model_path)
    features = load_features(data_path, format=fmt)
    codes, group_ids = hash_and_classify(model, features)
    names = np.asarray(model.label_names)
    write_hash_file(out, codes, names[group_ids - 1])
    print(f"hashed {len(codes)} samples to {out}")
    return 0


def _cmd_retrieve(res: _Resolver) -> int:
    fmt = _file_format(res)
    model_path = res.get("model", required=True)
    database_path = res.get("database", required=True)
    queries_path = res.get("queries", required=True)
    s_text = res.get("s-list", str, default=DEFAULT_S_LIST)
    out = res.get("out", required=True)
    no_figure = res.flag("no-figure")
    res.print_echo("retrieve")

    s_values = _parse_s_list(s_text)
    model = load_model(model_path)
    database = load(database_path, format=fmt)
    queries = load(queries_path, format=fmt)
    if max(s_values) > database.n_samples:
        raise UsageError(
            f"--s-list goes up to {max(s_values)} but the database has "
            f"{database.n_samples} items"
        )
    db_codes = hash_queries(model, database.features)
    q_codes = hash_queries(model, queries.features)
    precisions = precision_at_s(
        q_codes, _original_labels(queries), db_codes, _original_labels(database),
        s_values,
    )
    write_precision_table(out, s_values, precisions)
    if not no_figure:
        render_precision_figure(figure_path(out), s_values, precisions)
    for s, p in zip(s_values, precisions):
        print(f"precision@{s} = {p:.4f}")
    print(f"table written to {out}")
    return 0


def _cmd_eval(res: _Resolver) -> int:
    fmt = _file_format(res)
    model_path = res.get("model", required=True)
    database_path = res.get("database", required=True)
    queries_path = res.get("queries", required=True)
    out = res.get("out", required=True)
    no_figure = res.flag("no-figure")
    res.print_echo("eval")

    model = load_model(model_path)
    database = load(database_path, format=fmt)
    queries = load(queries_path, format=fmt)
    db_codes = hash_queries(model, database.features)
    q_codes = hash_queries(model, queries.features)
    points = pr_curve(
        q_codes, _original_labels(queries), db_codes, _original_labels(database)
    )
    write_pr_table(out, points)
    if not no_figure:
        render_pr_figure(figure_path(out), points)
    shown = {0, model.n_bits // 2, model.n_bits}
    for r, precision, recall in points:
        if int(r) in shown:
            print(f"radius {int(r)}: precision {precision:.4f} recall {recall:.4f}")
    print(f"PR curve over radii 0..{model.n_bits} written to {out}")
    return 0


def _cmd_bound(res: _Resolver) -> int:
    fmt = _file_format(res)
    model_path = res.get("model", required=True)
    data_path = res.get("data", required=True)
    rho = res.get("rho", float, default=1.0)
    delta = res.get("delta", float, default=0.05)
    res.print_echo("bound")

    model = load_model(model_path)
    dataset = load(data_path, format=fmt)
    rep = generalization_bound(model, dataset, rho, delta)
    print(f"rho = {rep.rho}")
    print(f"delta = {rep.delta}")
    print(f"kernel_bound_r = {rep.kernel_bound!r}")
    print(f"norm_sum = {float(rep.bit_norms.sum())!r}")
    print(f"margin_error = {rep.margin_error!r}")
    print(f"complexity_term = {rep.complexity_term!r}")
    print(f"confidence_term = {rep.confidence_term!r}")
    print(f"bound_total = {rep.total!r}")
    return 0


def _cmd_lsh(res: _Resolver, ns: argparse.Namespace) -> int:
    sub = ns.lsh_command
    fmt = _file_format(res)
    if sub == "train":
        data_path = res.get("data", required=True)
        bits = res.get("bits", int, required=True)
        seed = res.get("seed", int, default=0)
        out = res.get("out", required=True)
        res.print_echo("lsh train")
        features = load_features(data_path, format=fmt)
        mean, scale = fit_standardization(features)
        model = with_standardization(
            lsh_train(features.shape[1], bits, seed), mean, scale
        )
        save_lsh_model(model, out)
        print(f"LSH model ({bits} bits) written to {out}")
        return 0
    if sub == "hash":
        model_path = res.get("model", required=True)
        data_path = res.get("data", required=True)
        out = res.get("out", required=True)
        res.print_echo("lsh hash")
        model = load_lsh_model(model_path)
        codes = lsh_hash(model, load_features(data_path, format=fmt))
        write_hash_file(out, codes, ["?"] * len(codes))
        print(f"hashed {len(codes)} samples to {out}")
        return 0
    # retrieve
    model_path = res.get("model", required=True)
    database_path = res.get("database", required=True)
    queries_path = res.get("queries", required=True)
    s_text = res.get("s-list", str, default=DEFAULT_S_LIST)
    out = res.get("out", required=True)
    no_figure = res.flag("no-figure")
    res.print_echo("lsh retrieve")

    s_values = _parse_s_list(s_text)
    model = load_lsh_model(model_path)
    database = load(database_path, format=fmt)
    queries = load(queries_path, format=fmt)
    if max(s_values) > database.n_samples:
        raise UsageError(
            f"--s-list goes up to {max(s_values)} but the database has "
            f"{database.n_samples} items"
        )
    db_codes = lsh_hash(model, database.features)
    q_codes = lsh_hash(model, queries.features)
    precisions = precision_at_s(
        q_codes, _original_labels(queries), db_codes, _original_labels(database),
        s_values,
    )
    write_precision_table(out, s_values, precisions)
    if not no_figure:
        render_precision_figure(figure_path(out), s_values, precisions, label="lsh")
    for s, p in zip(s_values, precisions):
        print(f"precision@{s} = {p:.4f}")
    print(f"table written to {out}")
    return 0


def run(argv: list[str]) -> int:
    """Parse and execute; returns the process exit status."""
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
        res = _Resolver(ns)
        if ns.command == "train":
            return _cmd_train(res)
        if ns.command == "hash":
            return _cmd_hash(res)
        if ns.command == "retrieve":
            return _cmd_retrieve(res)
        if ns.command == "eval":
            return _cmd_eval(res)
        if ns.command == "bound":
            return _cmd_bound(res)
        if ns.command == "lsh":
            return _cmd_lsh(res, ns)
        raise UsageError(f"unknown command {ns.command!r}")
    except UsageError as exc:
        print(f"hashlearn: usage error: {exc}", file=sys.stderr)
        return 1
    except (HashLearnError, OSError) as exc:
        print(f"hashlearn: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
