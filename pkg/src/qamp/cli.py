"""Command-line harness.

Subcommands: ``grover``, ``dynamic``, ``recommend``, ``optimize`` and
``experiment steps|accuracy|corollaries``.  A flat key=value config file
(``--config``) mirrors the flags; explicit flags override file entries,
and the ``QAMP_SEED`` environment variable is the fallback seed base.

Exit codes: 0 success, 2 config error, 3 invariant or validity failure,
4 under-amplified / not found.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .core import SelectionMask
from .dynamic_search import default_rounds, run_dynamic
from .errors import (
    ConfigError,
    NoSolutionError,
    QampError,
    UnderAmplifiedError,
    ValidityError,
)
from .experiments import (
    ExperimentConfig,
    experiment_accuracy,
    experiment_corollaries,
    experiment_steps,
)
from .optimize import durr_hoyer, dynamic_optimize, load_objective
from .recommend import (
    SelectionProbabilityParams,
    calibrate_beta,
    load_catalog,
    recommend,
    similarity_policy,
    SimilaritySpec,
)
from .report import write_csv, write_svg
from .static_search import StaticSearchSpec, search

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_NOT_FOUND = 4


def _parse_n_range(text: str) -> tuple[int, int]:
    parts = text.split(":")
    try:
        if len(parts) == 1:
            value = int(parts[0])
            return value, value
        if len(parts) == 2:
            return int(parts[0]), int(parts[1])
    except ValueError:
        pass
    raise ConfigError(f"bad n range {text!r}; expected A:B")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"bad boolean {text!r}")


def _load_config_file(path: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_number}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        entries[key.strip().replace("-", "_")] = value.strip()
    return entries


class _Options:
    """Flag/file/default resolution: explicit flags win, then the file."""

    def __init__(self, ns: argparse.Namespace):
        self.ns = ns
        self.file = _load_config_file(ns.config) if getattr(ns, "config", None) else {}

    def get(self, key: str, parse, default):
        value = getattr(self.ns, key, None)
        if value is not None:
            return value
        if key in self.file:
            return parse(self.file[key])
        return default

    def seed_base(self, default: int = 0) -> int:
        value = self.get("seed_base", int, None)
        if value is not None:
            return value
        env = os.environ.get("QAMP_SEED")
        return int(env) if env else default

    def seed(self, default: int = 0) -> int:
        value = self.get("seed", int, None)
        if value is not None:
            return value
        return self.seed_base(default)


def _similarity_params(opts: _Options, n: int, fallback_target: float) -> SelectionProbabilityParams:
    beta = opts.get("beta", float, None)
    if beta is not None:
        return SelectionProbabilityParams(
            n=n, beta=beta, norm_c=min(2.0**-n, math.exp(-beta * n))
        )
    m_target = opts.get("m_target", float, None)
    return calibrate_beta(n, m_target if m_target is not None else fallback_target)


def _out_dir(opts: _Options) -> Path | None:
    out = opts.get("out", Path, None)
    return Path(out) if out is not None else None


def _fmt(opts: _Options) -> str:
    fmt = opts.get("format", str, "both")
    if fmt not in ("csv", "svg", "both"):
        raise ConfigError(f"format must be csv, svg or both, got {fmt!r}")
    return fmt


def cmd_grover(ns: argparse.Namespace) -> int:
    opts = _Options(ns)
    n = opts.get("n", int, 4)
    seed = opts.seed()
    rng = np.random.default_rng(seed)
    marked_text = opts.get("marked", str, None)
    if marked_text is not None:
        indices = [int(tok) for tok in str(marked_text).split(",") if tok.strip()]
        mask = SelectionMask.from_indices(n, indices)
    else:
        m = opts.get("m", int, 1)
        indices = rng.choice(1 << n, size=m, replace=False)
        mask = SelectionMask.from_indices(n, indices)
    unknown = bool(opts.get("unknown_m", _parse_bool, False))
    spec = StaticSearchSpec(n, mask, m_known=not unknown)
    record = bool(opts.get("trajectory", _parse_bool, False))
    t0 = time.perf_counter()
    result = search(spec, rng, record_trajectory=record and not unknown)
    wall_ms = (time.perf_counter() - t0) * 1e3
    print(f"n={n} marked={mask.count_selected} seed={seed}")
    if result.found:
        print(
            f"outcome={result.outcome} iterations={result.iterations_used} "
            f"success_probability={result.success_probability:.6f}"
        )
    else:
        print(f"not found after {result.iterations_used} iterations (likely no solutions)")

    out = _out_dir(opts)
    if out is not None:
        fmt = _fmt(opts)
        if fmt in ("csv", "both"):
            write_csv(
                out / "grover_run.csv",
                ["experiment", "n", "seed", "marked_count", "outcome",
                 "iterations", "success_probability", "wall_time_ms"],
                [("grover", n, seed, mask.count_selected,
                  result.outcome if result.found else "", result.iterations_used,
                  result.success_probability, wall_ms)],
            )
            if result.trajectory:
                write_csv(
                    out / "grover_trajectory.csv",
                    ["experiment", "n", "seed", "iteration", "marked_probability"],
                    [("grover", n, seed, i + 1, p) for i, p in enumerate(result.trajectory)],
                )
        if fmt in ("svg", "both") and result.trajectory:
            ks = list(range(1, len(result.trajectory) + 1))
            write_svg(
                out / "grover_trajectory.svg",
                "Marked-set probability per iteration",
                "iteration",
                "probability",
                [("marked probability", ks, list(result.trajectory))],
            )
    return EXIT_OK if result.found else EXIT_NOT_FOUND


def cmd_dynamic(ns: argparse.Namespace) -> int:
    opts = _Options(ns)
    n = opts.get("n", int, 10)
    reference = opts.get("reference", int, 0)
    seed = opts.seed()
    rng = np.random.default_rng(seed)
    spec = SimilaritySpec(n, reference)
    params = _similarity_params(opts, n, fallback_target=float(n + 1))
    policy = similarity_policy(spec, params)
    rounds = opts.get("rounds", int, None)
    if rounds is None:
        rounds = default_rounds(n, policy)
    strict = bool(opts.get("strict_validity", _parse_bool, False))
    t0 = time.perf_counter()
    try:
        _, log = run_dynamic(
            n, policy, rng, rounds=rounds,
            on_violation="abort" if strict else "restart",
        )
    except ValidityError as err:
        print(f"validity failure: {err}", file=sys.stderr)
        return EXIT_INVARIANT
    wall_ms = (time.perf_counter() - t0) * 1e3

    print(f"n={n} reference={reference} beta={params.beta:.6f} rounds={log.rounds} seed={seed}")
    if log.restart_rounds:
        print(f"restarts at rounds: {', '.join(str(r) for r in log.restart_rounds)}")
    print(f"{'round':>5} {'N_s':>6} {'p_selected':>11} {'gain':>12} {'mean_amp':>12}")
    for i, report in enumerate(log.gain_trajectory):
        print(
            f"{i + 1:>5} {report.ns_actual:>6} {report.p_selected:>11.6f} "
            f"{report.gain:>12.6g} {report.mean_amplitude:>12.4e}"
        )

    out = _out_dir(opts)
    if out is not None:
        fmt = _fmt(opts)
        rows = [
            ("dynamic", n, seed, i + 1, r.ns_actual, r.p_selected, r.p_unselected,
             r.gain, r.mean_amplitude, r.min_unselected_amp)
            for i, r in enumerate(log.gain_trajectory)
        ]
        if fmt in ("csv", "both"):
            write_csv(
                out / "dynamic_rounds.csv",
                ["experiment", "n", "seed", "round", "n_selected", "p_selected",
                 "p_unselected", "gain", "mean_amplitude", "min_unselected_amp"],
                rows,
            )
            write_csv(
                out / "dynamic_summary.csv",
                ["experiment", "n", "seed", "rounds", "inner_iterations", "wall_time_ms"],
                [("dynamic", n, seed, log.rounds, 2 * log.rounds, wall_ms)],
            )
        if fmt in ("svg", "both") and log.rounds:
            ks = list(range(1, log.rounds + 1))
            write_svg(
                out / "dynamic_gain.svg",
                "Selected mass per round",
                "round",
                "probability",
                [("selected mass", ks, [r.p_selected for r in log.gain_trajectory])],
            )
    return EXIT_OK


def cmd_recommend(ns: argparse.Namespace) -> int:
    opts = _Options(ns)
    n = opts.get("n", int, 10)
    reference = opts.get("reference", int, 0)
    m = opts.get("m", int, 5)
    seed = opts.seed()
    rng = np.random.default_rng(seed)
    spec = SimilaritySpec(n, reference)
    params = _similarity_params(opts, n, fallback_target=float(max(1, m)))
    catalog_path = opts.get("catalog", str, None)
    catalog = load_catalog(catalog_path, n) if catalog_path else None
    t0 = time.perf_counter()
    result = recommend(spec, m, params, rng, catalog=catalog)
    wall_ms = (time.perf_counter() - t0) * 1e3

    print(f"n={n} reference={reference} m={m} beta={params.beta:.6f} seed={seed}")
    print(f"rounds_used={result.rounds_used}")
    print(f"{'index':>7} {'bits':>{n + 2}} {'similarity':>11}")
    for item in result.items:
        print(f"{item.index:>7} {item.index:>0{n}b}   {item.similarity:>9}")
    log = result.log
    if log is not None and log.rounds:
        gains = ", ".join(f"{r.gain:.3g}" for r in log.gain_trajectory)
        print(f"gain trajectory: {gains}")

    out = _out_dir(opts)
    if out is not None:
        fmt = _fmt(opts)
        if fmt in ("csv", "both"):
            write_csv(
                out / "recommend_items.csv",
                ["experiment", "n", "seed", "index", "similarity"],
                [("recommend", n, seed, item.index, item.similarity) for item in result.items],
            )
            write_csv(
                out / "recommend_classes.csv",
                ["experiment", "n", "seed", "S", "probability"],
                [("recommend", n, seed, s, float(p))
                 for s, p in enumerate(result.per_similarity_sampling)],
            )
            if log is not None:
                write_csv(
                    out / "recommend_rounds.csv",
                    ["experiment", "n", "seed", "round", "n_selected", "p_selected", "gain"],
                    [("recommend", n, seed, i + 1, r.ns_actual, r.p_selected, r.gain)
                     for i, r in enumerate(log.gain_trajectory)],
                )
            write_csv(
                out / "recommend_summary.csv",
                ["experiment", "n", "seed", "m", "rounds_used", "inner_iterations", "wall_time_ms"],
                [("recommend", n, seed, m, result.rounds_used, 2 * result.rounds_used, wall_ms)],
            )
        if fmt in ("svg", "both"):
            ss = list(range(n + 1))
            write_svg(
                out / "recommend_classes.svg",
                "Sampling probability by similarity class",
                "similarity S",
                "class probability",
                [("dynamic", ss, [float(p) for p in result.per_similarity_sampling])],
            )
    return EXIT_OK


def cmd_optimize(ns: argparse.Namespace) -> int:
    opts = _Options(ns)
    objective = opts.get("objective", str, None)
    if not objective:
        raise ConfigError("optimize requires --objective <path>")
    table = load_objective(objective)
    method = opts.get("method", str, "durr-hoyer")
    if method not in ("durr-hoyer", "dynamic"):
        raise ConfigError(f"method must be durr-hoyer or dynamic, got {method!r}")
    seed = opts.seed()
    rng = np.random.default_rng(seed)
    flat = bool(np.all(table.values == table.values[0]))

    t0 = time.perf_counter()
    if method == "durr-hoyer":
        result, rounds = durr_hoyer(table, rng, record_rounds=True)
    else:
        result, rounds = dynamic_optimize(table, rng), None
    wall_ms = (time.perf_counter() - t0) * 1e3

    print(f"objective n={table.n} sense={table.sense.value} method={method} seed={seed}")
    if flat and method == "dynamic":
        print("flat objective: every state is optimal; returning a uniform sample")
    print(
        f"best_index={result.best_index} best_value={result.best_value!r} "
        f"iterations={result.grover_iterations_total} rounds={result.outer_rounds} "
        f"optimal={result.optimal}"
    )
    if rounds:
        chain = " -> ".join(
            f"{r.incumbent_before}({r.marked_count} better)" for r in rounds
        )
        print(f"threshold rounds: {chain}")
    elif result.log is not None and result.log.rounds:
        gains = ", ".join(f"{r.gain:.3g}" for r in result.log.gain_trajectory)
        print(f"gain trajectory: {gains}")

    out = _out_dir(opts)
    if out is not None and _fmt(opts) in ("csv", "both"):
        write_csv(
            out / "optimize_summary.csv",
            ["experiment", "method", "n", "seed", "best_index", "best_value",
             "iterations", "outer_rounds", "optimal", "wall_time_ms"],
            [("optimize", method, table.n, seed, result.best_index, result.best_value,
              result.grover_iterations_total, result.outer_rounds, result.optimal, wall_ms)],
        )
        if rounds:
            write_csv(
                out / "optimize_rounds.csv",
                ["experiment", "n", "seed", "round", "incumbent", "marked_count",
                 "found", "iterations"],
                [("optimize", table.n, seed, i + 1, r.incumbent_before, r.marked_count,
                  r.found if r.found is not None else "", r.iterations)
                 for i, r in enumerate(rounds)],
            )
    return EXIT_OK


def cmd_experiment(ns: argparse.Namespace) -> int:
    opts = _Options(ns)
    config = ExperimentConfig(
        experiment=ns.which,
        n=opts.get("n", int, None),
        n_range=opts.get("n_range", _parse_n_range, (10, 14)),
        seeds=opts.get("seeds", int, 20),
        seed_base=opts.seed_base(0),
        beta=opts.get("beta", float, None),
        m_target=opts.get("m_target", float, None),
        threshold=opts.get("threshold", int, None),
        reference=opts.get("reference", int, 0),
        output_dir=Path(opts.get("out", Path, Path("out"))),
        fmt=_fmt(opts),
        inject_fault=bool(opts.get("inject_fault", _parse_bool, False)),
    )
    if ns.which == "steps":
        outcome = experiment_steps(config)
        print("n static_steps dynamic_rounds dynamic_inner_iterations")
        for row in outcome.rows:
            print(f"{row.n} {row.static_steps:g} {row.dynamic_rounds:g} "
                  f"{row.dynamic_inner_iterations:g}")
        for path in outcome.files:
            print(f"wrote {path}")
        return EXIT_OK
    if ns.which == "accuracy":
        outcome = experiment_accuracy(config)
        print("S p_static p_dynamic")
        for s in range(outcome.n + 1):
            print(f"{s} {outcome.p_static[s]:.6g} {outcome.p_dynamic[s]:.6g}")
        for path in outcome.files:
            print(f"wrote {path}")
        return EXIT_OK
    report = experiment_corollaries(config)
    print(f"{'check':<32} {'n':>3} {'trials':>6} {'max_deviation':>14} {'tolerance':>10} passed")
    for r in report.results:
        print(f"{r.check:<32} {r.n:>3} {r.trials:>6} {r.max_deviation:>14.3e} "
              f"{r.tolerance:>10.1e} {r.passed}")
    for path in report.files:
        print(f"wrote {path}")
    if not report.passed:
        failed = [r.check for r in report.results if not r.passed]
        print(f"FAILED checks: {', '.join(sorted(set(failed)))}", file=sys.stderr)
        return EXIT_INVARIANT
    print("all checks passed")
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file; flags override")
    parser.add_argument("--out", type=Path, help="output directory for CSV/SVG")
    parser.add_argument("--format", choices=["csv", "svg", "both"], dest="format")
    parser.add_argument("--seed", type=int, help="seed for single-run commands")
    parser.add_argument("--seed-base", type=int, dest="seed_base")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qamp",
        description="Amplitude-amplification simulator: search, recommendation, "
                    "optimization and seeded experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grover", help="fixed-mask search")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int, help="number of random marked states")
    p.add_argument("--marked", help="comma-separated marked indices (overrides --m)")
    p.add_argument("--unknown-m", action="store_true", default=None, dest="unknown_m",
                   help="use the unknown-count schedule")
    p.add_argument("--trajectory", action="store_true", default=None,
                   help="record per-iteration marked probability")
    _add_common(p)
    p.set_defaults(func=cmd_grover)

    p = sub.add_parser("dynamic", help="probabilistic-mask amplification run")
    p.add_argument("--n", type=int)
    p.add_argument("--reference", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--m-target", type=float, dest="m_target")
    p.add_argument("--rounds", type=int)
    p.add_argument("--strict-validity", action="store_true", default=None,
                   dest="strict_validity", help="abort on progress-condition violations")
    _add_common(p)
    p.set_defaults(func=cmd_dynamic)

    p = sub.add_parser("recommend", help="similarity recommendation")
    p.add_argument("--n", type=int)
    p.add_argument("--reference", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--m-target", type=float, dest="m_target")
    p.add_argument("--beta", type=float)
    p.add_argument("--catalog", help="catalog file: one item per line")
    _add_common(p)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("optimize", help="objective optimization")
    p.add_argument("--objective", help="objective table file")
    p.add_argument("--method", choices=["durr-hoyer", "dynamic"])
    _add_common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("experiment", help="seeded experiment sweeps")
    p.add_argument("which", choices=["steps", "accuracy", "corollaries"])
    p.add_argument("--n", type=int)
    p.add_argument("--n-range", type=_parse_n_range, dest="n_range")
    p.add_argument("--seeds", type=int)
    p.add_argument("--m-target", type=float, dest="m_target")
    p.add_argument("--beta", type=float)
    p.add_argument("--threshold", type=int)
    p.add_argument("--reference", type=int)
    p.add_argument("--inject-fault", action="store_true", default=None, dest="inject_fault",
                   help="skip the second inner iteration in the ordering check")
    _add_common(p)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UnderAmplifiedError, NoSolutionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except ValidityError as exc:
        print(f"validity failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except QampError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
