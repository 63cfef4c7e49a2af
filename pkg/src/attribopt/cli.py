"""Command-line interface: synthesize data, run backtest grids, summarize.

Exit codes: 0 success, 2 input or validation error, 3 a backtest produced no
feasible day (every day fell back), 4 internal failure.

The backtest command writes one directory per (strategy, alpha) run plus a
benchmark directory, top-level risk and no-solution tables, and a manifest
echoing the full configuration with input digests.  Re-running the same
command on the same inputs reproduces every numeric artifact byte for byte;
only the manifest's timestamp and wall-clock fields differ.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import shutil
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .backtest import BacktestConfig, BacktestResult, benchmark_series, run_backtest
from .market_data import (
    DataError,
    RiskFreeSeries,
    default_partition,
    load_partition_json,
    load_price_csv,
    load_riskfree_csv,
    synthesize_panel,
    to_log_returns,
)
from .risk import moving_frame, moving_window_metrics, summarize
from .strategies import STRATEGY_IDS, StrategySpec

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ALL_FALLBACK = 3
EXIT_INTERNAL = 4

# Attribution effects summarized by attrib-stats, with the zero band |x| <= ZERO_TOL.
STATS_EFFECTS = (
    "allocation_total",
    "selection_total",
    "interaction_total",
    "combined_selection_total",
)
ZERO_TOL = 1e-10


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _parse_strategies(text: str) -> list[str]:
    names = [part.strip() for part in text.split(",") if part.strip()]
    if not names:
        raise DataError("no strategies given")
    unknown = [n for n in names if n not in STRATEGY_IDS]
    if unknown:
        raise DataError(f"unknown strategies {unknown}; choose from {list(STRATEGY_IDS)}")
    seen: list[str] = []
    for n in names:
        if n not in seen:
            seen.append(n)
    return seen


def _parse_alphas(text: str) -> list[float]:
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        alpha = float(part)
        if not 0.0 < alpha < 1.0:
            raise DataError(f"alpha {alpha} must lie strictly between 0 and 1")
        if alpha not in values:
            values.append(alpha)
    if not values:
        raise DataError("no alpha levels given")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attribopt",
        description="Tail-loss portfolio optimization under attribution constraints",
    )
    parser.add_argument("--version", action="version", version=f"attribopt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="write a synthetic price panel and fixtures")
    synth.add_argument("--assets", type=int, default=29)
    synth.add_argument("--days", type=int, default=3240, help="price rows to generate")
    synth.add_argument("--seed", type=int, default=42)
    synth.add_argument("--classes", type=int, default=6)
    synth.add_argument("--out", required=True, help="output directory")
    synth.set_defaults(handler=cmd_synth)

    backtest = sub.add_parser("backtest", help="run a strategy grid over a price panel")
    backtest.add_argument("--prices", required=True, help="close-price CSV")
    backtest.add_argument("--partition", required=True, help="class partition JSON")
    backtest.add_argument("--riskfree", default=None, help="annual-percent yield CSV")
    backtest.add_argument(
        "--strategies", default=",".join(STRATEGY_IDS), help="comma list, e.g. P0,P2,P7"
    )
    backtest.add_argument("--alphas", default="0.95,0.99", help="comma list of tail levels")
    backtest.add_argument("--window", type=int, default=1008)
    backtest.add_argument("--out", required=True, help="output directory")
    backtest.add_argument("--seed", type=int, default=None, help="echoed into the manifest")
    backtest.add_argument("--aa-min", type=float, default=0.0)
    backtest.add_argument("--aa-max", type=float, default=math.inf)
    backtest.add_argument("--se-min", type=float, default=0.0)
    backtest.add_argument("--se-max", type=float, default=math.inf)
    backtest.add_argument("--cse-min", type=float, default=0.0)
    backtest.add_argument("--cse-max", type=float, default=math.inf)
    backtest.add_argument("--rachev-alpha", type=float, default=0.95)
    backtest.add_argument("--rachev-beta", type=float, default=0.95)
    backtest.add_argument(
        "--mw-window", type=int, default=None, help="emit moving-window risk at this window"
    )
    backtest.add_argument("--jobs", type=int, default=1, help="concurrent runs")
    backtest.set_defaults(handler=cmd_backtest)

    stats = sub.add_parser("attrib-stats", help="distribution summary of attribution runs")
    stats.add_argument("runs", nargs="+", help="run directories holding attribution.csv")
    stats.add_argument("--out", required=True, help="output CSV path")
    stats.set_defaults(handler=cmd_attrib_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.handler(args)
    except (DataError, FileNotFoundError, IsADirectoryError, ValueError) as exc:
        logger.error("input error: %s", exc)
        return EXIT_INPUT
    except Exception:
        logger.exception("internal error")
        return EXIT_INTERNAL


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    panel = synthesize_panel(args.assets, args.days, args.seed)
    partition = default_partition(args.assets, args.classes)

    frame = panel.to_frame()
    frame.index = panel.dates.strftime("%Y-%m-%d")
    frame.index.name = "date"
    frame.to_csv(out / "prices.csv")

    with open(out / "partition.json", "w") as handle:
        json.dump(partition.to_mapping(panel.tickers), handle, indent=2, sort_keys=True)
        handle.write("\n")

    # Deterministic slow-moving annual yield, about two percent.
    t = np.arange(args.days)
    yields = 2.0 + 0.5 * np.sin(2.0 * np.pi * t / 504.0)
    rf = pd.DataFrame(
        {"annual_yield_percent": yields}, index=panel.dates.strftime("%Y-%m-%d")
    )
    rf.index.name = "date"
    rf.to_csv(out / "riskfree.csv")

    logger.info("wrote %s, %s, %s", out / "prices.csv", out / "partition.json", out / "riskfree.csv")
    return EXIT_OK


# ---------------------------------------------------------------------------
# backtest
# ---------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _risk_block(
    result: BacktestResult,
    risk_free: RiskFreeSeries | float,
    alpha: float,
    beta: float,
) -> dict:
    """Risk measures with degenerate cases reported as null, not crashes."""
    block: dict[str, float | None] = {"rachev_alpha": alpha, "rachev_beta": beta}
    summary = summarize(result, risk_free, alpha=alpha, beta=beta)
    block["max_drawdown"] = summary.max_drawdown
    block["sharpe"] = None if math.isnan(summary.sharpe) else summary.sharpe
    block["rachev"] = None if math.isnan(summary.rachev) else summary.rachev
    return block


def _write_run(
    result: BacktestResult,
    risk_free: RiskFreeSeries | float,
    run_dir: Path,
    rachev_alpha: float,
    rachev_beta: float,
    mw_window: int | None,
) -> dict:
    run_dir.mkdir(parents=True, exist_ok=True)
    result.weights_frame().to_csv(run_dir / "weights.csv")
    result.series_frame().to_csv(run_dir / "series.csv")
    result.attribution_frame().to_csv(run_dir / "attribution.csv")

    risk = _risk_block(result, risk_free, rachev_alpha, rachev_beta)
    summary = {
        "run": result.label,
        "strategy": result.strategy.strategy if result.strategy else "benchmark",
        "alpha": result.strategy.alpha if result.strategy else None,
        "window": result.config.window,
        "n_days": result.n_days,
        "start": str(result.dates[0].date()),
        "end": str(result.dates[-1].date()),
        "n_fallback": int(result.fallback_mask.sum()),
        "no_solution_rate": result.no_solution_rate,
        "final_cumulative_price": float(result.cumulative[-1]),
        "mean_aggregation_error": float(result.aggregation_error.mean()),
        "risk": risk,
    }
    with open(run_dir / "summary.json", "w") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")

    artifacts = ["weights.csv", "series.csv", "attribution.csv", "summary.json"]
    if mw_window is not None and 1 <= mw_window <= result.n_days:
        frame = moving_frame(
            moving_window_metrics(
                result, risk_free, window=mw_window, alpha=rachev_alpha, beta=rachev_beta
            )
        )
        frame.to_csv(run_dir / "moving_risk.csv")
        artifacts.append("moving_risk.csv")
    return {"summary": summary, "artifacts": artifacts}


def _execute_run(payload: tuple) -> dict:
    """One (strategy, alpha) backtest; top-level so process pools can use it."""
    returns, partition, spec, config, risk_free, run_dir, rachev_a, rachev_b, mw = payload
    started = time.perf_counter()
    result = run_backtest(returns, partition, spec, config)
    wall = time.perf_counter() - started
    written = _write_run(result, risk_free, run_dir, rachev_a, rachev_b, mw)
    written["wall_seconds"] = wall
    written["dir"] = run_dir.name
    return written


def cmd_backtest(args: argparse.Namespace) -> int:
    prices_path = Path(args.prices)
    partition_path = Path(args.partition)
    panel = load_price_csv(prices_path)
    partition = load_partition_json(partition_path, panel.tickers)
    returns = to_log_returns(panel)

    risk_free: RiskFreeSeries | float = 0.0
    riskfree_path = None
    if args.riskfree:
        riskfree_path = Path(args.riskfree)
        risk_free = load_riskfree_csv(riskfree_path)

    strategies = _parse_strategies(args.strategies)
    alphas = _parse_alphas(args.alphas)
    if args.window >= returns.n_days:
        raise DataError(
            f"window {args.window} leaves no evaluated days "
            f"(panel has {returns.n_days} return days)"
        )
    config = BacktestConfig(window=args.window)
    bounds = {
        "allocation_bounds": (args.aa_min, args.aa_max),
        "selection_bounds": (args.se_min, args.se_max),
        "combined_bounds": (args.cse_min, args.cse_max),
    }
    specs = [
        StrategySpec(strategy=sid, alpha=alpha, **bounds)
        for sid in strategies
        for alpha in alphas
    ]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []
    try:
        payloads = []
        for spec in specs:
            run_dir = out / f"{spec.strategy}_a{spec.alpha:g}"
            created.append(run_dir)
            payloads.append(
                (
                    returns,
                    partition,
                    spec,
                    config,
                    risk_free,
                    run_dir,
                    args.rachev_alpha,
                    args.rachev_beta,
                    args.mw_window,
                )
            )

        jobs = max(1, args.jobs)
        if jobs == 1 or len(payloads) <= 1:
            rows = [_execute_run(p) for p in payloads]
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(_execute_run, payloads))

        bench_dir = out / "benchmark"
        created.append(bench_dir)
        started = time.perf_counter()
        bench = benchmark_series(returns, partition, config.initial_price, skip=args.window)
        bench_row = _write_run(
            bench, risk_free, bench_dir, args.rachev_alpha, args.rachev_beta, args.mw_window
        )
        bench_row["wall_seconds"] = time.perf_counter() - started
        bench_row["dir"] = bench_dir.name
        rows = [bench_row] + rows

        table = pd.DataFrame(
            [
                {
                    "run": row["summary"]["run"],
                    "strategy": row["summary"]["strategy"],
                    "alpha": row["summary"]["alpha"],
                    "max_drawdown": row["summary"]["risk"]["max_drawdown"],
                    "sharpe": row["summary"]["risk"]["sharpe"],
                    "rachev": row["summary"]["risk"]["rachev"],
                }
                for row in rows
            ]
        )
        risk_table = out / "risk_table.csv"
        created.append(risk_table)
        table.to_csv(risk_table, index=False)

        rates = pd.DataFrame(
            [
                {
                    "run": row["summary"]["run"],
                    "n_days": row["summary"]["n_days"],
                    "n_fallback": row["summary"]["n_fallback"],
                    "no_solution_rate": row["summary"]["no_solution_rate"],
                }
                for row in rows
            ]
        )
        rates_table = out / "no_solution_rates.csv"
        created.append(rates_table)
        rates.to_csv(rates_table, index=False)

        mw_path = None
        if args.mw_window is not None:
            blocks = []
            for row in rows:
                if "moving_risk.csv" not in row["artifacts"]:
                    continue
                frame = pd.read_csv(out / row["dir"] / "moving_risk.csv", index_col="date")
                frame.columns = [f"{row['summary']['run']}_{c}" for c in frame.columns]
                blocks.append(frame)
            if blocks:
                mw_path = out / "moving_risk.csv"
                created.append(mw_path)
                pd.concat(blocks, axis=1).to_csv(mw_path)

        manifest = {
            "package": "attribopt",
            "version": __version__,
            "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "command": "backtest",
            "inputs": {
                "prices": {"path": str(prices_path), "sha256": _sha256(prices_path)},
                "partition": {"path": str(partition_path), "sha256": _sha256(partition_path)},
                "riskfree": (
                    {"path": str(riskfree_path), "sha256": _sha256(riskfree_path)}
                    if riskfree_path
                    else None
                ),
            },
            "parameters": {
                "strategies": strategies,
                "alphas": alphas,
                "window": args.window,
                "initial_price": config.initial_price,
                "allocation_bounds": list(bounds["allocation_bounds"]),
                "selection_bounds": list(bounds["selection_bounds"]),
                "combined_bounds": list(bounds["combined_bounds"]),
                "rachev_alpha": args.rachev_alpha,
                "rachev_beta": args.rachev_beta,
                "mw_window": args.mw_window,
                "seed": args.seed,
                "jobs": args.jobs,
            },
            "environment": {
                "python": sys.version.split()[0],
                "numpy": np.__version__,
                "pandas": pd.__version__,
            },
            "runs": [
                {
                    "run": row["summary"]["run"],
                    "dir": row["dir"],
                    "artifacts": row["artifacts"],
                    "wall_seconds": row["wall_seconds"],
                    "n_days": row["summary"]["n_days"],
                    "no_solution_rate": row["summary"]["no_solution_rate"],
                }
                for row in rows
            ],
        }
        manifest_path = out / "manifest.json"
        created.append(manifest_path)
        with open(manifest_path, "w") as handle:
            json.dump(manifest, handle, indent=2, sort_keys=True)
            handle.write("\n")
    except BaseException:
        for path in created:
            if path.is_dir():
                shutil.rmtree(path, ignore_errors=True)
            elif path.exists():
                path.unlink()
        raise

    dead = [r["summary"]["run"] for r in rows if r["summary"]["no_solution_rate"] >= 1.0]
    if dead:
        logger.error("no feasible day in: %s", ", ".join(dead))
        return EXIT_ALL_FALLBACK
    return EXIT_OK


# ---------------------------------------------------------------------------
# attrib-stats
# ---------------------------------------------------------------------------


def _effect_stats(values: np.ndarray) -> dict[str, float]:
    q1, median, q3 = np.percentile(values, [25.0, 50.0, 75.0])
    zero = np.abs(values) <= ZERO_TOL
    return {
        "min": float(values.min()),
        "q1": float(q1),
        "median": float(median),
        "q3": float(q3),
        "max": float(values.max()),
        "pct_negative": float(100.0 * np.mean(values < -ZERO_TOL)),
        "pct_zero": float(100.0 * zero.mean()),
        "pct_positive": float(100.0 * np.mean(values > ZERO_TOL)),
    }


def cmd_attrib_stats(args: argparse.Namespace) -> int:
    rows = []
    for run in args.runs:
        run_dir = Path(run)
        table_path = run_dir / "attribution.csv"
        if not table_path.exists():
            raise DataError(f"{run_dir} holds no attribution.csv")
        frame = pd.read_csv(table_path)
        missing = [c for c in STATS_EFFECTS if c not in frame.columns]
        if missing:
            raise DataError(f"{table_path} lacks columns {missing}")
        label = run_dir.name
        summary_path = run_dir / "summary.json"
        if summary_path.exists():
            with open(summary_path) as handle:
                label = json.load(handle).get("run", label)
        for effect in STATS_EFFECTS:
            row = {"run": label, "effect": effect, "n_days": len(frame)}
            row.update(_effect_stats(frame[effect].to_numpy(dtype=np.float64)))
            rows.append(row)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows).to_csv(out, index=False)
    logger.info("wrote %s", out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
