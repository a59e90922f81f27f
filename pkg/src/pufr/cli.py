"""Command-line surface of the toolkit.

Subcommands: ``rerank`` (one method, one alpha, emits a run file),
``sweep`` (emits a trade-off CSV), ``intervals`` (per-rank interval
intersection CSV), ``laplace`` (features + posterior to run and sigma
files), ``synth`` (writes a full fixture corpus), and ``ttest`` (paired
t-test between two per-query CSVs).

Exit codes: 0 on success, 1 on usage or parse errors, 2 when a
constrained re-ranking instance was infeasible (partial output is still
written).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from . import fileio
from .baselines import (
    DEFAULT_DEPTH,
    ConstraintConfig,
    compute_m_table,
    constrained_rerank,
    fastar_rerank,
    unfair_rank,
)
from .core import QueryCandidates, Ranking, assign_groups
from .metrics import paired_t_test
from .rerank import PufrConfig, compute_sigma_mean, pufr_rerank, uniform_rerank
from .sweep import (
    METHODS,
    SweepConfig,
    records_to_csv,
    report_interval_analysis,
    run_sweep,
    select_best_tradeoff,
)
from .synth import SyntheticConfig, generate_synthetic
from .uncertainty import DEFAULT_MC_SAMPLES, McConfig, score_query

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2


def _alpha_grid(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(tok) for tok in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("alpha grid is empty")
    return values


def _cutoffs(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(tok) for tok in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("cutoff list is empty")
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pufr",
        description="Debias ranked lists post hoc using predictive uncertainty.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_corpus_args(p: argparse.ArgumentParser, need_sigmas: bool = True) -> None:
        p.add_argument("--run", required=True, help="input run file")
        p.add_argument("--sigmas", required=need_sigmas, help="sigma file")
        p.add_argument("--neutrality", required=True, help="neutrality score file")
        p.add_argument(
            "--protected-threshold",
            type=float,
            default=1.0,
            help="neutrality at or above this value marks a doc protected (default 1.0)",
        )

    p = sub.add_parser("rerank", help="re-rank a run with one method at one alpha")
    add_corpus_args(p, need_sigmas=False)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    p.add_argument("--tag", default="pufr")
    p.add_argument("--output", required=True, help="output run file")

    p = sub.add_parser("sweep", help="trade-off sweep over an alpha grid")
    add_corpus_args(p, need_sigmas=False)
    p.add_argument("--qrels", required=True)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--alpha-grid", type=_alpha_grid, required=True)
    p.add_argument("--cutoffs-utility", type=_cutoffs, default=(10, 100))
    p.add_argument("--cutoffs-fairness", type=_cutoffs, default=(10, 50))
    p.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--ndcg-floor",
        type=float,
        default=None,
        help="also report the best-fairness row whose utility meets this floor",
    )
    p.add_argument("--output", required=True, help="output CSV")

    p = sub.add_parser("intervals", help="per-rank median interval intersection counts")
    p.add_argument("--run", required=True)
    p.add_argument("--sigmas", required=True)
    p.add_argument("--alpha-grid", type=_alpha_grid, default=(1.0, 2.0))
    p.add_argument("--output", required=True, help="output CSV")

    p = sub.add_parser("laplace", help="score queries from features and a posterior")
    p.add_argument("--features", required=True)
    p.add_argument("--posterior", required=True)
    p.add_argument("--mc-samples", type=int, default=DEFAULT_MC_SAMPLES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tag", default="laplace")
    p.add_argument("--output", required=True, help="output run file")
    p.add_argument("--sigma-output", required=True, help="output sigma file")

    p = sub.add_parser("synth", help="write a synthetic fixture corpus")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--queries", type=int, default=50)
    p.add_argument("--candidates", type=int, default=20)
    p.add_argument("--score-loc", type=float, default=0.0)
    p.add_argument("--score-spread", type=float, default=2.0)
    p.add_argument("--sigma-loc", type=float, default=0.3)
    p.add_argument("--sigma-spread", type=float, default=0.15)
    p.add_argument("--protected-fraction", type=float, default=0.5)
    p.add_argument("--relevance-correlation", type=float, default=0.7)
    p.add_argument("--bias-strength", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tag", default="synth")

    p = sub.add_parser("ttest", help="paired t-test between two per-query CSVs")
    p.add_argument("--a", required=True, help="CSV of query_id,value")
    p.add_argument("--b", required=True, help="CSV of query_id,value")

    return parser


def _load_corpus(args: argparse.Namespace, need_sigmas: bool) -> list[QueryCandidates]:
    corpus = fileio.parse_run_file(args.run)
    if need_sigmas:
        if not args.sigmas:
            raise ValueError(f"method {args.method!r} needs --sigmas")
        corpus = fileio.attach_sigmas(corpus, fileio.parse_sigma_file(args.sigmas))
    elif args.sigmas:
        corpus = fileio.attach_sigmas(corpus, fileio.parse_sigma_file(args.sigmas))
    corpus = fileio.attach_neutrality(corpus, fileio.parse_neutrality_file(args.neutrality))
    return [assign_groups(q, args.protected_threshold) for q in corpus]


def _cmd_rerank(args: argparse.Namespace) -> int:
    needs_sigma = args.method in ("pufr", "uniform")
    corpus = _load_corpus(args, needs_sigma)
    rankings: list[Ranking] = []
    infeasible = 0
    if args.method == "pufr":
        cfg = PufrConfig.symmetric(args.alpha)
        rankings = [pufr_rerank(q, cfg) for q in corpus]
    elif args.method == "uniform":
        cfg = PufrConfig.symmetric(args.alpha)
        sigma_mean = compute_sigma_mean(corpus)
        rankings = [uniform_rerank(q, sigma_mean, cfg) for q in corpus]
    elif args.method == "unfair":
        rankings = [unfair_rank(q) for q in corpus]
    elif args.method == "fastar":
        table = compute_m_table(max(len(q) for q in corpus), args.alpha)
        rankings = [fastar_rerank(q, table) for q in corpus]
    else:
        ccfg = ConstraintConfig(alpha_fairness=args.alpha, depth=args.depth)
        for q in corpus:
            result = constrained_rerank(q, ccfg)
            rankings.append(result.ranking)
            if not result.feasible:
                infeasible += 1
    fileio.write_run_file(args.output, rankings, tag=args.tag)
    if infeasible:
        print(
            f"warning: fairness floor infeasible for {infeasible} queries",
            file=sys.stderr,
        )
        return EXIT_INFEASIBLE
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    needs_sigma = args.method in ("pufr", "uniform")
    corpus = _load_corpus(args, needs_sigma)
    judgments = fileio.parse_qrels(args.qrels)
    cfg = SweepConfig(
        method=args.method,
        alpha_grid=args.alpha_grid,
        cutoffs_utility=args.cutoffs_utility,
        cutoffs_fairness=args.cutoffs_fairness,
        seed=args.seed,
        depth=args.depth,
    )
    result = run_sweep(corpus, judgments, cfg)
    Path(args.output).write_text(records_to_csv(result.records), encoding="utf-8")
    if args.ndcg_floor is not None:
        best = select_best_tradeoff(
            result.records,
            args.ndcg_floor,
            utility_cutoff=max(args.cutoffs_utility),
            fairness_cutoff=max(args.cutoffs_fairness),
        )
        uc, fc = max(args.cutoffs_utility), max(args.cutoffs_fairness)
        if best is None:
            print(f"no alpha meets ndcg_cut_{uc} >= {args.ndcg_floor}")
        else:
            print(
                f"best under ndcg_cut_{uc} >= {args.ndcg_floor}: "
                f"alpha={best.alpha:g} nfairr{fc}={best.nfairr[fc]:.6f} "
                f"ndcg_cut_{uc}={best.ndcg[uc]:.6f}"
            )
    if result.infeasible_queries:
        print(
            f"warning: fairness floor infeasible for {result.infeasible_queries} "
            f"query re-rankings",
            file=sys.stderr,
        )
        return EXIT_INFEASIBLE
    return EXIT_OK


def _cmd_intervals(args: argparse.Namespace) -> int:
    corpus = fileio.parse_run_file(args.run)
    corpus = fileio.attach_sigmas(corpus, fileio.parse_sigma_file(args.sigmas))
    Path(args.output).write_text(
        report_interval_analysis(corpus, args.alpha_grid), encoding="utf-8"
    )
    return EXIT_OK


def _cmd_laplace(args: argparse.Namespace) -> int:
    features = fileio.parse_features_file(args.features)
    if not features:
        raise ValueError(f"{args.features}: no feature rows")
    posterior = fileio.parse_posterior_file(args.posterior)
    cfg = McConfig(n_samples=args.mc_samples, seed=args.seed)
    corpus = fileio.corpus_from_features(features)
    scored = [score_query(posterior, q, features[q.query_id], cfg) for q in corpus]
    fileio.write_run_file(args.output, [unfair_rank(q) for q in scored], tag=args.tag)
    fileio.write_sigma_file(args.sigma_output, scored)
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    cfg = SyntheticConfig(
        n_queries=args.queries,
        n_candidates=args.candidates,
        score_loc=args.score_loc,
        score_spread=args.score_spread,
        sigma_loc=args.sigma_loc,
        sigma_spread=args.sigma_spread,
        protected_fraction=args.protected_fraction,
        relevance_correlation=args.relevance_correlation,
        bias_strength=args.bias_strength,
        seed=args.seed,
    )
    corpus, judgments = generate_synthetic(cfg)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_run_file(out / "fixture.run", [unfair_rank(q) for q in corpus], tag=args.tag)
    fileio.write_sigma_file(out / "fixture.sigma", corpus)
    fileio.write_neutrality_file(out / "fixture.neutrality", corpus)
    fileio.write_qrels(out / "fixture.qrels", judgments)
    print(f"wrote fixture corpus ({cfg.n_queries} queries) to {out}")
    return EXIT_OK


def _read_per_query_csv(path: str) -> dict[str, float]:
    values: dict[str, float] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = [p.strip() for p in stripped.split(",")]
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'query_id,value'")
        try:
            value = float(parts[1])
        except ValueError:
            if lineno == 1:
                continue  # header row
            raise ValueError(f"{path}:{lineno}: value is not a number: {parts[1]!r}") from None
        if parts[0] in values:
            raise ValueError(f"{path}:{lineno}: duplicate query id {parts[0]!r}")
        values[parts[0]] = value
    if not values:
        raise ValueError(f"{path}: no per-query values")
    return values


def _cmd_ttest(args: argparse.Namespace) -> int:
    a = _read_per_query_csv(args.a)
    b = _read_per_query_csv(args.b)
    result = paired_t_test(a, b)
    print(
        f"t={result.t_statistic:.6g} df={result.degrees_of_freedom} "
        f"p={result.p_value:.6g}"
    )
    return EXIT_OK


_COMMANDS = {
    "rerank": _cmd_rerank,
    "sweep": _cmd_sweep,
    "intervals": _cmd_intervals,
    "laplace": _cmd_laplace,
    "synth": _cmd_synth,
    "ttest": _cmd_ttest,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
