"""Command-line entry point: ``knockout-eval {run,report,simulate,cache}``."""

from __future__ import annotations

import argparse
import logging
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .cache import CachedBackend, ResponseCache
from .data import DEFAULT_MT_LANGUAGES, file_digest, read_dataset
from .errors import KnockoutEvalError, UnscorableResponse
from .judges import Judge, JudgeConfig, build_backend
from .metrics import Grouping
from .models import AssessmentResult, EvaluationItem, Method
from .prompts import load_templates, template_hashes
from .reporting import REPORT_FORMATS, atomic_write, build_report, dumps, load_run, write_report, write_run_outputs
from .simulate import SimConfig, run_simulation
from .tournament import EngineConfig, run_assessment

logger = logging.getLogger("knockout_eval")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_PARTIAL = 2


@dataclass
class RunConfig:
    dataset: Path
    format: str
    method: Method
    judge: JudgeConfig
    seed: int
    out: Path
    parallel: int = 1
    prompt_dir: Path | None = None
    parse_retries: int = 2
    cache_dir: Path | None = None
    allowed_languages: tuple[str, ...] = tuple(sorted(DEFAULT_MT_LANGUAGES))
    report_formats: tuple[str, ...] = field(default_factory=tuple)


def _check_writable(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(dir=out, prefix=".probe-"):
        pass


def cmd_run(config: RunConfig) -> int:
    try:
        _check_writable(config.out)
    except OSError as exc:
        print(f"error: output directory {config.out} is not writable: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    try:
        dataset = read_dataset(config.dataset, config.format, config.allowed_languages)
        templates = load_templates(config.prompt_dir)
    except (KnockoutEvalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE

    inner = build_backend(config.judge)
    backend = inner
    if config.cache_dir is not None:
        backend = CachedBackend(inner, ResponseCache(config.cache_dir))
    judge = Judge(backend, templates, config.parse_retries)
    # matches of one round run concurrently up to the backend's in-flight cap
    engine = EngineConfig(method=config.method, seed=config.seed, max_parse_retries=config.parse_retries,
                          match_workers=config.judge.max_in_flight)

    failed: list[dict] = []

    def assess(item: EvaluationItem) -> AssessmentResult | None:
        try:
            return run_assessment(item, judge, engine)
        except UnscorableResponse as exc:
            logger.error("item %s could not be scored: %s", item.id, exc)
            failed.append({"item_id": item.id, "error": str(exc), "raw_texts": exc.raw_texts})
            return exc.partial_result

    try:
        if config.parallel > 1:
            with ThreadPoolExecutor(max_workers=config.parallel) as pool:
                outcomes = list(pool.map(assess, dataset.items))
        else:
            outcomes = []
            for k, item in enumerate(dataset.items, 1):
                outcomes.append(assess(item))
                print(f"\r[{k}/{len(dataset.items)}] {item.id}", end="", file=sys.stderr)
            if dataset.items:
                print(file=sys.stderr)
    except KnockoutEvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    finally:
        if hasattr(inner, "close"):
            inner.close()

    results = [r for r in outcomes if r is not None]
    failed.sort(key=lambda f: f["item_id"])
    items = {it.id: it for it in dataset.items}
    manifest = {
        "tool_version": __version__,
        "method": config.method.value,
        "seed": config.seed,
        "model_id": config.judge.model_id,
        "backend": config.judge.backend,
        "dataset": {"name": config.dataset.name, "format": config.format, "sha256": file_digest(config.dataset),
                    "items": len(dataset.items), "rows_dropped": dataset.rows_dropped,
                    "duplicates_removed": dataset.duplicates_removed},
        "config": {
            "judge": {k: v for k, v in asdict(config.judge).items() if k != "endpoint_url"},
            "parse_retries": config.parse_retries,
            "parallel": config.parallel,
        },
        "template_hashes": template_hashes(templates),
        "judge_call_count": sum(r.judge_call_count for r in results),
        "backend_calls": getattr(inner, "calls", None),
        "cache": None if not isinstance(backend, CachedBackend) else {
            "hits": backend.hits, "misses": backend.misses, "hit_rate": backend.hit_rate,
        },
        "matches": sum(len(r.matches) for r in results),
        "unscorable_items": failed,
    }
    write_run_outputs(config.out, results, items, manifest)
    if config.report_formats:
        run = load_run(config.out, items)
        report = build_report([run], dataset.items, dataset_info=manifest["dataset"])
        write_report(report, config.out, config.report_formats)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_report(results_dirs: list[Path], dataset_path: Path, fmt: str, out: Path,
               groupings: list[Grouping] | None = None, formats=REPORT_FORMATS,
               allowed_languages=DEFAULT_MT_LANGUAGES) -> int:
    try:
        dataset = read_dataset(dataset_path, fmt, allowed_languages)
        items = {it.id: it for it in dataset.items}
        runs = [load_run(d, items) for d in results_dirs]
        info = {"name": dataset_path.name, "format": fmt, "sha256": file_digest(dataset_path)}
        report = build_report(runs, dataset.items, groupings, dataset_info=info)
        write_report(report, out, formats)
    except (KnockoutEvalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def simulation_report(config: SimConfig) -> dict:
    summaries = run_simulation(config)
    doc = {
        "config": {**asdict(config), "methods": [m.value for m in config.methods],
                   "latent_low": config.low, "latent_high": config.high},
        "methods": [s.to_dict() for s in summaries],
    }
    by_method = {s.method: s.mean_r for s in summaries}
    ko, naive = by_method.get(Method.KNOCKOUT), by_method.get(Method.NAIVE_PAIRWISE)
    if ko is not None and naive is not None:
        doc["knockout_minus_naive_pairwise"] = ko - naive
    return doc


def simulation_markdown(doc: dict) -> str:
    c = doc["config"]
    lines = [
        "# Simulated judge comparison", "",
        f"N={c['n_answers']} answers, trials={c['trials']}, sigma={c['sigma']}, bias={c['bias']}, "
        f"max_points={c['max_points']}, latents={c['latent_dist']}[{c['latent_low']}, {c['latent_high']}], seed={c['seed']}",
        "", "| Method | Mean Pearson | Trials | Excluded | Judge calls / item |", "|---|---|---|---|---|",
    ]
    for m in doc["methods"]:
        r = "n/a" if m["mean_pearson"] is None else repr(m["mean_pearson"])
        lines.append(f"| {m['method']} | {r} | {m['trials_defined']} | {m['trials_excluded']} | {m['mean_judge_calls']!r} |")
    if "knockout_minus_naive_pairwise" in doc:
        lines += ["", f"Knockout minus naive pairwise: {doc['knockout_minus_naive_pairwise']!r}"]
    return "\n".join(lines) + "\n"


def cmd_simulate(config: SimConfig, out: Path | None = None) -> dict:
    doc = simulation_report(config)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        atomic_write(out / "simulate.json", dumps(doc))
        atomic_write(out / "simulate.md", simulation_markdown(doc))
    return doc


def _csv_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="knockout-eval",
        description="Score candidate answers with a knockout tournament of pairwise LLM-judge comparisons.",
    )
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="score a dataset with one method")
    run.add_argument("--dataset", type=Path, required=True)
    run.add_argument("--format", choices=["exam-json", "mt-tsv"], required=True)
    run.add_argument("--method", choices=[m.value for m in Method], default=Method.KNOCKOUT.value)
    run.add_argument("--backend", choices=["remote", "oracle"], default="oracle")
    run.add_argument("--model", default=None, help="model id sent to the endpoint")
    run.add_argument("--endpoint", default=None, help="base URL of an OpenAI-compatible API")
    run.add_argument("--temperature", type=float, default=0.1)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--parallel", type=int, default=1, help="items scored concurrently")
    run.add_argument("--max-in-flight", type=int, default=4)
    run.add_argument("--prompt-dir", type=Path, default=None)
    run.add_argument("--retries", type=int, default=2, help="re-asks when the judge output cannot be parsed")
    run.add_argument("--transport-retries", type=int, default=3)
    run.add_argument("--cache-dir", type=Path, default=None)
    run.add_argument("--oracle-sigma", type=float, default=0.0)
    run.add_argument("--oracle-bias", type=float, default=0.0)
    run.add_argument("--oracle-seed", type=int, default=0)
    run.add_argument("--languages", default=",".join(sorted(DEFAULT_MT_LANGUAGES)),
                     help="comma-separated language tags kept from MT data")
    run.add_argument("--report", default="", help="also write a report: comma list of json,csv,markdown")

    rep = sub.add_parser("report", help="correlation and ranking tables from finished runs")
    rep.add_argument("--results", type=Path, nargs="+", required=True)
    rep.add_argument("--dataset", type=Path, required=True)
    rep.add_argument("--format", choices=["exam-json", "mt-tsv"], required=True)
    rep.add_argument("--out", type=Path, required=True)
    rep.add_argument("--groupings", default="", help=f"comma list of {','.join(g.value for g in Grouping)}")
    rep.add_argument("--report-formats", default=",".join(REPORT_FORMATS))
    rep.add_argument("--languages", default=",".join(sorted(DEFAULT_MT_LANGUAGES)))

    sim = sub.add_parser("simulate", help="compare methods against the simulated judge")
    sim.add_argument("--answers", type=int, default=8)
    sim.add_argument("--trials", type=int, default=200)
    sim.add_argument("--sigma", type=float, default=2.0)
    sim.add_argument("--bias", type=float, default=0.0)
    sim.add_argument("--max-points", type=float, default=10.0)
    sim.add_argument("--latent-dist", choices=["grid", "uniform"], default="grid")
    sim.add_argument("--latent-low", type=float, default=None)
    sim.add_argument("--latent-high", type=float, default=None)
    sim.add_argument("--methods", default=",".join(m.value for m in Method))
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", type=Path, default=None)

    cache = sub.add_parser("cache", help="inspect or clear a response cache")
    cache.add_argument("action", choices=["inspect", "clear"])
    cache.add_argument("--cache-dir", type=Path, required=True)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "run":
            backend = args.backend
            judge = JudgeConfig(
                backend=backend,
                model_id=args.model or ("simulated-oracle" if backend == "oracle" else ""),
                temperature=args.temperature,
                max_retries=args.transport_retries,
                endpoint_url=args.endpoint,
                oracle_noise_sigma=args.oracle_sigma,
                oracle_position_bias=args.oracle_bias,
                oracle_seed=args.oracle_seed,
                max_in_flight=args.max_in_flight,
            )
            if backend == "remote" and not judge.model_id:
                raise ValueError("--model is required with the remote backend")
            return cmd_run(RunConfig(
                dataset=args.dataset, format=args.format, method=Method(args.method), judge=judge,
                seed=args.seed, out=args.out, parallel=max(1, args.parallel), prompt_dir=args.prompt_dir,
                parse_retries=args.retries, cache_dir=args.cache_dir,
                allowed_languages=tuple(_csv_list(args.languages)),
                report_formats=tuple(_csv_list(args.report)),
            ))
        if args.command == "report":
            groupings = [Grouping(g) for g in _csv_list(args.groupings)] or None
            return cmd_report(args.results, args.dataset, args.format, args.out, groupings,
                              tuple(_csv_list(args.report_formats)), tuple(_csv_list(args.languages)))
        if args.command == "simulate":
            config = SimConfig(
                n_answers=args.answers, trials=args.trials, sigma=args.sigma, bias=args.bias,
                max_points=args.max_points, latent_dist=args.latent_dist, latent_low=args.latent_low,
                latent_high=args.latent_high, methods=tuple(Method(m) for m in _csv_list(args.methods)),
                seed=args.seed,
            )
            doc = cmd_simulate(config, args.out)
            sys.stdout.write(simulation_markdown(doc))
            return EXIT_OK
        if args.command == "cache":
            store = ResponseCache(args.cache_dir)
            if args.action == "clear":
                print(f"removed {store.clear()} cached response(s)")
            else:
                index = store.index()
                models: dict[str, int] = {}
                for rec in index:
                    models[rec["model_id"]] = models.get(rec["model_id"], 0) + 1
                print(f"{len(store)} cached response(s) in {args.cache_dir}")
                for model, n in sorted(models.items()):
                    print(f"  {n:6d}  {model}")
            return EXIT_OK
    except (ValueError, KnockoutEvalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
