"""
Command-line entry point: rulebench generate | simulate | evaluate | judge | report | serve-mock
"""
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence
import argparse
import asyncio
import sys

import numpy as np
import pandas as pd
import structlog
import yaml

from config import LoggingConfig, generator_config, logging_config, simulation_config
from .config_loader import RunConfig, load_yaml
from .episodes import config_indices, generate_corpus, read_episodes, write_episodes
from .errors import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, PreconditionError, RuleBenchError, UsageError
from .evaluation import EvalRecord, build_bundles, merge_annotations, run_evaluation, run_judging
from .logging_setup import configure_logging
from .mock_endpoint import MockEndpointServer, queue_responder, setup_signal_handlers
from .model_client import ChatCompletionClient, ResponseCache
from .models import Game
from .prompts import Intervention
from .reports import render_accuracy_text, render_taxonomy_markdown, rule_accuracy, taxonomy_report
from .simulation import (
    DeterministicAlpha, ErrorCurve, ReasoningParams, argmin_scan, closed_form_error, mc_error_curve, nstar_formula,
)
from .storage import atomic_writer, read_jsonl, write_json, write_jsonl, write_text
from .tabletop import TabletopConfig
from .transcripts import DiceStyle, render_transcript, transcript_record

logger = structlog.get_logger(__name__)


class RuleBenchArgumentParser(argparse.ArgumentParser):
    """Argument errors exit with the usage code."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_range(text: str) -> range:
    start, sep, stop = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"range must look like START:STOP, got '{text}'")
    try:
        return range(int(start), int(stop))
    except ValueError:
        raise argparse.ArgumentTypeError(f"range bounds must be integers, got '{text}'")


def _run_config(args) -> RunConfig:
    config = RunConfig(args.config, args.env)
    if getattr(args, "endpoint_url", None):
        return config.with_endpoint_url(args.endpoint_url)
    return config


# -- generate --------------------------------------------------------------

def cmd_generate(args) -> List[str]:
    game = Game.parse(args.game)
    if args.all:
        indices = config_indices(game)
    elif args.range is not None:
        try:
            indices = config_indices(game, args.range.start, args.range.stop)
        except PreconditionError as e:
            raise UsageError(str(e)) from e
    else:
        raise UsageError("generate needs --all or --range START:STOP")
    tabletop = TabletopConfig(max_attempts=args.max_attempts)
    episodes = list(generate_corpus(game, args.seed, indices, args.rng_algorithm, tabletop))
    count = write_episodes(args.out, episodes)
    if args.transcripts:
        style = DiceStyle(args.dice_style)
        directory = Path(args.transcripts)
        for ep in episodes:
            write_text(directory / f"{game.value}_{ep.seed.config_index:03d}.txt", render_transcript(ep, style).text + "\n")
        write_jsonl(directory / f"{game.value}_transcripts.jsonl",
                    (transcript_record(render_transcript(ep, style)) for ep in episodes))
    print(f"wrote {count} {game.value} episodes to {args.out}")
    return []


# -- simulate --------------------------------------------------------------

def _constant_parameters(params: ReasoningParams) -> Optional[Dict[str, float]]:
    gammas = set(params.gamma_schedule[:params.n_max])
    model = params.alpha_model
    if len(gammas) != 1:
        return None
    if isinstance(model, DeterministicAlpha):
        alphas = set(model.values[:params.n_max])
        if len(alphas) != 1:
            return None
        alpha = alphas.pop()
    else:
        alpha = model.mean
    return {"b0": params.b0, "sigma": params.sigma, "gamma": gammas.pop(), "alpha_bar": alpha}


def simulation_frame(params: ReasoningParams, mc: ErrorCurve) -> pd.DataFrame:
    frame = pd.DataFrame({"N": np.arange(params.n_max + 1), "E_mc": mc.values, "SE": mc.standard_errors})
    if isinstance(params.alpha_model, DeterministicAlpha):
        frame["E_closed"] = closed_form_error(params).values
    else:
        frame["E_closed"] = np.nan
    return frame


def cmd_simulate(args) -> List[str]:
    if args.trials < 1:
        raise UsageError(f"--trials must be >= 1, got {args.trials}")
    try:
        data = load_yaml(args.params)
        if args.n_max is not None:
            data = {**data, "n_max": args.n_max}
        params = ReasoningParams.from_dict(data)
    except ValueError as e:
        raise UsageError(f"{args.params}: {e}") from e
    mc = mc_error_curve(params, args.trials, seed=args.seed, block_size=args.block_size, workers=args.workers)
    frame = simulation_frame(params, mc)

    exact = isinstance(params.alpha_model, DeterministicAlpha)
    scanned = closed_form_error(params) if exact else mc
    scan = argmin_scan(scanned)

    with atomic_writer(args.out) as handle:
        frame.to_csv(handle, index=False, na_rep="", float_format="%.10g")
        handle.write(f"# shape: {scan.shape}\n")
    sidecar = {**params.to_dict(), "trials": args.trials, "seed": args.seed, "block_size": args.block_size,
               "scanned_curve": "closed_form" if exact else "monte_carlo"}
    write_json(f"{args.out}.params.json", sidecar)

    print(f"shape: {scan.shape}")
    print(f"argmin: {scan.argmin}")
    print(f"sign_changes: {scan.sign_changes}")
    constant = _constant_parameters(params)
    if constant is None:
        print("nstar_formula: n/a (schedule is not constant)")
        return []
    try:
        result = nstar_formula(**constant)
    except RuleBenchError as e:
        print(f"nstar_formula: n/a ({e})")
        return []
    flag = " flagged" if result.flagged else ""
    print(f"nstar_formula: {result.n_star} (t*={result.t_star:.4f}){flag}")
    print(f"agreement: {'yes' if result.n_star == scan.argmin else 'no'}")
    return []


# -- evaluate / judge ------------------------------------------------------

def cmd_evaluate(args) -> List[str]:
    config = _run_config(args)
    episodes = read_episodes(args.episodes)
    if args.limit is not None:
        episodes = episodes[:args.limit]
    intervention = Intervention.parse(args.intervention) if args.intervention else config.intervention
    model_cfg = config.model_endpoint
    if args.model:
        model_cfg = replace(model_cfg, model_name=args.model)
    cache = ResponseCache(config.cache_path)
    client = ChatCompletionClient(model_cfg, cache)

    if args.prompts:
        bundles = build_bundles(episodes, intervention, config.dice_style)
        write_jsonl(args.prompts, (bundle.to_audit_dict() for bundle in bundles))
    records = asyncio.run(run_evaluation(episodes, client, intervention, config.dice_style))
    write_jsonl(args.out, (r.to_dict() for r in records))
    print(f"wrote {len(records)} records to {args.out} ({client.upstream_calls} upstream calls)")
    return [f"{r.record_id}: {r.failure}" for r in records if r.failed]


def cmd_judge(args) -> List[str]:
    config = _run_config(args)
    episodes = read_episodes(args.episodes)
    records = [EvalRecord.from_dict(row) for row in read_jsonl(args.records)]
    judge = ChatCompletionClient(config.judge_endpoint, ResponseCache(config.cache_path))
    judged = asyncio.run(run_judging(records, episodes, judge))
    write_jsonl(args.out, (r.to_dict() for r in judged))
    consistent = sum(v.decision for r in judged for v in r.per_rule_verdicts.values())
    total = sum(len(r.per_rule_verdicts) for r in judged)
    print(f"judged {total} rules: {consistent} consistent")
    return [f"{r.record_id}: {r.failure}" for r in judged if r.failed]


# -- report ----------------------------------------------------------------

def cmd_report(args) -> List[str]:
    records = [EvalRecord.from_dict(row) for row in read_jsonl(args.records)]
    if args.annotations:
        records = merge_annotations(records, read_jsonl(args.annotations))
    accuracy = rule_accuracy(records)
    text = render_accuracy_text(accuracy)
    with atomic_writer(f"{args.out}.accuracy.csv") as handle:
        accuracy.to_csv(handle, index=False, float_format="%.4f")
    write_text(f"{args.out}.accuracy.txt", text)
    print(text, end="")

    if args.annotations:
        taxonomy = taxonomy_report(records)
        markdown = render_taxonomy_markdown(taxonomy)
        with atomic_writer(f"{args.out}.taxonomy.csv") as handle:
            taxonomy.to_csv(handle, index=False)
        write_text(f"{args.out}.taxonomy.md", markdown)
        print()
        print(markdown, end="")
    return [f"{r.record_id}: {r.failure}" for r in records if r.failed]


# -- serve-mock ------------------------------------------------------------

def cmd_serve_mock(args) -> List[str]:
    responder = None
    if args.responses:
        with open(args.responses, encoding="utf-8") as f:
            responder = queue_responder([line.rstrip("\n") for line in f if line.strip()])
    server = MockEndpointServer(args.host, args.port, responder)
    setup_signal_handlers(server)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        logger.info("mock_endpoint_interrupted")
    finally:
        server.stop()
    return []


COMMANDS: Dict[str, Callable[[Any], List[str]]] = {
    "generate": cmd_generate,
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
    "judge": cmd_judge,
    "report": cmd_report,
    "serve-mock": cmd_serve_mock,
}


def build_parser() -> argparse.ArgumentParser:
    parser = RuleBenchArgumentParser(prog="rulebench", description="Hidden-rule induction benchmark")
    parser.add_argument("--log-level", help="Override the configured log level")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=RuleBenchArgumentParser)

    gen = sub.add_parser("generate", help="Generate episodes and transcripts")
    gen.add_argument("--game", required=True, choices=[g.value for g in Game])
    gen.add_argument("--seed", type=int, default=generator_config.master_seed, help="Master seed")
    scope = gen.add_mutually_exclusive_group()
    scope.add_argument("--all", action="store_true", help="Every rule combination of the game")
    scope.add_argument("--range", type=parse_range, help="Config indices START:STOP")
    gen.add_argument("--rng-algorithm", default=generator_config.rng_algorithm)
    gen.add_argument("--max-attempts", type=int, default=generator_config.max_attempts)
    gen.add_argument("--dice-style", choices=[s.value for s in DiceStyle], default=DiceStyle.DUEL.value)
    gen.add_argument("--transcripts", help="Directory for rendered transcript files")
    gen.add_argument("--out", required=True, help="Episode JSONL path")

    sim = sub.add_parser("simulate", help="Error curves for a reasoning-parameter file")
    sim.add_argument("--params", required=True, help="YAML parameter file")
    sim.add_argument("--trials", type=int, default=simulation_config.trials)
    sim.add_argument("--n-max", type=int, help="Override the file's maximum depth")
    sim.add_argument("--seed", type=int, default=simulation_config.seed)
    sim.add_argument("--workers", type=int, default=simulation_config.workers)
    sim.add_argument("--block-size", type=int, default=simulation_config.block_size)
    sim.add_argument("--out", required=True, help="Error-curve CSV path")

    for name, help_text in (("evaluate", "Query the model on episode transcripts"),
                            ("judge", "Judge induced rules by majority vote")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="Run config YAML (default config/config.yaml)")
        p.add_argument("--env", help="Environment block to apply")
        p.add_argument("--endpoint-url", help="Override every endpoint base URL")
        p.add_argument("--episodes", required=True, help="Episode JSONL path")
        p.add_argument("--out", required=True, help="EvalRecord JSONL path")
        if name == "evaluate":
            p.add_argument("--intervention", choices=[i.value for i in Intervention])
            p.add_argument("--model", help="Override the model name")
            p.add_argument("--limit", type=int, help="Only the first N episodes")
            p.add_argument("--prompts", help="Prompt audit JSONL path")
        else:
            p.add_argument("--records", required=True, help="EvalRecord JSONL from evaluate")

    rep = sub.add_parser("report", help="Accuracy and taxonomy tables")
    rep.add_argument("--records", required=True, help="Judged EvalRecord JSONL")
    rep.add_argument("--annotations", help="Taxonomy annotation JSONL")
    rep.add_argument("--out", required=True, help="Output prefix")

    mock = sub.add_parser("serve-mock", help="Serve a mock chat-completion endpoint")
    mock.add_argument("--host", default="127.0.0.1")
    mock.add_argument("--port", type=int, default=8780)
    mock.add_argument("--responses", help="Text file whose lines are served in turn")
    return parser


def _write_manifest(args, failures: List[str], exit_code: int, error: Optional[str] = None) -> None:
    out = getattr(args, "out", None)
    if not out:
        return
    arguments = {k: (str(v) if isinstance(v, (range, Path)) else v) for k, v in vars(args).items()}
    try:
        write_json(f"{out}.manifest.json", {
            "command": args.command,
            "arguments": arguments,
            "failures": failures,
            "error": error,
            "exit_code": exit_code,
        })
    except OSError as e:
        logger.error("manifest_write_failed", path=f"{out}.manifest.json", error=str(e))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    log_cfg: LoggingConfig = logging_config
    if getattr(args, "config", None):
        try:
            log_cfg = RunConfig(args.config, args.env).logging
        except RuleBenchError:
            pass
    if args.log_level:
        log_cfg = replace(log_cfg, level=args.log_level)
    configure_logging(log_cfg)

    failures: List[str] = []
    try:
        failures = COMMANDS[args.command](args)
    except RuleBenchError as e:
        print(f"error: {e}", file=sys.stderr)
        _write_manifest(args, failures, e.exit_code, str(e))
        return e.exit_code
    except (OSError, ValueError, yaml.YAMLError) as e:
        print(f"error: {e}", file=sys.stderr)
        _write_manifest(args, failures, EXIT_RUNTIME, str(e))
        return EXIT_RUNTIME

    for failure in failures:
        print(f"failed: {failure}", file=sys.stderr)
    _write_manifest(args, failures, EXIT_OK)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
