"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 terminal backend
failure, 3 dataset error. Machine-readable output goes to files; logs go to
standard error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .backend import (
    BackendError,
    ChatClient,
    MockBackend,
    OpenAIChatBackend,
    ResponseCache,
    SimulatedClock,
    SystemClock,
)
from .combine import VisualMemory
from .config import ConfigError, PipelineConfig, api_key, load_config
from .divide import PatchImage
from .eval import (
    BaselineRunner,
    DatasetError,
    DC2Runner,
    TextOnlyRunner,
    evaluate,
    load_dataset,
    throughput_sweep,
    write_sweep_csv,
)
from .inference import PipelineError, build_memory, run_pipeline, session_for
from .synthetic import load_scenes, write_suite

log = logging.getLogger("dc2")

EXIT_OK, EXIT_USAGE, EXIT_BACKEND, EXIT_DATASET = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit with 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# flag name -> config key
PIPELINE_FLAGS = {
    "patch_size": ("--patch-size", int, "encoder resolution S (default 336)"),
    "theta": ("--theta", float, "sibling-merge distance threshold (default 0.1)"),
    "alpha": ("--alpha", float, "retriever confidence threshold (default 0.3)"),
    "max_depth": ("--max-depth", int, "maximum recursion depth (default 4)"),
    "nms_threshold": ("--nms-threshold", float, "IoU threshold for memory NMS (default 0.5)"),
    "top_k": ("--top-k", int, "retrieved regions described per question (default 3)"),
    "temperature": ("--temperature", float, "sampling temperature (default 0.2)"),
    "leaf_prompt": ("--leaf-prompt", int, "leaf caption prompt preset 1-5 (default 1)"),
    "backend": ("--backend", str, "model backend: http or mock"),
    "model": ("--model", str, "model name sent to the endpoint"),
    "text_model": ("--text-model", str, "text-only base model for the text-only runner"),
    "base_url": ("--base-url", str, "chat-completions base URL"),
    "text_base_url": ("--text-base-url", str, "base URL of the text-only model"),
    "timeout": ("--timeout", float, "per-request timeout in seconds"),
    "max_retries": ("--max-retries", int, "retries for transient failures"),
    "concurrency": ("--concurrency", int, "max in-flight model requests"),
    "workers": ("--workers", int, "threads for sibling patches and samples"),
    "cache_dir": ("--cache-dir", str, "directory for cached model replies"),
    "mock_scenes": ("--mock-scenes", str, "scene JSON for the mock backend"),
    "mock_latency": ("--mock-latency", float, "simulated seconds per mock call"),
}


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML file of config keys")
    for key, (flag, kind, help_text) in PIPELINE_FLAGS.items():
        kwargs = {"dest": key, "type": kind, "default": None, "help": help_text}
        if key == "backend":
            kwargs["choices"] = ["http", "mock"]
        p.add_argument(flag, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dc2", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("describe", help="divide, conquer and combine one image; write its memory")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--memory-out", type=Path, required=True)
    p.add_argument("--tree-out", type=Path, help="also dump the captioned patch tree as JSON")
    _add_pipeline_flags(p)

    p = sub.add_parser("ask", help="answer a question about an image")
    p.add_argument("--image", type=Path, required=True)
    p.add_argument("--question", required=True)
    p.add_argument("--option", action="append", dest="options", help="multiple-choice option (repeatable)")
    p.add_argument("--memory-in", type=Path, help="reuse a memory written by describe/ask")
    p.add_argument("--memory-out", type=Path)
    p.add_argument("--out", type=Path, help="write the answer and retrieval trace as JSON")
    _add_pipeline_flags(p)

    p = sub.add_parser("eval", help="score a runner on a JSONL benchmark")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--runner", choices=["dc2", "baseline", "no-image", "text-only"], default="dc2")
    p.add_argument("--out", type=Path, required=True, help="report JSON")
    p.add_argument("--csv", type=Path, help="per-sample rows")
    _add_pipeline_flags(p)

    p = sub.add_parser("throughput", help="sweep theta and record throughput and accuracy")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--thetas", type=float, nargs="+", default=[0.1, 0.2, 0.3])
    p.add_argument("--out", type=Path, required=True, help="CSV of theta, throughput, accuracy")
    p.add_argument("--simulated-clock", action="store_true",
                   help="time mock calls on a virtual clock instead of sleeping")
    _add_pipeline_flags(p)

    p = sub.add_parser("synth", help="write a synthetic high-resolution suite for the mock backend")
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("-n", type=int, default=30)
    p.add_argument("--size", type=int, default=2688)
    p.add_argument("--seed", type=int, default=0)
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    overrides = {k: getattr(args, k) for k in PIPELINE_FLAGS}
    return load_config(args.config, overrides)


def make_client(config: PipelineConfig, text_only: bool = False, clock=None) -> ChatClient:
    cache = ResponseCache(config.cache_dir) if config.cache_dir else None
    if config.backend == "mock":
        scenes = load_scenes(config.mock_scenes) if config.mock_scenes else None
        backend = MockBackend(scenes, latency=config.mock_latency, clock=clock or SystemClock())
    else:
        url = (config.text_base_url or config.base_url) if text_only else config.base_url
        backend = OpenAIChatBackend(url, api_key(), timeout=config.timeout, max_retries=config.max_retries)
    return ChatClient(backend, cache=cache, concurrency=config.concurrency)


def _tree_json(node) -> dict:
    return {
        "layer": node.layer,
        "regions": [list(r.as_tuple()) for r in node.patch.source_regions],
        "caption": node.caption,
        "objects": sorted(node.objects or []),
        "children": [_tree_json(c) for c in node.children],
    }


def cmd_describe(args, config: PipelineConfig) -> int:
    image = PatchImage.open(args.image)
    client = make_client(config)
    session = session_for(client, config, args.image.stem)
    tree, memory = build_memory(session, image, config)
    memory.save(args.memory_out)
    if args.tree_out:
        args.tree_out.write_text(json.dumps(_tree_json(tree), indent=2))
    log.info("memory: %d records for %d objects, %d model calls",
             len(memory), len(memory.names()), client.backend_calls)
    return EXIT_OK


def cmd_ask(args, config: PipelineConfig) -> int:
    image = PatchImage.open(args.image)
    client = make_client(config)
    memory = VisualMemory.load(args.memory_in) if args.memory_in else None
    result = run_pipeline(client, image, args.question, config, options=args.options,
                          memory=memory, image_id=args.image.stem)
    if args.memory_out:
        result.memory.save(args.memory_out)
    if args.out:
        args.out.write_text(json.dumps({
            "question": args.question,
            "options": args.options,
            "response": result.text,
            "aux_text": result.aux_text,
            "hits": [{"name": h.name, "region": list(h.region.as_tuple()), "layer": h.layer, "score": h.score}
                     for h in result.hits],
            "config": config.to_json(),
        }, indent=2))
    print(result.text)
    return EXIT_OK


def _runner(kind: str, config: PipelineConfig):
    if kind == "text-only":
        client = make_client(config, text_only=True)
        return TextOnlyRunner(client, config), client
    client = make_client(config)
    if kind == "dc2":
        return DC2Runner(client, config), client
    return BaselineRunner(client, config, with_image=(kind == "baseline")), client


def cmd_eval(args, config: PipelineConfig) -> int:
    samples = load_dataset(args.dataset)
    runner, client = _runner(args.runner, config)
    report = evaluate(samples, runner, config=config.to_json(), workers=config.workers,
                      backend_calls=lambda: client.backend_calls)
    report.write_json(args.out)
    if args.csv:
        report.write_csv(args.csv)
    log.info("%s: overall %.4f over %d samples (%d failed), %.2f samples/min",
             report.runner, report.overall, report.n_samples, report.n_failed, report.throughput)
    return EXIT_OK


def cmd_throughput(args, config: PipelineConfig) -> int:
    samples = load_dataset(args.dataset)
    clock = SimulatedClock() if args.simulated_clock else SystemClock()

    def make(theta: float):
        cfg = config.replace(theta=theta)
        client = make_client(cfg, clock=clock)
        return DC2Runner(client, cfg), (lambda: client.backend_calls)

    points = throughput_sweep(samples, args.thetas, make, clock=clock, config=config.to_json())
    write_sweep_csv(points, args.out)
    for p in points:
        log.info("theta=%g throughput=%.3f accuracy=%.4f calls=%d", p.theta, p.throughput, p.accuracy, p.backend_calls)
    return EXIT_OK


def cmd_synth(args) -> int:
    path = write_suite(args.out_dir, n=args.n, size=args.size, seed=args.seed)
    print(path)
    return EXIT_OK


COMMANDS = {"describe": cmd_describe, "ask": cmd_ask, "eval": cmd_eval, "throughput": cmd_throughput}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command == "synth":
        return cmd_synth(args)
    try:
        config = resolve_config(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, config)
    except DatasetError as exc:
        log.error("dataset error: %s", exc)
        return EXIT_DATASET
    except BackendError as exc:
        log.error("backend failure: %s", exc)
        return EXIT_BACKEND
    except PipelineError as exc:
        log.error("%s", exc)
        return EXIT_BACKEND if isinstance(exc.cause, BackendError) else EXIT_USAGE
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
