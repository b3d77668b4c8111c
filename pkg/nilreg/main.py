"""
Command-line entry point.

Every command writes its primary output (CSV or JSON) and a RunManifest next
to it at <out>.manifest.json. JSON results go to stdout when --out is omitted.
Exit codes: 0 success, 1 computational error, 2 acceptance failure.
"""
import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import BaseModel

from nilreg.catalog import Catalog, get_catalog
from nilreg.config import Settings, load_settings
from nilreg.errors import NilregError, PreconditionError, SpecValidationError, WitnessVerificationError
from nilreg.models import ProcessVariant
from nilreg import reproduce, service

logger = logging.getLogger("nilreg")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


# --- PARSER ---
def _add_group(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--group", required=True, help="Catalog group name.")


def _add_out(parser: argparse.ArgumentParser, required: bool = False) -> None:
    parser.add_argument("--out", required=required, help="Output path; a manifest is written next to it.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nilreg", description="Growth, critical regularity and interval realizations of nilpotent groups."
    )
    parser.add_argument("--config", help="YAML settings file.")
    parser.add_argument("--catalog", help="Catalog JSON file (defaults to the shipped catalog).")
    parser.add_argument("--log-level", help="Overrides log_level from the settings.")
    parser.add_argument("--workers", type=int, help="Overrides workers from the settings.")
    parser.add_argument("--cache-dir", help="Overrides cache_dir from the settings.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    sub = subparsers.add_parser("ball", help="Word-metric ball counts.")
    _add_group(sub)
    sub.add_argument("--radius", type=int, required=True)
    _add_out(sub, required=True)

    sub = subparsers.add_parser("schreier", help="Schreier-graph ball counts of G/K.")
    _add_group(sub)
    sub.add_argument("--subgroup", required=True)
    sub.add_argument("--radius", type=int, required=True)
    _add_out(sub, required=True)

    sub = subparsers.add_parser("growth", help="Growth degree with a fitted exponent.")
    _add_group(sub)
    sub.add_argument("--subgroup", help="Report Schreier growth of G/K instead of ball growth.")
    sub.add_argument("--radius", type=int)
    _add_out(sub)

    sub = subparsers.add_parser("canon", help="Canonical form of a word by sorting.")
    _add_group(sub)
    sub.add_argument("--word", required=True, help='Space-separated tokens such as "b a b a^-1".')
    sub.add_argument("--trace-weights", action="store_true")
    _add_out(sub)

    sub = subparsers.add_parser("verify-spec", help="Check the catalog entry of a group.")
    _add_group(sub)
    _add_out(sub)

    sub = subparsers.add_parser("verify-witness", help="Check a stabilizer witness clause by clause.")
    _add_group(sub)
    sub.add_argument("--witness", required=True)
    _add_out(sub)

    sub = subparsers.add_parser("crit", help="Critical regularity on [0,1], (0,1] and S1.")
    _add_group(sub)
    _add_out(sub)

    sub = subparsers.add_parser("process", help="Sample random processes.")
    _add_group(sub)
    sub.add_argument("--variant", choices=[v.value for v in ProcessVariant], default=ProcessVariant.PLAIN.value)
    sub.add_argument("--steps", type=int, required=True)
    sub.add_argument("--seeds", type=int, default=1, help="Number of seeds.")
    sub.add_argument("--seed0", type=int, default=0, help="First seed.")
    sub.add_argument("--witness", help="Witness used for coset labels and the right or critical variant.")
    _add_out(sub, required=True)

    sub = subparsers.add_parser("realize", help="Build and persist a truncated interval realization.")
    _add_group(sub)
    sub.add_argument("--witness", required=True)
    sub.add_argument("--alpha", type=float, required=True)
    sub.add_argument("--radius", type=int, required=True)
    sub.add_argument("--jrange", type=int)
    sub.add_argument("--c0", type=float, help="Explicit C0; by default C0 doubles from the settings value.")
    _add_out(sub, required=True)

    sub = subparsers.add_parser("holder", help="Hölder constants of one generator over a persisted system.")
    sub.add_argument("--system", required=True)
    sub.add_argument("--generator", required=True)
    _add_out(sub, required=True)

    sub = subparsers.add_parser("reproduce", help="Run an acceptance recipe.")
    sub.add_argument("criterion", help="AC-1 ... AC-8 or all.")
    _add_out(sub)
    return parser


# --- HELPERS ---
def _settings(args: argparse.Namespace) -> Settings:
    settings = load_settings(args.config)
    overrides = {
        key: value
        for key, value in (("log_level", args.log_level), ("workers", args.workers), ("cache_dir", args.cache_dir))
        if value is not None
    }
    return Settings(**{**settings.model_dump(), **overrides}) if overrides else settings


def configure_logging(level: str) -> None:
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, stream=sys.stderr, force=True)


def _options(args: argparse.Namespace) -> dict:
    return {key: value for key, value in vars(args).items() if key not in ("config",)}


def _emit(model: BaseModel, out: Optional[str]) -> List[Path]:
    if out is None:
        print(model.model_dump_json(indent=2))
        return []
    return [service.write_json(out, model)]


def _emit_all(models: Sequence[BaseModel], out: Optional[str]) -> List[Path]:
    payload = json.dumps([json.loads(model.model_dump_json()) for model in models], indent=2)
    if out is None:
        print(payload)
        return []
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(payload + "\n", encoding="utf-8")
    return [path]


# --- COMMANDS ---
def _run(args: argparse.Namespace, settings: Settings, catalog: Catalog) -> dict:
    """Run one command; returns what the manifest records."""
    command = args.command
    seeds: List[int] = []
    partial = False

    if command == "ball":
        _, rows, partial = service.run_ball(catalog.group(args.group), args.radius, settings)
        outputs = [service.write_csv(args.out, service.BALL_COLUMNS, rows)]
    elif command == "schreier":
        rows = service.run_schreier(catalog.group(args.group), args.subgroup, args.radius, settings)
        outputs = [service.write_csv(args.out, service.BALL_COLUMNS, rows)]
    elif command == "growth":
        report, rows, partial = service.run_growth(catalog.group(args.group), settings, args.subgroup, args.radius)
        outputs = _emit(report, args.out)
        if args.out:
            outputs.append(service.write_csv(Path(args.out).with_suffix(".csv"), service.BALL_COLUMNS, rows))
    elif command == "canon":
        outputs = _emit(service.run_canon(catalog.group(args.group), args.word, args.trace_weights), args.out)
    elif command in ("verify-spec", "verify-witness"):
        spec = catalog.group(args.group)
        try:
            if command == "verify-spec":
                report = service.run_verify_spec(spec)
            else:
                report = service.run_verify_witness(spec, args.witness)
        except (SpecValidationError, WitnessVerificationError) as exc:
            if exc.report is not None:
                _emit(exc.report, args.out)
            raise
        outputs = _emit(report, args.out)
    elif command == "crit":
        outputs = _emit(service.run_crit(catalog.group(args.group)), args.out)
    elif command == "process":
        if args.seeds < 1:
            raise PreconditionError("--seeds must be >= 1", seeds=args.seeds)
        seeds = list(range(args.seed0, args.seed0 + args.seeds))
        rows, summary = service.run_process(
            catalog.group(args.group), catalog, ProcessVariant(args.variant), args.steps, seeds, settings, args.witness
        )
        outputs = [service.write_csv(args.out, service.PROCESS_COLUMNS, rows)]
        summary_path = Path(f"{args.out}.summary.json")
        outputs.append(service.write_json(summary_path, summary))
    elif command == "realize":
        system, payload = service.run_realize(
            catalog.group(args.group), args.witness, args.alpha, args.radius, settings, args.jrange, args.c0
        )
        partial = not system.core_complete
        outputs = [service.write_json(args.out, payload)]
    elif command == "holder":
        system = service.load_system(args.system)
        rows = service.run_holder(system, args.generator, settings)
        outputs = [service.write_csv(args.out, service.HOLDER_COLUMNS, rows)]
    elif command == "reproduce":
        reports = reproduce.reproduce(args.criterion, catalog, settings)
        outputs = _emit_all(reports, args.out)
        return {"outputs": outputs, "seeds": seeds, "partial": partial, "reports": reports}
    else:
        raise PreconditionError(f"unknown command '{command}'")
    return {"outputs": outputs, "seeds": seeds, "partial": partial}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.monotonic()
    try:
        settings = _settings(args)
        configure_logging(settings.log_level)
        catalog = get_catalog(args.catalog)
        result = _run(args, settings, catalog)
        out = getattr(args, "out", None)
        if out:
            budget = reproduce.BUDGETS.get(args.criterion) if args.command == "reproduce" else None
            manifest = service.build_manifest(
                " ".join(sys.argv[1:] if argv is None else argv),
                settings,
                catalog,
                result["outputs"],
                started,
                seeds=result["seeds"],
                options=_options(args),
                budget=budget,
                partial=result["partial"],
            )
            service.write_json(service.manifest_path(out), manifest)
        if "reports" in result:
            reproduce.require_passed(result["reports"])
    except NilregError as exc:
        logger.error("%s: %s", exc.error_code, exc.message)
        print(exc.details().model_dump_json(indent=2), file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
