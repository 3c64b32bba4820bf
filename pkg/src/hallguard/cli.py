"""Command-line surface: analyze, calibrate, race, factcheck, pipeline, mockgen, chunk.

Exit codes are a stable contract: 0 success, 1 usage or environment error
(bad flags, unreadable files, invalid config), 2 data or validation error
(malformed corpus, empty input, insufficient fit data).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .calibration import (
    DEFAULT_ECE_BINS,
    TEMPERATURE_MAX,
    TEMPERATURE_MIN,
    TEMPERATURE_TOL,
    apply_isotonic,
    calibration_map_to_json,
    fit_isotonic,
    fit_temperature,
    logit_label_pairs,
    score_outcome_pairs,
)
from .consistency import race_metrics
from .errors import CapabilityError, ConfigError
from .grounding import FactStoreError, check_claims, fact_store_to_json, load_fact_store
from .mitigation import DEFAULT_CHUNK_OVERLAP, chunk_document
from .mockgen import generate_corpus, generate_fact_store, mock_spec_from_json
from .pipeline import (
    PipelineConfig,
    default_rules,
    detect,
    ledger_to_json,
    ledger_to_markdown,
    load_rules,
    race_to_json,
    run_cycle,
    signals_to_json,
)
from .records import (
    GenerationRecord,
    RecordParseError,
    RecordValidationError,
    parse_records,
    write_records,
)
from .semantic import DEFAULT_CLUSTER_THRESHOLD

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    """argparse that honors the exit-code contract (usage errors -> 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    """Tuning knobs accepted via --config; every field has a safe default."""

    cluster_threshold: float = DEFAULT_CLUSTER_THRESHOLD
    ece_bins: int = DEFAULT_ECE_BINS
    temperature_min: float = TEMPERATURE_MIN
    temperature_max: float = TEMPERATURE_MAX
    temperature_tol: float = TEMPERATURE_TOL
    rules_path: str | None = None
    fact_rel_tol: float = 0.0
    fact_abs_tol: float = 0.0
    min_delta: float = 0.05
    format: str = "json"


def load_run_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    cfg = RunConfig(**raw)
    if not 0.0 <= cfg.cluster_threshold <= 2.0:
        raise ConfigError("cluster_threshold must lie in [0, 2]")
    if cfg.ece_bins < 1:
        raise ConfigError("ece_bins must be >= 1")
    if not 0.0 < cfg.temperature_min < cfg.temperature_max:
        raise ConfigError("need 0 < temperature_min < temperature_max")
    if cfg.temperature_tol <= 0.0:
        raise ConfigError("temperature_tol must be positive")
    if cfg.fact_rel_tol < 0.0 or cfg.fact_abs_tol < 0.0:
        raise ConfigError("fact tolerances must be nonnegative")
    if cfg.format not in ("json", "md"):
        raise ConfigError("format must be json or md")
    if cfg.rules_path is not None and not Path(cfg.rules_path).exists():
        raise ConfigError(f"rules file not found: {cfg.rules_path}")
    return cfg


def _pipeline_config(cfg: RunConfig) -> PipelineConfig:
    rules = default_rules()
    if cfg.rules_path is not None:
        rules = load_rules(json.loads(Path(cfg.rules_path).read_text(encoding="utf-8")))
    return PipelineConfig(
        cluster_threshold=cfg.cluster_threshold,
        fact_rel_tol=cfg.fact_rel_tol,
        fact_abs_tol=cfg.fact_abs_tol,
        min_delta=cfg.min_delta,
        rules=rules,
    )


def _read_corpus(path: str) -> list[GenerationRecord]:
    return parse_records(Path(path).read_bytes())


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(output).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")


def _json_dumps(payload) -> str:
    return json.dumps(payload, indent=2)


# ---------------------------------------------------------------------------
# Commands


def cmd_analyze(args) -> int:
    cfg = load_run_config(args.config)
    records = _read_corpus(args.input)
    if not records:
        print("no records", file=sys.stderr)
        return EXIT_DATA
    store = load_fact_store(Path(args.store).read_bytes()) if args.store else None
    pconfig = _pipeline_config(cfg)
    # per-record metrics are pure; a bounded pool maps them in input order and
    # all report writing stays on this thread
    with ThreadPoolExecutor(max_workers=min(8, os.cpu_count() or 1)) as pool:
        rows = [
            signals_to_json(s)
            for s in pool.map(lambda rec: detect(rec, pconfig, store), records)
        ]

    def _present(key):
        return [r[key] for r in rows if r[key] is not None]

    h_p = _present("h_p_mean")
    h_s = _present("h_s")
    aggregates = {
        "n_records": len(rows),
        "h_p_mean_avg": sum(h_p) / len(h_p) if h_p else None,
        "h_s_avg": sum(h_s) / len(h_s) if h_s else None,
        "race_flagged": sum(
            1 for r in rows if r["race"] is not None and r["race"]["flag_right_answer_wrong_reasoning"]
        ),
        "fact_mismatch_records": sum(
            1
            for r in rows
            if r["fact_verdicts"] is not None
            and any(v["status"] == "mismatch" for v in r["fact_verdicts"])
        ),
    }
    report = {"records": rows, "aggregates": aggregates}
    fmt = args.format or cfg.format
    if fmt == "md":
        _emit(_analyze_markdown(report), args.output)
    else:
        _emit(_json_dumps(report), args.output)
    return EXIT_OK


def _analyze_markdown(report: dict) -> str:
    agg = report["aggregates"]
    lines = [
        "# Detection report",
        "",
        f"Records: {agg['n_records']}",
        f"Mean token entropy (nats): {_fmt(agg['h_p_mean_avg'])}",
        f"Mean semantic entropy (nats): {_fmt(agg['h_s_avg'])}",
        f"Reasoning-divergence flags: {agg['race_flagged']}",
        f"Records with fact mismatches: {agg['fact_mismatch_records']}",
        "",
        "| record | h_p_mean | h_s | consensus | self_conf | race flag | fact mismatches |",
        "| --- | --- | --- | --- | --- | --- | --- |",
    ]
    for row in report["records"]:
        race_flag = "-" if row["race"] is None else str(row["race"]["flag_right_answer_wrong_reasoning"])
        mismatches = (
            "-"
            if row["fact_verdicts"] is None
            else str(sum(1 for v in row["fact_verdicts"] if v["status"] == "mismatch"))
        )
        lines.append(
            f"| {row['record_id']} | {_fmt(row['h_p_mean'])} | {_fmt(row['h_s'])} "
            f"| {_fmt(row['consensus_support'])} | {_fmt(row['self_confidence'])} "
            f"| {race_flag} | {mismatches} |"
        )
    lines.append("")
    return "\n".join(lines)


def _fmt(value) -> str:
    return "-" if value is None else f"{value:.4f}"


def cmd_calibrate(args) -> int:
    cfg = load_run_config(args.config)
    records = _read_corpus(args.input)
    if args.kind == "temperature":
        logit_sets, labels = logit_label_pairs(records)
        if len(logit_sets) < 2:
            print("insufficient data: need >= 2 labeled records with full distributions", file=sys.stderr)
            return EXIT_DATA
        model = fit_temperature(
            logit_sets, labels,
            t_min=cfg.temperature_min, t_max=cfg.temperature_max, tol=cfg.temperature_tol,
        )
        print(f"fitted temperature T={model.T:.4f} nll={model.fit_nll:.5f} n={model.n_fit}")
    else:  # isotonic
        pairs = score_outcome_pairs(records)
        if not pairs:
            print("insufficient data: need labeled records with full distributions", file=sys.stderr)
            return EXIT_DATA
        model = fit_isotonic(pairs)
        sse = sum((float(y) - apply_isotonic(model, s)) ** 2 for s, y in pairs)
        print(f"fitted isotonic map with {len(model.breakpoints)} breakpoints sse={sse:.5f} n={len(pairs)}")
    _emit(_json_dumps(calibration_map_to_json(model)), args.output)
    return EXIT_OK


def cmd_race(args) -> int:
    cfg = load_run_config(args.config)
    records = _read_corpus(args.input)
    if not records:
        print("no records", file=sys.stderr)
        return EXIT_DATA
    rows = []
    for rec in records:
        try:
            report = race_metrics(rec, cluster_threshold=cfg.cluster_threshold)
            rows.append({"record_id": rec.id, "race": race_to_json(report)})
        except CapabilityError as exc:
            rows.append({"record_id": rec.id, "race": None, "skipped": str(exc)})
    _emit(_json_dumps({"records": rows}), args.output)
    return EXIT_OK


def cmd_factcheck(args) -> int:
    cfg = load_run_config(args.config)
    records = _read_corpus(args.input)
    if not records:
        print("no records", file=sys.stderr)
        return EXIT_DATA
    store = load_fact_store(Path(args.store).read_bytes())
    rows = []
    mismatches = 0
    for rec in records:
        verdicts = check_claims(rec.reference_claims or [], store, cfg.fact_rel_tol, cfg.fact_abs_tol)
        mismatches += sum(1 for v in verdicts if v.status == "mismatch")
        rows.append(
            {
                "record_id": rec.id,
                "verdicts": [
                    {"key": v.key, "claimed": v.claimed, "reference": v.reference, "status": v.status}
                    for v in verdicts
                ],
            }
        )
    _emit(_json_dumps({"records": rows, "mismatches": mismatches}), args.output)
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = load_run_config(args.config)
    pconfig = _pipeline_config(cfg)
    if args.rules:
        pconfig.rules = load_rules(json.loads(Path(args.rules).read_text(encoding="utf-8")))
    records = _read_corpus(args.input)
    if not records:
        print("no records", file=sys.stderr)
        return EXIT_DATA
    store = None
    if args.store:
        store = load_fact_store(Path(args.store).read_bytes())
    elif any(r.signal == "fact_mismatches" for r in pconfig.rules):
        print("warning: no fact store supplied; data-tier fact rules will not fire", file=sys.stderr)
    ledger = run_cycle(records, pconfig, store)
    payload = _json_dumps(ledger_to_json(ledger))
    if args.output is None:
        if (args.format or cfg.format) == "md":
            _emit(ledger_to_markdown(ledger), None)
        else:
            _emit(payload, None)
    else:
        _emit(payload, args.output)
        md_path = str(Path(args.output).with_suffix(".md"))
        _emit(ledger_to_markdown(ledger), md_path)
    return EXIT_OK


def cmd_mockgen(args) -> int:
    raw = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    if args.seed is not None:
        raw["seed"] = args.seed
    spec = mock_spec_from_json(raw)
    records = generate_corpus(spec)
    Path(args.out).write_bytes(write_records(records))
    if args.store_out:
        store = generate_fact_store(spec)
        Path(args.store_out).write_text(
            _json_dumps(fact_store_to_json(store)) + "\n", encoding="utf-8"
        )
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def cmd_chunk(args) -> int:
    text = Path(args.input).read_text(encoding="utf-8")
    chunks = chunk_document(text, args.target_size, args.overlap)
    payload = {
        "chunks": [
            {"index": c.index, "start": c.start_offset, "end": c.end_offset, "text": c.text}
            for c in chunks
        ]
    }
    _emit(_json_dumps(payload), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="hallguard", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    def common(p, output=True):
        p.add_argument("--config", help="JSON run-config file")
        if output:
            p.add_argument("--output", help="write the report here instead of stdout")

    p = sub.add_parser("analyze", help="per-record detection signals and corpus aggregates")
    p.add_argument("--input", required=True, help="corpus JSONL")
    p.add_argument("--store", help="optional fact store JSON for claim checking")
    p.add_argument("--format", choices=("json", "md"))
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("calibrate", help="fit a calibration map on a labeled corpus")
    p.add_argument("--input", required=True, help="corpus JSONL with ground-truth labels")
    p.add_argument("--kind", required=True, choices=("temperature", "isotonic"))
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("race", help="reasoning/answer consistency report per record")
    p.add_argument("--input", required=True, help="corpus JSONL")
    common(p)
    p.set_defaults(func=cmd_race)

    p = sub.add_parser("factcheck", help="check structured claims against a fact store")
    p.add_argument("--input", required=True, help="corpus JSONL")
    p.add_argument("--store", required=True, help="fact store JSON")
    common(p)
    p.set_defaults(func=cmd_factcheck)

    p = sub.add_parser("pipeline", help="run the detect/route/validate cycle over a corpus")
    p.add_argument("--input", required=True, help="corpus JSONL")
    p.add_argument("--rules", help="router rules JSON (defaults ship in-package)")
    p.add_argument("--store", help="fact store JSON")
    p.add_argument("--format", choices=("json", "md"))
    common(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("mockgen", help="generate a seeded labeled corpus and fact store")
    p.add_argument("--spec", required=True, help="mock spec JSON")
    p.add_argument("--out", required=True, help="corpus JSONL output path")
    p.add_argument("--store-out", help="fact store JSON output path")
    p.add_argument("--seed", type=int, help="override the seed given in the --spec file")
    p.set_defaults(func=cmd_mockgen)

    p = sub.add_parser("chunk", help="split a document into overlapping chunks")
    p.add_argument("--input", required=True, help="UTF-8 text file")
    p.add_argument("--target-size", type=int, required=True, help="chunk size in characters")
    p.add_argument("--overlap", type=float, default=DEFAULT_CHUNK_OVERLAP,
                   help="overlap fraction in [0, 0.5)")
    p.add_argument("--output", help="write chunk JSON here instead of stdout")
    p.set_defaults(func=cmd_chunk)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits for usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cannot read input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RecordParseError, RecordValidationError, FactStoreError) as exc:
        print(f"invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except json.JSONDecodeError as exc:
        print(f"invalid JSON input: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry() -> None:  # console-script shim
    sys.exit(main())


if __name__ == "__main__":
    entry()
