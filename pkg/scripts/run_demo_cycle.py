#!/usr/bin/env python3
"""End-to-end demo: generate a labeled mock corpus, run the tiered
detect/route/validate cycle, and print the ledger summary.

Usage:
    python3 scripts/run_demo_cycle.py --n 300 --seed 7
"""

import argparse

from hallguard.mockgen import MockSpec, generate_corpus, generate_fact_store
from hallguard.pipeline import PipelineConfig, ledger_to_markdown, run_cycle


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=300, help="records to generate")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--model-rate", type=float, default=0.1)
    ap.add_argument("--context-rate", type=float, default=0.1)
    ap.add_argument("--data-rate", type=float, default=0.1)
    args = ap.parse_args()

    spec = MockSpec(
        n_records=args.n,
        samples_per_record=5,
        true_temperature=1.5,
        inject_rates={
            "model": args.model_rate,
            "context": args.context_rate,
            "data": args.data_rate,
        },
        seed=args.seed,
    )
    records = generate_corpus(spec)
    store = generate_fact_store(spec)
    ledger = run_cycle(records, PipelineConfig(), store)
    print(ledger_to_markdown(ledger))

    by_id = {r.id: r for r in records}
    agreements = sum(
        1
        for e in ledger.entries
        if (by_id[e.record_id].ground_truth.failure_class or None) == e.verdict.tier
    )
    print(f"Routed tier agrees with the injected label on {agreements}/{len(ledger.entries)} records.")


if __name__ == "__main__":
    main()
