"""Command line pipeline: ingest, train, mine, export, detect, evade, report.

Each stage reads the shared config (file plus per-key flag overrides),
re-derives the deterministic train/test split, and exchanges data with the
other stages only through files in the output directory. Exit codes: 0 on
success, 2 for config problems, 3 for malformed data, 4 for runtime
failures such as missing upstream artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import adaboost, evasion, metrics, signature, synth
from .apriori import (
    MiningError,
    MiningParams,
    apriori,
    generate_rules,
    read_rules,
    write_itemsets,
    write_rules,
)
from .c45 import FeatureTable, TreeError, TreeParams
from .config import (
    CONFIG_KEYS,
    ConfigError,
    PipelineConfig,
    build_config,
    read_config_file,
    resolve_min_sup,
)
from .dataset import (
    CATEGORIES,
    Dataset,
    DiscretizationCuts,
    ParseError,
    binary_targets,
    discretize,
    kdd_schema,
    load_taxonomy,
    parse_kdd,
    split,
    write_kdd_csv,
    write_transactions,
)

SAMPLE_FILE = "sample.csv"
SUMMARY_FILE = "summary.tsv"
SCHEMA_FILE = "schema.json"
TRANSACTIONS_FILE = "transactions.txt"
MODEL_FILE = "model.json"
CATEGORY_MODEL_FILE = "category_model.json"
TRAINING_LOG_FILE = "training_log.tsv"
ITEMSETS_FILE = "itemsets.tsv"
RULES_TSV_FILE = "rules.tsv"
CUTS_FILE = "cuts.json"
SNORT_FILE = "local.rules"
SNORT_ABLATED_FILE = "local_ablated.rules"
EVASION_FILE = "evasion.json"
MUTATED_FILE = "mutated.csv"
COMPARISON_FILE = "comparison.tsv"


def _verdict_file(source: str) -> str:
    return f"verdicts_{source}.tsv"


def _report_file(source: str) -> str:
    return f"report_{source}.json"


def _taxonomy(cfg: PipelineConfig):
    return load_taxonomy(None if cfg.taxonomy_path == "bundled" else cfg.taxonomy_path)


def _load_dataset(cfg: PipelineConfig, out: Path) -> Dataset:
    if cfg.kdd_path == "synth":
        path = synth.ensure_sample_file(out / SAMPLE_FILE, cfg.synth_seed)
    else:
        path = Path(cfg.kdd_path)
    unknown = None if cfg.unknown_label == "error" else cfg.unknown_label
    try:
        return parse_kdd(path, taxonomy=_taxonomy(cfg), unknown_label=unknown)
    except OSError as exc:
        raise ParseError(f"cannot read data file {path}: {exc}") from None


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise RuntimeError(f"{path} not found; {hint}")
    return path


def _weak_params(cfg: PipelineConfig) -> TreeParams:
    return TreeParams(
        max_depth=cfg.weak_max_depth,
        min_samples_per_leaf=cfg.weak_min_samples,
        min_gain=cfg.weak_min_gain,
    )


def cmd_ingest(cfg: PipelineConfig, out: Path, args: argparse.Namespace) -> None:
    out.mkdir(parents=True, exist_ok=True)
    ds = _load_dataset(cfg, out)
    counts = ds.category_counts()
    label_counts: dict[str, int] = {}
    for rec in ds.records:
        label_counts[rec.label] = label_counts.get(rec.label, 0) + 1

    with open(out / SUMMARY_FILE, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("category\tcount\n")
        for c in CATEGORIES:
            fh.write(f"{c}\t{counts[c]}\n")
        fh.write(f"total\t{len(ds)}\n")
        fh.write("label\tcount\n")
        for label in sorted(label_counts):
            fh.write(f"{label}\t{label_counts[label]}\n")

    schema_doc = {
        "fingerprint": signature.schema_fingerprint(ds.schema),
        "features": [[f.name, f.kind] for f in ds.schema.features],
        "vocabularies": {
            name: list(vals) for name, vals in sorted(ds.schema.vocabularies.items())
        },
    }
    (out / SCHEMA_FILE).write_text(
        json.dumps(schema_doc, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )

    if cfg.write_transactions:
        db = discretize(ds, bins=cfg.bins, label_granularity=cfg.label_granularity)
        write_transactions(db, out / TRANSACTIONS_FILE)

    print(f"ingested {len(ds)} records "
          f"({counts['Normal']} normal, {len(ds) - counts['Normal']} attacks)")


def cmd_train(cfg: PipelineConfig, out: Path, args: argparse.Namespace) -> None:
    out.mkdir(parents=True, exist_ok=True)
    ds = _load_dataset(cfg, out)
    train, _ = split(ds, cfg.train_fraction, cfg.seed)

    table = FeatureTable.from_dataset(train)
    strong, log = adaboost.train_adaboost(
        table,
        binary_targets(train),
        cfg.boost_rounds,
        _weak_params(cfg),
        workers=cfg.workers,
    )
    adaboost.save_model(strong, out / MODEL_FILE)
    adaboost.write_training_log(log, out / TRAINING_LOG_FILE)

    attacks = train.attacks()
    if not len(attacks):
        raise RuntimeError("no attack records in the training split")
    cat_model = adaboost.train_category_tree(
        FeatureTable.from_dataset(attacks),
        [r.category for r in attacks.records],
        TreeParams(max_depth=cfg.category_max_depth),
        workers=cfg.workers,
    )
    adaboost.save_category_model(cat_model, out / CATEGORY_MODEL_FILE)

    final_err = log[-1].training_error if log else float("nan")
    print(f"boosted {len(strong.rounds)} rounds on {len(train)} records; "
          f"training error {final_err:.4f}")
    print(f"category tree over {len(attacks)} attacks "
          f"({', '.join(cat_model.categories_present)})")


def cmd_mine(cfg: PipelineConfig, out: Path, args: argparse.Namespace) -> None:
    out.mkdir(parents=True, exist_ok=True)
    ds = _load_dataset(cfg, out)
    train, _ = split(ds, cfg.train_fraction, cfg.seed)

    if cfg.mine_source == "flagged":
        model_path = _require(out / MODEL_FILE, "run `sigmine train` first")
        strong = adaboost.load_model(model_path)
        picked = [
            rec
            for rec in train.records
            if rec.category != "Normal" and strong.predict(rec.values) > 0
        ]
        source_ds = Dataset(train.schema, tuple(picked))
    else:
        source_ds = train.attacks()

    db = discretize(source_ds, bins=cfg.bins, label_granularity=cfg.label_granularity)
    params = MiningParams(
        min_sup=resolve_min_sup(cfg.min_sup, len(db)),
        min_conf=cfg.min_conf,
        consequent_filter=cfg.consequent_filter,
        max_len=cfg.max_len,
    )
    freq = apriori(db, params, workers=cfg.workers)
    rules = generate_rules(freq, params)

    write_itemsets(freq, out / ITEMSETS_FILE)
    write_rules(rules, out / RULES_TSV_FILE)
    assert db.cuts is not None
    (out / CUTS_FILE).write_text(
        json.dumps(db.cuts.to_jsonable(), sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )

    by_level = {k: len(freq.level(k)) for k in range(1, freq.max_k() + 1)}
    levels = ", ".join(f"L{k}={n}" for k, n in by_level.items()) or "none"
    print(f"mined {len(db)} transactions (min_sup={params.min_sup}): {levels}")
    print(f"{len(rules)} rules at min_conf={params.min_conf}")


def cmd_export(cfg: PipelineConfig, out: Path, args: argparse.Namespace) -> None:
    out.mkdir(parents=True, exist_ok=True)
    rules_path = _require(out / RULES_TSV_FILE, "run `sigmine mine` first")
    cuts_path = _require(out / CUTS_FILE, "run `sigmine mine` first")
    rules = read_rules(rules_path)
    cuts = _read_cuts(cuts_path)
    ruleset = signature.compile_rules(
        rules, kdd_schema(), cuts, base_sid=cfg.base_sid, taxonomy=_taxonomy(cfg)
    )
    signature.export_snort(ruleset, out / SNORT_FILE)
    back = signature.parse_snort(out / SNORT_FILE)
    if back != ruleset:
        raise RuntimeError("round-trip check failed: parsed ruleset differs from export")
    if ruleset.rules:
        sids = f"sids {ruleset.rules[0].sid}..{ruleset.rules[-1].sid}"
    else:
        sids = "no rules"
    print(f"exported {len(ruleset)} signatures to {out / SNORT_FILE} ({sids}); "
          "round-trip check passed")


def _read_cuts(path: Path) -> DiscretizationCuts:
    try:
        return DiscretizationCuts.from_jsonable(
            json.loads(path.read_text(encoding="utf-8"))
        )
    except (json.JSONDecodeError, ValueError) as exc:
        raise ParseError(f"bad cuts file {path}: {exc}") from None


def _detect_rules(cfg: PipelineConfig, out: Path, test: Dataset) -> None:
    ruleset = signature.parse_snort(_require(out / SNORT_FILE, "run `sigmine export` first"))
    have = signature.schema_fingerprint(test.schema)
    if ruleset.schema_fingerprint and ruleset.schema_fingerprint != have:
        raise RuntimeError(
            f"ruleset schema fingerprint {ruleset.schema_fingerprint} "
            f"does not match the data ({have})"
        )
    verdicts = signature.detect(ruleset, test)
    metrics.write_verdicts(verdicts, out / _verdict_file("rules"))
    report = metrics.evaluate(
        [r.category for r in test.records], [v[1] for v in verdicts], "rules"
    )
    metrics.write_eval_report(report, out / _report_file("rules"))
    print(f"rules: DR={report.detection_rate:.4f} FAR={report.false_alarm_rate:.4f}")


def _detect_classifier(cfg: PipelineConfig, out: Path, test: Dataset) -> None:
    strong = adaboost.load_model(_require(out / MODEL_FILE, "run `sigmine train` first"))
    cat_model = adaboost.load_category_model(
        _require(out / CATEGORY_MODEL_FILE, "run `sigmine train` first")
    )
    verdicts: list[metrics.Verdict] = []
    for i, rec in enumerate(test.records):
        category = adaboost.detect_and_categorize(strong, cat_model, rec.values)
        verdicts.append((i, category, None))
    metrics.write_verdicts(verdicts, out / _verdict_file("classifier"))
    report = metrics.evaluate(
        [r.category for r in test.records], [v[1] for v in verdicts], "classifier"
    )
    metrics.write_eval_report(report, out / _report_file("classifier"))
    print(f"classifier: DR={report.detection_rate:.4f} "
          f"FAR={report.false_alarm_rate:.4f}")


def cmd_detect(cfg: PipelineConfig, out: Path, args: argparse.Namespace) -> None:
    out.mkdir(parents=True, exist_ok=True)
    ds = _load_dataset(cfg, out)
    _, test = split(ds, cfg.train_fraction, cfg.seed)
    if args.detector in ("classifier", "both"):
        _detect_classifier(cfg, out, test)
    if args.detector in ("rules", "both"):
        _detect_rules(cfg, out, test)


def cmd_evade(cfg: PipelineConfig, out: Path, args: argparse.Namespace) -> None:
    out.mkdir(parents=True, exist_ok=True)
    ds = _load_dataset(cfg, out)
    train, test = split(ds, cfg.train_fraction, cfg.seed)
    ruleset = signature.parse_snort(_require(out / SNORT_FILE, "run `sigmine export` first"))

    budget = evasion.MutationBudget(
        max_features_changed=cfg.evade_max_features,
        numeric_step=cfg.evade_numeric_step,
        categorical_swaps=cfg.evade_categorical_swaps,
        seed=cfg.evade_seed,
    )
    envelopes = evasion.class_envelopes(train)
    report = evasion.run_evasion_campaign(
        test, ruleset, budget, envelopes, workers=cfg.workers
    )
    evasion.write_report(report, out / EVASION_FILE)

    mutated = evasion.apply_outcomes(test, report)
    write_kdd_csv(mutated, out / MUTATED_FILE)
    verdicts = signature.detect(ruleset, mutated)
    degraded = metrics.evaluate(
        [r.category for r in mutated.records], [v[1] for v in verdicts], "rules_mutated"
    )
    metrics.write_eval_report(degraded, out / _report_file("rules_mutated"))
    print(f"evaded {report.evaded}/{report.attempted} matched attacks "
          f"(rate {report.evasion_rate:.4f}, {report.not_applicable} not applicable)")
    print(f"rules on mutated test: DR={degraded.detection_rate:.4f} "
          f"FAR={degraded.false_alarm_rate:.4f}")

    if cfg.ablate_fraction > 0:
        ablated = evasion.ablate_rules(ruleset, cfg.ablate_fraction, cfg.evade_seed)
        signature.export_snort(ablated, out / SNORT_ABLATED_FILE)
        verdicts_a = signature.detect(ablated, test)
        report_a = metrics.evaluate(
            [r.category for r in test.records], [v[1] for v in verdicts_a],
            "rules_ablated",
        )
        metrics.write_eval_report(report_a, out / _report_file("rules_ablated"))
        print(f"ablated {len(ruleset) - len(ablated)} of {len(ruleset)} rules: "
              f"DR={report_a.detection_rate:.4f}")


def cmd_report(cfg: PipelineConfig, out: Path, args: argparse.Namespace) -> None:
    sources = ("classifier", "rules", "rules_mutated", "rules_ablated")
    reports = []
    for source in sources:
        path = out / _report_file(source)
        if path.exists():
            reports.append(metrics.read_eval_report(path))
    if not reports:
        raise RuntimeError(f"no detection reports under {out}; run `sigmine detect` first")
    table = metrics.comparison_table(reports)
    out.mkdir(parents=True, exist_ok=True)
    (out / COMPARISON_FILE).write_text(table, encoding="utf-8", newline="\n")
    sys.stdout.write(table)


_COMMANDS = {
    "ingest": cmd_ingest,
    "train": cmd_train,
    "mine": cmd_mine,
    "export": cmd_export,
    "detect": cmd_detect,
    "evade": cmd_evade,
    "report": cmd_report,
}


def _common_options() -> argparse.ArgumentParser:
    # Shared options may appear before or after the subcommand.  Subparsers
    # re-parse them into a fresh namespace and copy every attribute back, so
    # the defaults must be SUPPRESS or they would erase values the top-level
    # parser already collected.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", metavar="FILE", default=argparse.SUPPRESS,
        help="key = value config file",
    )
    for key in CONFIG_KEYS:
        flags = [f"--{key.replace('_', '-')}"]
        if key == "out_dir":
            flags.append("--out")
        common.add_argument(
            *flags, dest=f"opt_{key}", metavar="VALUE",
            default=argparse.SUPPRESS, help=f"override config key {key}",
        )
    return common


def _parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="sigmine",
        description="Mine attack signatures from connection records and "
        "stress-test them.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("ingest", parents=[common],
                   help="parse the data and write a summary")
    sub.add_parser("train", parents=[common],
                   help="fit the boosted detector and the category tree")
    sub.add_parser("mine", parents=[common],
                   help="mine frequent itemsets and label rules")
    sub.add_parser("export", parents=[common],
                   help="compile mined rules into a Snort ruleset")
    p_detect = sub.add_parser("detect", parents=[common],
                              help="run detectors over the test split")
    p_detect.add_argument("--detector", choices=("rules", "classifier", "both"),
                          default="both")
    sub.add_parser("evade", parents=[common],
                   help="mutate matched attacks against the ruleset")
    sub.add_parser("report", parents=[common],
                   help="tabulate the detection reports side by side")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        config_path = getattr(args, "config", None)
        raw = read_config_file(config_path) if config_path else {}
        overrides = {
            key: value
            for key in CONFIG_KEYS
            if (value := getattr(args, f"opt_{key}", None)) is not None
        }
        cfg = build_config(raw, overrides)
        _COMMANDS[args.command](cfg, Path(cfg.out_dir), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 3
    except (
        TreeError,
        adaboost.BoostingError,
        MiningError,
        signature.SignatureError,
        evasion.EvasionError,
        metrics.MetricsError,
        RuntimeError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
