"""Stress-test a ruleset by mutating matched attack records until they slip.

Moves are the smallest value changes that exit a matched predicate: step
just past a bucket edge for range predicates, swap to another value the
attack class actually exhibits for equals predicates. The search is an
exhaustive walk (budget-gated moves, visited states pruned), so whether a
record can evade depends only on what the budget allows, never on search
order; success is therefore monotone in the budget.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence, TextIO

import numpy as np

from .dataset import (
    BINARY,
    CATEGORICAL,
    CONTINUOUS,
    ConnectionRecord,
    Dataset,
    Schema,
)
from .signature import EQUALS, IN_RANGE, RuleSet, SignatureRule, match_values


class EvasionError(ValueError):
    """Invalid evasion parameters or inputs."""


@dataclass(frozen=True)
class MutationBudget:
    """What the attacker may change.

    max_features_changed caps how many features differ from the original
    record; numeric_step caps each numeric move at that fraction of the
    attack class's observed value range; categorical_swaps gates swapping
    categorical and binary values; seed drives the per-record ordering of
    swap candidates.
    """

    max_features_changed: int = 1
    numeric_step: float = 1.0
    categorical_swaps: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_features_changed < 0:
            raise EvasionError("max_features_changed must be >= 0")
        if not self.numeric_step >= 0:
            raise EvasionError("numeric_step must be >= 0")
        if self.seed < 0:
            raise EvasionError("seed must be >= 0")


@dataclass(frozen=True)
class ClassEnvelope:
    """Observed per-feature value ranges of one attack category.

    numeric maps feature index to (min, max, integral); categorical and
    binary map feature index to the sorted observed values. Mutations never
    leave this envelope, which is how evasion preserves class plausibility.
    """

    numeric: Mapping[int, tuple[float, float, bool]]
    categorical: Mapping[int, tuple[str, ...]]
    binary: Mapping[int, tuple[int, ...]]


def class_envelopes(dataset: Dataset) -> dict[str, ClassEnvelope]:
    """Envelopes for every attack category present in the dataset."""
    by_cat: dict[str, list[ConnectionRecord]] = {}
    for rec in dataset.records:
        if rec.category != "Normal":
            by_cat.setdefault(rec.category, []).append(rec)

    out: dict[str, ClassEnvelope] = {}
    for category, recs in by_cat.items():
        numeric: dict[int, tuple[float, float, bool]] = {}
        categorical: dict[int, tuple[str, ...]] = {}
        binary: dict[int, tuple[int, ...]] = {}
        for idx, spec in enumerate(dataset.schema.features):
            vals = [r.values[idx] for r in recs]
            if spec.kind == CONTINUOUS:
                arr = np.array(vals, dtype=float)
                integral = bool(np.all(arr == np.floor(arr)))
                numeric[idx] = (float(arr.min()), float(arr.max()), integral)
            elif spec.kind == CATEGORICAL:
                categorical[idx] = tuple(sorted({str(v) for v in vals}))
            else:
                binary[idx] = tuple(sorted({int(v) for v in vals}))
        out[category] = ClassEnvelope(numeric, categorical, binary)
    return out


@dataclass(frozen=True)
class EvasionOutcome:
    index: int
    original: ConnectionRecord
    mutated: ConnectionRecord
    matched_sid: int | None
    evaded: bool
    features_changed: int
    applicable: bool


def _range_moves(
    pred_lo: float,
    pred_hi: float,
    current: float,
    env: tuple[float, float, bool],
    step_cap: float,
) -> list[float]:
    lo_c, hi_c, integral = env
    span = hi_c - lo_c
    limit = step_cap * span
    candidates: list[float] = []
    if math.isfinite(pred_hi) and pred_hi <= hi_c and abs(pred_hi - current) <= limit:
        candidates.append(pred_hi)  # hi itself falls outside [lo, hi)
    grain = 1.0 if integral else pred_lo - float(np.nextafter(pred_lo, -math.inf))
    down = pred_lo - grain
    if down >= lo_c and abs(current - down) <= limit:
        candidates.append(down)
    candidates.sort(key=lambda v: (abs(v - current), v))
    return candidates


def evade_record(
    record: ConnectionRecord,
    ruleset: RuleSet,
    budget: MutationBudget,
    envelope: ClassEnvelope,
    schema: Schema,
    rng: np.random.Generator | None = None,
) -> tuple[ConnectionRecord, bool, int]:
    """Mutate one attack record until no rule matches, within the budget.

    Returns (record after the attempt, evaded, features changed). A failed
    attempt returns the record untouched. The walk explores every state the
    budget can reach (each at most once), so failure means no in-budget
    mutation evades the ruleset.
    """
    if record.category == "Normal":
        raise EvasionError("only attack records can be evaded")
    rng = rng if rng is not None else np.random.default_rng(budget.seed)
    original = record.values
    n = len(original)

    # Fix swap candidate orderings up front so the walk is deterministic.
    swap_order: dict[int, tuple] = {}
    for idx, alts in envelope.categorical.items():
        pool = [v for v in alts]
        swap_order[idx] = tuple(pool[i] for i in rng.permutation(len(pool)))
    for idx, alts in envelope.binary.items():
        pool = [v for v in alts]
        swap_order[idx] = tuple(pool[i] for i in rng.permutation(len(pool)))

    def moves(state: tuple, rule: SignatureRule) -> list[tuple[int, float | int | str]]:
        changed = {i for i in range(n) if state[i] != original[i]}
        out: list[tuple[int, float | int | str]] = []
        for pred in rule.predicates:
            fi = schema.index_of(pred.feature)
            cur = state[fi]
            room = len(changed) < budget.max_features_changed or fi in changed
            if not room:
                continue
            if pred.kind == IN_RANGE:
                env = envelope.numeric.get(fi)
                if env is None:
                    continue
                for v in _range_moves(pred.lo, pred.hi, float(cur), env, budget.numeric_step):
                    if v != cur:
                        out.append((fi, v))
            elif pred.kind == EQUALS and budget.categorical_swaps:
                for v in swap_order.get(fi, ()):
                    if v != cur:
                        out.append((fi, v))
        # Dropping back to the original value can free budget; make sure the
        # reverse move is always available for changed features.
        for fi in sorted(changed):
            if (fi, original[fi]) not in out:
                out.append((fi, original[fi]))
        return out

    stack: list[tuple] = [tuple(original)]
    visited: set[tuple] = set()
    while stack:
        state = stack.pop()
        if state in visited:
            continue
        visited.add(state)
        hit = match_values(ruleset, state, schema)
        if hit is None:
            changed = sum(1 for i in range(n) if state[i] != original[i])
            if state == original:
                # not matched to begin with; caller should have filtered
                return record, False, 0
            mutated = ConnectionRecord(state, record.label, record.category)
            return mutated, True, changed
        next_moves = moves(state, hit)
        # LIFO stack: push in reverse so the cheapest move is explored first
        for fi, v in reversed(next_moves):
            nxt = state[:fi] + (v,) + state[fi + 1 :]
            if nxt not in visited:
                stack.append(nxt)
    return record, False, 0


@dataclass(frozen=True)
class EvasionReport:
    budget: MutationBudget
    attempted: int
    evaded: int
    not_applicable: int
    evasion_rate: float
    per_category: Mapping[str, tuple[int, int]]
    outcomes: tuple[EvasionOutcome, ...]


def run_evasion_campaign(
    dataset: Dataset,
    ruleset: RuleSet,
    budget: MutationBudget,
    envelopes: Mapping[str, ClassEnvelope],
    workers: int = 1,
) -> EvasionReport:
    """Attack every matched attack record in the dataset.

    Records that are normal, match no rule, or belong to a category with no
    envelope are not attempted (the latter two count as not-applicable).
    Each record's swap ordering derives from seed xor record index, so
    results are reproducible and independent of the worker count.
    """
    if workers < 1:
        raise EvasionError("workers must be >= 1")
    schema = dataset.schema

    def attempt(i: int) -> EvasionOutcome | None:
        rec = dataset.records[i]
        if rec.category == "Normal":
            return None
        hit = match_values(ruleset, rec.values, schema)
        if hit is None:
            return EvasionOutcome(i, rec, rec, None, False, 0, False)
        env = envelopes.get(rec.category)
        if env is None:
            return EvasionOutcome(i, rec, rec, hit.sid, False, 0, False)
        rng = np.random.default_rng(budget.seed ^ i)
        mutated, evaded, changed = evade_record(rec, ruleset, budget, env, schema, rng)
        return EvasionOutcome(i, rec, mutated, hit.sid, evaded, changed, True)

    indices = list(range(len(dataset.records)))
    if workers == 1 or len(indices) < 2 * workers:
        raw = [attempt(i) for i in indices]
    else:
        chunks = np.array_split(np.array(indices), workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: [attempt(int(i)) for i in c], chunks))
        raw = [o for part in parts for o in part]

    outcomes = tuple(o for o in raw if o is not None)
    attempted = sum(1 for o in outcomes if o.applicable)
    evaded = sum(1 for o in outcomes if o.evaded)
    not_applicable = sum(1 for o in outcomes if not o.applicable)
    per_category: dict[str, tuple[int, int]] = {}
    for o in outcomes:
        if not o.applicable:
            continue
        a, e = per_category.get(o.original.category, (0, 0))
        per_category[o.original.category] = (a + 1, e + (1 if o.evaded else 0))
    rate = evaded / attempted if attempted else 0.0
    return EvasionReport(
        budget, attempted, evaded, not_applicable, rate, per_category, outcomes
    )


def apply_outcomes(dataset: Dataset, report: EvasionReport) -> Dataset:
    """The dataset with every evaded record replaced by its mutation."""
    replacement = {o.index: o.mutated for o in report.outcomes if o.evaded}
    records = tuple(
        replacement.get(i, rec) for i, rec in enumerate(dataset.records)
    )
    return Dataset(dataset.schema, records)


def ablate_rules(ruleset: RuleSet, fraction: float, seed: int) -> RuleSet:
    """Remove floor(fraction * n) randomly chosen rules, order preserved.

    fraction 0 returns an equal ruleset; fraction 1 removes everything.
    """
    if not 0.0 <= fraction <= 1.0:
        raise EvasionError("fraction must be in [0, 1]")
    n = len(ruleset.rules)
    k = int(math.floor(fraction * n))
    if k == 0:
        return RuleSet(ruleset.rules, ruleset.schema_fingerprint, ruleset.cuts)
    rng = np.random.default_rng(seed)
    drop = set(rng.choice(n, size=k, replace=False).tolist())
    kept = tuple(r for i, r in enumerate(ruleset.rules) if i not in drop)
    return RuleSet(kept, ruleset.schema_fingerprint, ruleset.cuts)


def report_to_jsonable(report: EvasionReport) -> dict:
    return {
        "budget": {
            "max_features_changed": report.budget.max_features_changed,
            "numeric_step": report.budget.numeric_step,
            "categorical_swaps": report.budget.categorical_swaps,
            "seed": report.budget.seed,
        },
        "attempted": report.attempted,
        "evaded": report.evaded,
        "not_applicable": report.not_applicable,
        "evasion_rate": report.evasion_rate,
        "per_category": {
            c: {"attempted": a, "evaded": e}
            for c, (a, e) in sorted(report.per_category.items())
        },
        "records": [
            {
                "index": o.index,
                "matched_sid": o.matched_sid,
                "evaded": o.evaded,
                "features_changed": o.features_changed,
                "applicable": o.applicable,
            }
            for o in report.outcomes
        ],
    }


def write_report(report: EvasionReport, sink: str | Path | TextIO) -> None:
    text = json.dumps(report_to_jsonable(report), sort_keys=True, separators=(",", ":"))
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text + "\n", encoding="utf-8")
    else:
        sink.write(text + "\n")
