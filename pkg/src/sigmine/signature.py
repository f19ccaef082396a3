"""Compile mined rules into matchable signatures and ship them as Snort text.

A signature is a conjunction of feature predicates with an attack category,
a sid and provenance stats. The exported file uses a small Snort subset
(alert ip any any -> any any with msg/classtype/sid/rev options); header
comment lines carry the schema fingerprint, the discretization cuts and
full-precision stats so parsing an export reproduces the ruleset exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TextIO

from .apriori import AssociationRule
from .dataset import (
    ATTACK_CATEGORIES,
    BINARY,
    CATEGORICAL,
    CONTINUOUS,
    ConnectionRecord,
    Dataset,
    DiscretizationCuts,
    LABEL_ITEM_PREFIX,
    ParseError,
    Schema,
    fmt_num,
    join_items,
    map_label_to_category,
    parse_num,
    split_items,
)

EQUALS = "equals"
IN_RANGE = "in_range"

_RANGE_MARK = "∈["

CLASSTYPE_BY_CATEGORY = {
    "DoS": "attempted-dos",
    "Probe": "attempted-recon",
    "R2L": "attempted-user",
    "U2R": "attempted-admin",
}
CATEGORY_BY_CLASSTYPE = {v: k for k, v in CLASSTYPE_BY_CATEGORY.items()}

FILE_BANNER = "# sigmine-ruleset v1"

_RULE_RE = re.compile(
    r'^alert ip any any -> any any '
    r'\(msg:"([^"]+)"; classtype:([a-z-]+); sid:(\d+); rev:(\d+);\)$'
)


class SignatureError(ValueError):
    """Rule cannot be compiled, matched or serialized."""


@dataclass(frozen=True)
class Predicate:
    """One conjunct: feature equals a value, or lies in [lo, hi)."""

    feature: str
    kind: str
    value: str | None = None
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self) -> None:
        if not self.feature:
            raise SignatureError("predicate needs a feature name")
        if self.kind == EQUALS:
            if self.value is None or self.lo is not None or self.hi is not None:
                raise SignatureError("equals predicate takes a value only")
        elif self.kind == IN_RANGE:
            if self.value is not None or self.lo is None or self.hi is None:
                raise SignatureError("in_range predicate takes lo and hi only")
            if not math.isfinite(self.lo) or math.isnan(self.hi):
                raise SignatureError("bad range bounds")
            if not self.lo < self.hi:
                raise SignatureError(f"empty range [{self.lo}, {self.hi})")
        else:
            raise SignatureError(f"unknown predicate kind {self.kind!r}")

    def holds(self, value: float | int | str) -> bool:
        if self.kind == EQUALS:
            if isinstance(value, str):
                return value == self.value
            try:
                return float(value) == float(self.value)  # type: ignore[arg-type]
            except (TypeError, ValueError):
                return False
        return self.lo <= float(value) < self.hi  # type: ignore[operator]

    def to_item(self) -> str:
        if self.kind == EQUALS:
            return f"{self.feature}={self.value}"
        return f"{self.feature}{_RANGE_MARK}{fmt_num(self.lo)},{fmt_num(self.hi)})"

    @classmethod
    def from_item(cls, item: str) -> "Predicate":
        if _RANGE_MARK in item:
            feature, rest = item.split(_RANGE_MARK, 1)
            if not rest.endswith(")") or "," not in rest:
                raise SignatureError(f"bad range item {item!r}")
            lo_s, hi_s = rest[:-1].split(",", 1)
            return cls(feature, IN_RANGE, lo=parse_num(lo_s), hi=parse_num(hi_s))
        if "=" in item:
            feature, value = item.split("=", 1)
            return cls(feature, EQUALS, value=value)
        raise SignatureError(f"unparseable item {item!r}")


@dataclass(frozen=True)
class SignatureRule:
    sid: int
    category: str
    predicates: tuple[Predicate, ...]
    support: float
    confidence: float
    rev: int = 1

    def __post_init__(self) -> None:
        if self.sid < 1 or self.rev < 1:
            raise SignatureError("sid and rev must be >= 1")
        if self.category not in CLASSTYPE_BY_CATEGORY:
            raise SignatureError(f"not an attack category: {self.category!r}")
        if not self.predicates:
            raise SignatureError("rule needs at least one predicate")
        if not 0.0 <= self.support <= 1.0:
            raise SignatureError(f"support {self.support!r} out of range")
        if not 0.0 < self.confidence <= 1.0:
            raise SignatureError(f"confidence {self.confidence!r} out of range")

    def msg(self) -> str:
        items = join_items(p.to_item() for p in self.predicates)
        return f"{self.category}|{items}|conf={self.confidence:.4f}"

    def matches(self, values: Sequence[float | int | str], schema: Schema) -> bool:
        try:
            return all(
                p.holds(values[schema.index_of(p.feature)]) for p in self.predicates
            )
        except KeyError as exc:
            raise SignatureError(f"rule {self.sid} uses unknown feature {exc}") from None


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[SignatureRule, ...]
    schema_fingerprint: str
    cuts: DiscretizationCuts

    def __post_init__(self) -> None:
        sids = [r.sid for r in self.rules]
        if len(set(sids)) != len(sids):
            raise SignatureError("duplicate sids in ruleset")

    def __len__(self) -> int:
        return len(self.rules)


def schema_fingerprint(schema: Schema) -> str:
    """Short digest of the feature names and kinds (vocabularies excluded,
    so registering new categorical values does not change identity)."""
    text = ";".join(f"{f.name}:{f.kind}" for f in schema.features)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def _category_for_consequent(
    consequent: tuple[str, ...], taxonomy: Mapping[str, str] | None
) -> str:
    if len(consequent) != 1 or not consequent[0].startswith(LABEL_ITEM_PREFIX):
        raise SignatureError(
            f"consequent must be a single label item, got {consequent!r}"
        )
    name = consequent[0][len(LABEL_ITEM_PREFIX) :]
    if name in ATTACK_CATEGORIES:
        return name
    category = map_label_to_category(name, taxonomy)
    if category == "Normal":
        raise SignatureError(f"consequent {name!r} is not an attack")
    return category


def _validate_predicate(pred: Predicate, schema: Schema, cuts: DiscretizationCuts) -> None:
    try:
        kind = schema.kind_of(pred.feature)
    except KeyError:
        raise SignatureError(f"unknown feature {pred.feature!r}") from None
    if pred.kind == IN_RANGE:
        if kind != CONTINUOUS:
            raise SignatureError(f"range predicate on non-continuous {pred.feature!r}")
        edges = cuts.edges.get(pred.feature)
        if edges is None:
            raise SignatureError(f"no cuts recorded for {pred.feature!r}")
        pairs = list(zip(edges, edges[1:]))
        if (pred.lo, pred.hi) not in pairs:
            raise SignatureError(
                f"range [{pred.lo},{pred.hi}) on {pred.feature!r} "
                "does not align with the recorded cuts"
            )
    else:
        if kind not in (CATEGORICAL, BINARY):
            raise SignatureError(f"equals predicate on continuous {pred.feature!r}")


def compile_rules(
    rules: Sequence[AssociationRule],
    schema: Schema,
    cuts: DiscretizationCuts,
    base_sid: int = 1000001,
    taxonomy: Mapping[str, str] | None = None,
) -> RuleSet:
    """Turn mined rules into signatures with consecutive sids.

    Every antecedent item becomes a predicate (bucket items must align with
    the recorded cuts); the consequent label item names the attack, mapped
    to its category. Rules keep their incoming order, so sids are stable
    for a given mining output.
    """
    if base_sid < 1:
        raise SignatureError("base_sid must be >= 1")
    out: list[SignatureRule] = []
    for i, rule in enumerate(rules):
        category = _category_for_consequent(rule.consequent, taxonomy)
        preds: list[Predicate] = []
        for item in rule.antecedent:
            if item.startswith(LABEL_ITEM_PREFIX):
                raise SignatureError(f"label item {item!r} in antecedent")
            pred = Predicate.from_item(item)
            _validate_predicate(pred, schema, cuts)
            preds.append(pred)
        out.append(
            SignatureRule(
                base_sid + i, category, tuple(preds), rule.support, rule.confidence
            )
        )
    return RuleSet(tuple(out), schema_fingerprint(schema), cuts)


def rule_line(rule: SignatureRule) -> str:
    classtype = CLASSTYPE_BY_CATEGORY[rule.category]
    return (
        f'alert ip any any -> any any (msg:"{rule.msg()}"; '
        f"classtype:{classtype}; sid:{rule.sid}; rev:{rule.rev};)"
    )


def export_snort(ruleset: RuleSet, sink: str | Path | TextIO | None = None) -> str:
    """Render the ruleset as Snort rule text (and write it when given a sink).

    Comment headers carry the schema fingerprint, the cuts and a per-sid
    stats map at full precision; Snort ignores them, parse_snort does not.
    """
    meta = {
        str(r.sid): {"confidence": r.confidence, "support": r.support}
        for r in ruleset.rules
    }
    lines = [
        FILE_BANNER,
        f"# schema {ruleset.schema_fingerprint}",
        "# cuts " + json.dumps(ruleset.cuts.to_jsonable(), sort_keys=True,
                               separators=(",", ":")),
        "# meta " + json.dumps(meta, sort_keys=True, separators=(",", ":")),
    ]
    lines.extend(rule_line(r) for r in ruleset.rules)
    text = "\n".join(lines) + "\n"
    if sink is not None:
        if isinstance(sink, (str, Path)):
            Path(sink).write_text(text, encoding="utf-8", newline="\n")
        else:
            sink.write(text)
    return text


def _parse_rule_line(line: str, lineno: int, meta: Mapping[str, Mapping[str, float]]) -> SignatureRule:
    m = _RULE_RE.match(line)
    if m is None:
        raise ParseError(f"line {lineno}: not a recognized rule line")
    msg, classtype, sid_s, rev_s = m.groups()
    if classtype not in CATEGORY_BY_CLASSTYPE:
        raise ParseError(f"line {lineno}: unknown classtype {classtype!r}")
    parts = msg.split("|")
    if len(parts) != 3 or not parts[2].startswith("conf="):
        raise ParseError(f"line {lineno}: msg must be category|items|conf=...")
    category, items_s, conf_s = parts
    if CATEGORY_BY_CLASSTYPE[classtype] != category:
        raise ParseError(
            f"line {lineno}: classtype {classtype!r} disagrees with category {category!r}"
        )
    try:
        conf_msg = float(conf_s[len("conf=") :])
    except ValueError:
        raise ParseError(f"line {lineno}: bad confidence in msg") from None
    sid, rev = int(sid_s), int(rev_s)
    stats = meta.get(str(sid))
    confidence = float(stats["confidence"]) if stats else conf_msg
    support = float(stats["support"]) if stats else 0.0
    try:
        preds = tuple(Predicate.from_item(i) for i in split_items(items_s))
        return SignatureRule(sid, category, preds, support, confidence, rev)
    except SignatureError as exc:
        raise ParseError(f"line {lineno}: {exc}") from None


def parse_snort(source: str | Path | TextIO | Iterable[str]) -> RuleSet:
    """Read a ruleset written by export_snort (or any file in its subset).

    Files without the header comments still parse: stats then fall back to
    the 4-decimal confidence in msg and a support of 0, the fingerprint to
    an empty string, the cuts to an empty table.
    """
    if isinstance(source, (str, Path)):
        lines: Iterable[str] = Path(source).read_text(encoding="utf-8").splitlines()
    elif hasattr(source, "read"):
        lines = source.read().splitlines()  # type: ignore[union-attr]
    else:
        lines = source

    fingerprint = ""
    cuts = DiscretizationCuts({})
    meta: Mapping[str, Mapping[str, float]] = {}
    rules: list[SignatureRule] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("sigmine-ruleset"):
                if line != FILE_BANNER:
                    raise ParseError(f"line {lineno}: unsupported ruleset version")
            elif body.startswith("schema "):
                fingerprint = body[len("schema ") :].strip()
            elif body.startswith("cuts "):
                try:
                    cuts = DiscretizationCuts.from_jsonable(
                        json.loads(body[len("cuts ") :])
                    )
                except (json.JSONDecodeError, ValueError) as exc:
                    raise ParseError(f"line {lineno}: bad cuts header: {exc}") from None
            elif body.startswith("meta "):
                try:
                    meta = json.loads(body[len("meta ") :])
                except json.JSONDecodeError as exc:
                    raise ParseError(f"line {lineno}: bad meta header: {exc}") from None
            continue
        rules.append(_parse_rule_line(line, lineno, meta))
    try:
        return RuleSet(tuple(rules), fingerprint, cuts)
    except SignatureError as exc:
        raise ParseError(str(exc)) from None


def match_values(
    ruleset: RuleSet, values: Sequence[float | int | str], schema: Schema
) -> SignatureRule | None:
    """The winning matching rule: highest confidence, ties to lowest sid.

    Storage order never matters. Returns None when nothing matches.
    """
    best: SignatureRule | None = None
    for rule in ruleset.rules:
        if rule.matches(values, schema):
            if best is None or (rule.confidence, -rule.sid) > (best.confidence, -best.sid):
                best = rule
    return best


def match(
    ruleset: RuleSet, record: ConnectionRecord, schema: Schema
) -> SignatureRule | None:
    return match_values(ruleset, record.values, schema)


def detect(ruleset: RuleSet, dataset: Dataset) -> list[tuple[int, str, int | None]]:
    """Verdicts for every record: (index, category or 'Normal', sid or None)."""
    out: list[tuple[int, str, int | None]] = []
    for i, rec in enumerate(dataset.records):
        hit = match_values(ruleset, rec.values, dataset.schema)
        if hit is None:
            out.append((i, "Normal", None))
        else:
            out.append((i, hit.category, hit.sid))
    return out
