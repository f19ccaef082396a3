"""Connection-record dataset handling.

Covers the KDD-99 style CSV format (41 features plus a label field), the
attack-name taxonomy, stratified splitting, and the discretized transaction
form used by the itemset miner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence, TextIO

import numpy as np

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
BINARY = "binary"

CATEGORIES = ("Normal", "DoS", "Probe", "R2L", "U2R")
ATTACK_CATEGORIES = ("DoS", "Probe", "R2L", "U2R")

LABEL_ITEM_PREFIX = "label="
TRANSACTION_SEPARATOR = "###"

_KDD_FEATURES = (
    ("duration", CONTINUOUS),
    ("protocol_type", CATEGORICAL),
    ("service", CATEGORICAL),
    ("flag", CATEGORICAL),
    ("src_bytes", CONTINUOUS),
    ("dst_bytes", CONTINUOUS),
    ("land", BINARY),
    ("wrong_fragment", CONTINUOUS),
    ("urgent", CONTINUOUS),
    ("hot", CONTINUOUS),
    ("num_failed_logins", CONTINUOUS),
    ("logged_in", BINARY),
    ("num_compromised", CONTINUOUS),
    ("root_shell", CONTINUOUS),
    ("su_attempted", CONTINUOUS),
    ("num_root", CONTINUOUS),
    ("num_file_creations", CONTINUOUS),
    ("num_shells", CONTINUOUS),
    ("num_access_files", CONTINUOUS),
    ("num_outbound_cmds", CONTINUOUS),
    ("is_host_login", BINARY),
    ("is_guest_login", BINARY),
    ("count", CONTINUOUS),
    ("srv_count", CONTINUOUS),
    ("serror_rate", CONTINUOUS),
    ("srv_serror_rate", CONTINUOUS),
    ("rerror_rate", CONTINUOUS),
    ("srv_rerror_rate", CONTINUOUS),
    ("same_srv_rate", CONTINUOUS),
    ("diff_srv_rate", CONTINUOUS),
    ("srv_diff_host_rate", CONTINUOUS),
    ("dst_host_count", CONTINUOUS),
    ("dst_host_srv_count", CONTINUOUS),
    ("dst_host_same_srv_rate", CONTINUOUS),
    ("dst_host_diff_srv_rate", CONTINUOUS),
    ("dst_host_same_src_port_rate", CONTINUOUS),
    ("dst_host_srv_diff_host_rate", CONTINUOUS),
    ("dst_host_serror_rate", CONTINUOUS),
    ("dst_host_srv_serror_rate", CONTINUOUS),
    ("dst_host_rerror_rate", CONTINUOUS),
    ("dst_host_srv_rerror_rate", CONTINUOUS),
)

_PROTOCOLS = ("icmp", "tcp", "udp")

_FLAGS = ("OTH", "REJ", "RSTO", "RSTOS0", "RSTR", "S0", "S1", "S2", "S3", "SF", "SH")

_SERVICES = (
    "IRC", "X11", "Z39_50", "aol", "auth", "bgp", "courier", "csnet_ns",
    "ctf", "daytime", "discard", "domain", "domain_u", "echo", "eco_i",
    "ecr_i", "efs", "exec", "finger", "ftp", "ftp_data", "gopher", "harvest",
    "hostnames", "http", "http_2784", "http_443", "http_8001", "imap4",
    "iso_tsap", "klogin", "kshell", "ldap", "link", "login", "mtp", "name",
    "netbios_dgm", "netbios_ns", "netbios_ssn", "netstat", "nnsp", "nntp",
    "ntp_u", "other", "pm_dump", "pop_2", "pop_3", "printer", "private",
    "red_i", "remote_job", "rje", "shell", "smtp", "sql_net", "ssh",
    "sunrpc", "supdup", "systat", "telnet", "tftp_u", "tim_i", "time",
    "urh_i", "urp_i", "uucp", "uucp_path", "vmnet", "whois",
)


class ParseError(ValueError):
    """Malformed input data (bad field count, bad value, unknown label)."""


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in (CONTINUOUS, CATEGORICAL, BINARY):
            raise ValueError(f"unknown feature kind {self.kind!r}")


@dataclass(frozen=True)
class Schema:
    """Ordered feature declarations plus known categorical vocabularies."""

    features: tuple[FeatureSpec, ...]
    vocabularies: Mapping[str, tuple[str, ...]]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        index = {f.name: i for i, f in enumerate(self.features)}
        if len(index) != len(self.features):
            raise ValueError("duplicate feature names in schema")
        for name in self.vocabularies:
            if name not in index or self.features[index[name]].kind != CATEGORICAL:
                raise ValueError(f"vocabulary given for non-categorical feature {name!r}")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.features)

    def index_of(self, name: str) -> int:
        return self._index[name]

    def kind_of(self, name: str) -> str:
        return self.features[self._index[name]].kind

    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def with_vocabulary(self, extra: Mapping[str, Sequence[str]]) -> "Schema":
        """Return a copy whose vocabularies are extended with `extra` values.

        New values are appended after the existing ones in the order given;
        the receiver is untouched.
        """
        merged = dict(self.vocabularies)
        for name, values in extra.items():
            known = list(merged.get(name, ()))
            for v in values:
                if v not in known:
                    known.append(v)
            merged[name] = tuple(known)
        return Schema(self.features, merged)


def kdd_schema() -> Schema:
    """The standard 41-feature connection-record schema."""
    return Schema(
        tuple(FeatureSpec(name, kind) for name, kind in _KDD_FEATURES),
        {"protocol_type": _PROTOCOLS, "service": _SERVICES, "flag": _FLAGS},
    )


@dataclass(frozen=True)
class ConnectionRecord:
    """One parsed connection: feature values in schema order, plus labels.

    Continuous features are floats, binary features are 0/1 ints and
    categorical features are strings. `label` is the normalized attack name
    (lower case, no trailing period); `category` is one of CATEGORIES.
    """

    values: tuple[float | int | str, ...]
    label: str
    category: str


@dataclass(frozen=True)
class Dataset:
    schema: Schema
    records: tuple[ConnectionRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ConnectionRecord]:
        return iter(self.records)

    def subset(self, indices: Iterable[int]) -> "Dataset":
        recs = self.records
        return Dataset(self.schema, tuple(recs[i] for i in indices))

    def category_counts(self) -> dict[str, int]:
        counts = {c: 0 for c in CATEGORIES}
        for rec in self.records:
            counts[rec.category] += 1
        return counts

    def attacks(self) -> "Dataset":
        return Dataset(
            self.schema,
            tuple(r for r in self.records if r.category != "Normal"),
        )


def load_taxonomy(source: str | Path | TextIO | None = None) -> dict[str, str]:
    """Load the attack-name to category table.

    The format is one `<attack_name><TAB><category>` entry per line; blank
    lines and `#` comments are skipped. With no argument the bundled table
    is used.
    """
    if source is None:
        text = (
            resources.files("sigmine.data").joinpath("kdd_taxonomy.txt").read_text("utf-8")
        )
        lines: Iterable[str] = text.splitlines()
    elif isinstance(source, (str, Path)):
        lines = Path(source).read_text("utf-8").splitlines()
    else:
        lines = (line.rstrip("\n") for line in source)

    table: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"taxonomy line {lineno}: expected name<TAB>category")
        name, category = parts[0].strip().lower(), parts[1].strip()
        if category not in CATEGORIES:
            raise ParseError(f"taxonomy line {lineno}: unknown category {category!r}")
        table[name] = category
    if not table:
        raise ParseError("taxonomy table is empty")
    return table


def normalize_label(raw: str) -> str:
    """Trim whitespace, strip the trailing period, lower-case."""
    return raw.strip().rstrip(".").lower()


def map_label_to_category(
    label: str,
    taxonomy: Mapping[str, str] | None = None,
    unknown: str | None = None,
) -> str:
    """Map a normalized attack name to its category.

    An unmapped label raises ParseError unless `unknown` names a fallback
    attack category to assign instead.
    """
    table = taxonomy if taxonomy is not None else load_taxonomy()
    got = table.get(normalize_label(label))
    if got is not None:
        return got
    if unknown is not None:
        if unknown not in ATTACK_CATEGORIES:
            raise ValueError(f"fallback category must be an attack category, got {unknown!r}")
        return unknown
    raise ParseError(f"label {label!r} not in taxonomy")


def _iter_lines(source: str | Path | TextIO | Iterable[str]) -> Iterable[str]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from fh
    else:
        yield from source


def parse_kdd(
    source: str | Path | TextIO | Iterable[str],
    schema: Schema | None = None,
    taxonomy: Mapping[str, str] | None = None,
    strict: bool = False,
    unknown_label: str | None = None,
) -> Dataset:
    """Parse comma-separated connection records into a Dataset.

    Each line holds the 41 feature fields followed by the label. Labels are
    normalized (trailing period stripped) and mapped through the taxonomy.
    Unknown categorical values are registered into the returned dataset's
    schema in first-seen order; with strict=True they are parse errors
    instead. Unknown labels are errors unless `unknown_label` names a
    fallback attack category. Blank lines are skipped. The input schema
    object is never mutated.
    """
    schema = schema if schema is not None else kdd_schema()
    table = taxonomy if taxonomy is not None else load_taxonomy()
    n_fields = len(schema) + 1

    known: dict[str, set[str]] = {
        name: set(vals) for name, vals in schema.vocabularies.items()
    }
    extensions: dict[str, list[str]] = {}
    records: list[ConnectionRecord] = []

    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != n_fields:
            raise ParseError(
                f"line {lineno}: expected {n_fields} fields, got {len(fields)}"
            )
        values: list[float | int | str] = []
        for spec, text in zip(schema.features, fields):
            text = text.strip()
            if spec.kind == CONTINUOUS:
                try:
                    v = float(text)
                except ValueError:
                    raise ParseError(
                        f"line {lineno}: bad numeric value {text!r} for {spec.name}"
                    ) from None
                if not math.isfinite(v) or v < 0:
                    raise ParseError(
                        f"line {lineno}: {spec.name} must be finite and non-negative, got {text!r}"
                    )
                values.append(v)
            elif spec.kind == BINARY:
                if text == "0":
                    values.append(0)
                elif text == "1":
                    values.append(1)
                else:
                    raise ParseError(
                        f"line {lineno}: {spec.name} must be 0 or 1, got {text!r}"
                    )
            else:
                if text not in known[spec.name]:
                    if strict:
                        raise ParseError(
                            f"line {lineno}: unknown {spec.name} value {text!r}"
                        )
                    known[spec.name].add(text)
                    extensions.setdefault(spec.name, []).append(text)
                values.append(text)

        label = normalize_label(fields[-1])
        if not label:
            raise ParseError(f"line {lineno}: empty label")
        if strict and label not in table:
            raise ParseError(f"line {lineno}: label {label!r} not in taxonomy")
        category = map_label_to_category(label, table, unknown=unknown_label)
        records.append(ConnectionRecord(tuple(values), label, category))

    out_schema = schema.with_vocabulary(extensions) if extensions else schema
    return Dataset(out_schema, tuple(records))


def fmt_num(v: float) -> str:
    """Canonical numeric text: integral values without a decimal point,
    infinity as 'inf', everything else via repr (round-trips exactly)."""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def parse_num(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"bad numeric token {text!r}") from None


def _fmt_field(value: float | int | str) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    return fmt_num(value)


def write_kdd_csv(dataset: Dataset, sink: str | Path | TextIO) -> None:
    """Serialize records back to the comma-separated format.

    Numeric fields use the canonical format (exact value round-trip); the
    label gets its customary trailing period.
    """

    def _emit(fh: TextIO) -> None:
        for rec in dataset.records:
            fields = [_fmt_field(v) for v in rec.values]
            fields.append(rec.label + ".")
            fh.write(",".join(fields) + "\n")

    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            _emit(fh)
    else:
        _emit(sink)


def binary_targets(dataset: Dataset) -> np.ndarray:
    """Targets for the attack-vs-normal task: +1 attack, -1 normal."""
    return np.array(
        [1 if r.category != "Normal" else -1 for r in dataset.records], dtype=np.int64
    )


def to_binary(record: ConnectionRecord) -> int:
    return 1 if record.category != "Normal" else -1


def split(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified train/test split by category.

    Within each category the per-stratum train size is floor(f*n + 0.5); a
    single-record stratum always goes to the training side. Record order is
    preserved in both halves. Deterministic for a given seed.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for category in CATEGORIES:
        stratum = [i for i, r in enumerate(dataset.records) if r.category == category]
        n = len(stratum)
        if n == 0:
            continue
        if n == 1:
            train_idx.extend(stratum)
            continue
        n_train = int(math.floor(train_fraction * n + 0.5))
        n_train = min(max(n_train, 0), n)
        picked = rng.permutation(n)[:n_train]
        chosen = {stratum[j] for j in picked}
        train_idx.extend(i for i in stratum if i in chosen)
        test_idx.extend(i for i in stratum if i not in chosen)
    train_idx.sort()
    test_idx.sort()
    return dataset.subset(train_idx), dataset.subset(test_idx)


@dataclass(frozen=True)
class DiscretizationCuts:
    """Bucket edges per continuous feature.

    Edges are ascending, start at 0.0 and end at +inf, so every non-negative
    value lands in exactly one half-open bucket [edges[i], edges[i+1]).
    """

    edges: Mapping[str, tuple[float, ...]]

    def __post_init__(self) -> None:
        for name, es in self.edges.items():
            if len(es) < 2 or es[0] != 0.0 or not math.isinf(es[-1]):
                raise ValueError(f"bad edge list for {name!r}: {es}")
            if any(a >= b for a, b in zip(es, es[1:])):
                raise ValueError(f"edges for {name!r} not strictly ascending")

    def bucket(self, feature: str, value: float) -> tuple[float, float]:
        """The [lo, hi) bucket containing `value` (values below the first
        edge clamp into the first bucket)."""
        es = self.edges[feature]
        i = 0
        for j in range(1, len(es) - 1):
            if value >= es[j]:
                i = j
            else:
                break
        return es[i], es[i + 1]

    def to_jsonable(self) -> dict[str, list[str]]:
        return {
            name: [fmt_num(e) for e in es] for name, es in sorted(self.edges.items())
        }

    @classmethod
    def from_jsonable(cls, data: Mapping[str, Sequence[str]]) -> "DiscretizationCuts":
        return cls({name: tuple(parse_num(e) for e in es) for name, es in data.items()})


@dataclass(frozen=True)
class TransactionDb:
    """Itemized records: each transaction is a sorted tuple of unique items.

    `item_universe` is always the union of the transactions' items. `cuts`
    records how continuous features were bucketed (carried for provenance,
    excluded from equality; the text file format does not store it).
    """

    transactions: tuple[tuple[str, ...], ...]
    item_universe: frozenset[str]
    cuts: DiscretizationCuts | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.transactions)

    @classmethod
    def from_transactions(
        cls,
        transactions: Iterable[Iterable[str]],
        cuts: DiscretizationCuts | None = None,
    ) -> "TransactionDb":
        canon: list[tuple[str, ...]] = []
        for i, t in enumerate(transactions):
            items = sorted(t)
            if not items:
                raise ValueError(f"transaction {i} is empty")
            if any(a == b for a, b in zip(items, items[1:])):
                raise ValueError(f"transaction {i} has duplicate items")
            if not all(item_representable(item) for item in items):
                raise ValueError(f"transaction {i} has an unrepresentable item")
            canon.append(tuple(items))
        universe = frozenset(item for t in canon for item in t)
        return cls(tuple(canon), universe, cuts)


def eq_item(feature: str, value: float | int | str) -> str:
    item = f"{feature}={value}"
    if not item_representable(item):
        raise ValueError(f"value {value!r} cannot appear in an item")
    return item


def range_item(feature: str, lo: float, hi: float) -> str:
    return f"{feature}∈[{fmt_num(lo)},{fmt_num(hi)})"


def label_item(name: str) -> str:
    item = LABEL_ITEM_PREFIX + name
    if not item_representable(item):
        raise ValueError(f"label {name!r} cannot appear in an item")
    return item


def item_representable(item: str) -> bool:
    """True when the item survives every file format that carries items.

    Items appear one per line in transaction files and comma-joined in rule
    files and signature messages, so newlines, tabs, pipes, the transaction
    separator, bare commas, and unbalanced range brackets are all out.  A
    range item's own comma sits between ``[`` and ``)`` and is fine.
    """
    if not item or "\n" in item or "\t" in item or "|" in item:
        return False
    if item == TRANSACTION_SEPARATOR:
        return False
    depth = 0
    for ch in item:
        if ch == "[":
            depth += 1
        elif ch == ")" and depth:
            depth -= 1
        elif ch == "," and not depth:
            return False
    return depth == 0


def join_items(items: Iterable[str]) -> str:
    """Render an item list as a single comma-separated field."""
    return ",".join(items)


def split_items(text: str) -> tuple[str, ...]:
    """Invert `join_items`: split on commas outside range brackets."""
    parts: list[str] = []
    start = depth = 0
    for i, ch in enumerate(text):
        if ch == "[":
            depth += 1
        elif ch == ")":
            if depth:
                depth -= 1
        elif ch == "," and not depth:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return tuple(parts)


def compute_cuts(dataset: Dataset, bins: int | Mapping[str, int] = 4) -> DiscretizationCuts:
    """Equal-frequency bucket edges for every continuous feature.

    Interior cut points are the 1/b .. (b-1)/b quantiles of the observed
    values, deduplicated; a constant feature degenerates to the single
    bucket [0, inf).
    """

    def bins_for(name: str) -> int:
        b = bins[name] if isinstance(bins, Mapping) else bins
        if not isinstance(b, int) or b < 1:
            raise ValueError(f"bin count for {name!r} must be a positive integer")
        return b

    edges: dict[str, tuple[float, ...]] = {}
    for idx, spec in enumerate(dataset.schema.features):
        if spec.kind != CONTINUOUS:
            continue
        b = bins_for(spec.name)
        vals = np.array([rec.values[idx] for rec in dataset.records], dtype=float)
        interior: list[float] = []
        if len(vals) and b > 1:
            qs = np.quantile(vals, [i / b for i in range(1, b)])
            for q in qs:
                q = float(q)
                if q > 0.0 and (not interior or q > interior[-1]):
                    interior.append(q)
        edges[spec.name] = (0.0, *interior, math.inf)
    return DiscretizationCuts(edges)


def discretize(
    dataset: Dataset,
    bins: int | Mapping[str, int] = 4,
    cuts: DiscretizationCuts | None = None,
    label_granularity: str = "attack",
) -> TransactionDb:
    """Turn records into transactions of items.

    Categorical and binary features become `name=value` items, continuous
    features become `name∈[lo,hi)` bucket items using equal-frequency cuts
    computed here (or the `cuts` given, so test data reuses training cuts),
    and the label becomes a `label=` item carrying the attack name or, with
    label_granularity="category", the category. The cuts used are recorded
    on the returned db.
    """
    if label_granularity not in ("attack", "category"):
        raise ValueError("label_granularity must be 'attack' or 'category'")
    if cuts is None:
        cuts = compute_cuts(dataset, bins)

    transactions: list[list[str]] = []
    for rec in dataset.records:
        items: list[str] = []
        for idx, spec in enumerate(dataset.schema.features):
            v = rec.values[idx]
            if spec.kind == CONTINUOUS:
                lo, hi = cuts.bucket(spec.name, float(v))
                items.append(range_item(spec.name, lo, hi))
            else:
                items.append(eq_item(spec.name, v))
        name = rec.label if label_granularity == "attack" else rec.category
        items.append(label_item(name))
        transactions.append(items)
    return TransactionDb.from_transactions(transactions, cuts)


def write_transactions(db: TransactionDb, sink: str | Path | TextIO) -> None:
    """One item per line, a '###' line between transactions, nothing else."""

    def _emit(fh: TextIO) -> None:
        for i, t in enumerate(db.transactions):
            if i:
                fh.write(TRANSACTION_SEPARATOR + "\n")
            for item in t:
                fh.write(item + "\n")

    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            _emit(fh)
    else:
        _emit(sink)


def read_transactions(source: str | Path | TextIO | Iterable[str]) -> TransactionDb:
    """Inverse of write_transactions.

    Duplicate items within a transaction and empty transactions (leading or
    doubled separators) are format errors; a trailing separator right before
    EOF is tolerated.
    """
    transactions: list[list[str]] = []
    current: list[str] = []
    for lineno, raw in enumerate(_iter_lines(source), start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if line == TRANSACTION_SEPARATOR:
            if not current:
                raise ParseError(f"line {lineno}: separator delimits an empty transaction")
            transactions.append(current)
            current = []
        elif line == "":
            raise ParseError(f"line {lineno}: blank line in transaction file")
        else:
            current.append(line)
    if current:  # a trailing separator before EOF leaves nothing pending
        transactions.append(current)
    try:
        return TransactionDb.from_transactions(transactions)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
