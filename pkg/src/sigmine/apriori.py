"""Level-wise frequent itemset mining and rule generation.

Candidate generation is the classical join-plus-prune over lexicographically
sorted itemsets; support counting walks a prefix tree of candidates per
transaction. Rule generation can restrict consequents to the single label
item, which is what signature mining wants.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations, groupby
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .dataset import (
    LABEL_ITEM_PREFIX,
    ParseError,
    TransactionDb,
    join_items,
    split_items,
)

Itemset = tuple[str, ...]


class MiningError(ValueError):
    """Invalid mining parameters or malformed dump input."""


@dataclass(frozen=True)
class MiningParams:
    """min_sup is an absolute transaction count; min_conf a fraction."""

    min_sup: int
    min_conf: float
    consequent_filter: bool = True
    max_len: int | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.min_sup, int) or self.min_sup < 1:
            raise MiningError("min_sup must be an integer >= 1")
        if not 0.0 < self.min_conf <= 1.0:
            raise MiningError("min_conf must be in (0, 1]")
        if self.max_len is not None and self.max_len < 1:
            raise MiningError("max_len must be >= 1 when set")


@dataclass(frozen=True)
class FrequentItemsets:
    """All frequent itemsets with their absolute support counts.

    `sets` is sorted by (size, itemset); every itemset is itself sorted.
    """

    sets: tuple[tuple[Itemset, int], ...]
    db_size: int
    min_sup: int

    def max_k(self) -> int:
        return max((len(s) for s, _ in self.sets), default=0)

    def level(self, k: int) -> list[tuple[Itemset, int]]:
        return [(s, c) for s, c in self.sets if len(s) == k]

    def support_map(self) -> dict[Itemset, int]:
        return {s: c for s, c in self.sets}


@dataclass(frozen=True)
class AssociationRule:
    """antecedent -> consequent with fractional support and confidence."""

    antecedent: Itemset
    consequent: Itemset
    support: float
    confidence: float

    def __post_init__(self) -> None:
        if not self.antecedent or not self.consequent:
            raise MiningError("rule sides must be non-empty")
        if set(self.antecedent) & set(self.consequent):
            raise MiningError("rule sides must be disjoint")
        if tuple(sorted(self.antecedent)) != self.antecedent:
            raise MiningError("antecedent must be sorted")
        if tuple(sorted(self.consequent)) != self.consequent:
            raise MiningError("consequent must be sorted")
        if not 0.0 < self.support <= 1.0:
            raise MiningError(f"support {self.support!r} out of range")
        if not 0.0 < self.confidence <= 1.0:
            raise MiningError(f"confidence {self.confidence!r} out of range")


def apriori_gen(prev: Sequence[Itemset]) -> list[Itemset]:
    """Candidates of size k+1 from the frequent k-itemsets.

    Join step pairs itemsets sharing their first k-1 items; prune step drops
    any candidate with an infrequent k-subset. Input itemsets are
    canonicalized (sorted, deduplicated) first; the output is sorted and
    duplicate-free by construction.
    """
    canon = sorted({tuple(sorted(s)) for s in prev})
    if not canon:
        return []
    k = len(canon[0])
    if k < 1 or any(len(s) != k for s in canon):
        raise MiningError("previous level must be non-empty itemsets of equal size")
    prev_set = set(canon)
    out: list[Itemset] = []
    for prefix, group in groupby(canon, key=lambda s: s[:-1]):
        tails = [s[-1] for s in group]
        for i in range(len(tails)):
            for j in range(i + 1, len(tails)):
                cand = prefix + (tails[i], tails[j])
                if all(
                    cand[:m] + cand[m + 1 :] in prev_set for m in range(len(cand))
                ):
                    out.append(cand)
    return out


class _CandidateIndex:
    """Prefix tree over equal-length candidates; None keys mark terminals."""

    def __init__(self, candidates: Sequence[Itemset]):
        self.n = len(candidates)
        self._root: dict = {}
        for ci, cand in enumerate(candidates):
            node = self._root
            for item in cand:
                node = node.setdefault(item, {})
            node[None] = ci

    def contained_in(self, transaction: Itemset) -> list[int]:
        out: list[int] = []
        stack = [(self._root, 0)]
        while stack:
            node, start = stack.pop()
            ci = node.get(None)
            if ci is not None:
                out.append(ci)
                continue
            for i in range(start, len(transaction)):
                child = node.get(transaction[i])
                if child is not None:
                    stack.append((child, i + 1))
        return out


def subset(candidates: Sequence[Itemset], transaction: Itemset) -> list[Itemset]:
    """The candidates wholly contained in the transaction, in input order."""
    if not candidates:
        return []
    index = _CandidateIndex(candidates)
    hits = sorted(index.contained_in(tuple(transaction)))
    return [tuple(candidates[i]) for i in hits]


def _count_chunk(index: _CandidateIndex, transactions: Sequence[Itemset]) -> np.ndarray:
    counts = np.zeros(index.n, dtype=np.int64)
    for t in transactions:
        for ci in index.contained_in(t):
            counts[ci] += 1
    return counts


def _count(
    index: _CandidateIndex,
    transactions: Sequence[Itemset],
    workers: int,
    pool: ThreadPoolExecutor | None,
) -> np.ndarray:
    if pool is None or len(transactions) < 2 * workers:
        return _count_chunk(index, transactions)
    chunks = np.array_split(np.arange(len(transactions)), workers)
    parts = pool.map(
        _count_chunk,
        [index] * len(chunks),
        [[transactions[i] for i in chunk] for chunk in chunks],
    )
    counts = np.zeros(index.n, dtype=np.int64)
    for part in parts:  # summed in chunk order
        counts += part
    return counts


def apriori(
    db: TransactionDb, params: MiningParams, workers: int = 1
) -> FrequentItemsets:
    """All itemsets with support count >= min_sup, level by level."""
    if workers < 1:
        raise MiningError("workers must be >= 1")
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        ones: dict[str, int] = {}
        for t in db.transactions:
            for item in t:
                ones[item] = ones.get(item, 0) + 1
        level = sorted(
            ((item,), c) for item, c in ones.items() if c >= params.min_sup
        )
        sets: list[tuple[Itemset, int]] = list(level)
        k = 2
        while level and (params.max_len is None or k <= params.max_len):
            candidates = apriori_gen([s for s, _ in level])
            if not candidates:
                break
            index = _CandidateIndex(candidates)
            counts = _count(index, db.transactions, workers, pool)
            level = [
                (cand, int(c))
                for cand, c in zip(candidates, counts)
                if c >= params.min_sup
            ]
            sets.extend(level)
            k += 1
    finally:
        if pool is not None:
            pool.shutdown()
    return FrequentItemsets(tuple(sets), len(db), params.min_sup)


def _is_label(item: str) -> bool:
    return item.startswith(LABEL_ITEM_PREFIX)


def generate_rules(
    freq: FrequentItemsets, params: MiningParams
) -> tuple[AssociationRule, ...]:
    """Confidence-filtered rules from the frequent itemsets.

    With the consequent filter on (the default) only rules whose consequent
    is exactly the one label item qualify, and label items never appear in
    antecedents. Output is ordered by confidence desc, support desc, then
    antecedent, so equally good rules land in a stable order.
    """
    support = freq.support_map()
    rules: list[AssociationRule] = []
    for itemset, count in freq.sets:
        if len(itemset) < 2:
            continue
        splits: list[tuple[Itemset, Itemset]] = []
        if params.consequent_filter:
            labels = tuple(i for i in itemset if _is_label(i))
            if len(labels) != 1:
                continue
            antecedent = tuple(i for i in itemset if not _is_label(i))
            splits.append((antecedent, labels))
        else:
            for r in range(1, len(itemset)):
                for cons in combinations(itemset, r):
                    ant = tuple(i for i in itemset if i not in cons)
                    splits.append((ant, cons))
        for antecedent, consequent in splits:
            conf = count / support[antecedent]
            if conf >= params.min_conf:
                rules.append(
                    AssociationRule(
                        antecedent, consequent, count / freq.db_size, conf
                    )
                )
    rules.sort(
        key=lambda r: (-r.confidence, -r.support, r.antecedent, r.consequent)
    )
    return tuple(rules)


def write_itemsets(freq: FrequentItemsets, sink: str | Path | TextIO) -> None:
    """One line per frequent itemset: k, comma-joined items, count."""

    def _emit(fh: TextIO) -> None:
        for itemset, count in freq.sets:
            fh.write(f"{len(itemset)}\t{join_items(itemset)}\t{count}\n")

    _write_text(sink, _emit)


def write_rules(rules: Sequence[AssociationRule], sink: str | Path | TextIO) -> None:
    """One line per rule: antecedent items, consequent items, support,
    confidence. Floats are written exactly (repr)."""

    def _emit(fh: TextIO) -> None:
        for r in rules:
            fh.write(
                f"{join_items(r.antecedent)}\t{join_items(r.consequent)}"
                f"\t{r.support!r}\t{r.confidence!r}\n"
            )

    _write_text(sink, _emit)


def read_rules(source: str | Path | TextIO | Iterable[str]) -> tuple[AssociationRule, ...]:
    """Inverse of write_rules."""
    if isinstance(source, (str, Path)):
        lines: Iterable[str] = Path(source).read_text(encoding="utf-8").splitlines()
    elif hasattr(source, "read"):
        lines = source.read().splitlines()  # type: ignore[union-attr]
    else:
        lines = source
    rules: list[AssociationRule] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ParseError(f"rule line {lineno}: expected 4 tab-separated fields")
        try:
            rules.append(
                AssociationRule(
                    split_items(parts[0]),
                    split_items(parts[1]),
                    float(parts[2]),
                    float(parts[3]),
                )
            )
        except (ValueError, MiningError) as exc:
            raise ParseError(f"rule line {lineno}: {exc}") from None
    return tuple(rules)


def _write_text(sink: str | Path | TextIO, emit) -> None:
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            emit(fh)
    else:
        emit(sink)
