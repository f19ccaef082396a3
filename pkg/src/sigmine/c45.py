"""Weighted C4.5 decision trees.

Gain-ratio splits in bits, numeric thresholds at midpoints of consecutive
distinct values, multiway categorical splits with a default branch for
unseen values. Sample weights are first-class so the tree can serve as a
boosting weak learner.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .dataset import BINARY, CATEGORICAL, CONTINUOUS, Dataset

KIND_NUM = "num"
KIND_CAT = "cat"

ClassValue = int | str


class TreeError(ValueError):
    """Invalid learner input (bad params, bad weights, empty data)."""


@dataclass(frozen=True)
class TreeParams:
    """Growth limits. max_depth=None grows until pure or out of splits."""

    max_depth: int | None = None
    min_samples_per_leaf: int = 1
    min_gain: float = 0.0

    def __post_init__(self) -> None:
        if self.max_depth is not None and self.max_depth < 1:
            raise TreeError("max_depth must be >= 1 when set")
        if self.min_samples_per_leaf < 1:
            raise TreeError("min_samples_per_leaf must be >= 1")
        if self.min_gain < 0:
            raise TreeError("min_gain must be >= 0")


@dataclass(frozen=True)
class FeatureTable:
    """Columnar feature matrix: float columns for numeric features, object
    columns of strings for categorical ones."""

    kinds: tuple[str, ...]
    columns: tuple[np.ndarray, ...]
    n: int

    @classmethod
    def from_rows(
        cls, rows: Sequence[Sequence[float | int | str]], kinds: Sequence[str]
    ) -> "FeatureTable":
        kinds = tuple(kinds)
        if any(k not in (KIND_NUM, KIND_CAT) for k in kinds):
            raise TreeError(f"feature kinds must be {KIND_NUM!r} or {KIND_CAT!r}")
        cols: list[np.ndarray] = []
        for j, kind in enumerate(kinds):
            vals = [row[j] for row in rows]
            if kind == KIND_NUM:
                cols.append(np.array(vals, dtype=float))
            else:
                cols.append(np.array(vals, dtype=object))
        return cls(kinds, tuple(cols), len(rows))

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "FeatureTable":
        kinds = tuple(
            KIND_CAT if f.kind == CATEGORICAL else KIND_NUM
            for f in dataset.schema.features
        )
        return cls.from_rows([rec.values for rec in dataset.records], kinds)

    def row(self, i: int) -> tuple[float | str, ...]:
        return tuple(col[i] for col in self.columns)


@dataclass(frozen=True)
class Leaf:
    cls: ClassValue
    dist: tuple[tuple[ClassValue, float], ...]


@dataclass(frozen=True)
class NumNode:
    feature: int
    threshold: float
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class CatNode:
    feature: int
    children: tuple[tuple[str, "Node"], ...]
    default: str
    _map: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_map", dict(self.children))

    def child_for(self, value: str) -> "Node":
        got = self._map.get(value)
        return got if got is not None else self._map[self.default]


Node = Leaf | NumNode | CatNode


@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    kind: str
    threshold: float | None
    gain: float
    split_info: float
    gain_ratio: float


@dataclass(frozen=True)
class DecisionTree:
    root: Node
    kinds: tuple[str, ...]
    class_domain: tuple[ClassValue, ...]

    def classify(self, row: Sequence[float | int | str]) -> ClassValue:
        node = self.root
        while not isinstance(node, Leaf):
            if isinstance(node, NumNode):
                node = node.left if float(row[node.feature]) <= node.threshold else node.right
            else:
                node = node.child_for(row[node.feature])
        return node.cls

    def classify_many(self, table: FeatureTable) -> list[ClassValue]:
        return [self.classify(table.row(i)) for i in range(table.n)]

    def depth(self) -> int:
        def d(node: Node) -> int:
            if isinstance(node, Leaf):
                return 0
            if isinstance(node, NumNode):
                return 1 + max(d(node.left), d(node.right))
            return 1 + max(d(child) for _, child in node.children)

        return d(self.root)

    def n_leaves(self) -> int:
        def c(node: Node) -> int:
            if isinstance(node, Leaf):
                return 1
            if isinstance(node, NumNode):
                return c(node.left) + c(node.right)
            return sum(c(child) for _, child in node.children)

        return c(self.root)


def entropy(counts: Sequence[float]) -> float:
    """Shannon entropy in bits of a count (or weight-mass) vector.

    Zero entries contribute nothing; an all-zero or negative vector is an
    error.
    """
    arr = np.asarray(counts, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise TreeError("counts must be a non-empty 1-d sequence")
    if np.any(arr < 0):
        raise TreeError("counts must be non-negative")
    total = arr.sum()
    if total <= 0:
        raise TreeError("counts must have positive mass")
    p = arr[arr > 0] / total
    return float(-(p * np.log2(p)).sum())


def _mass_entropy(masses: np.ndarray) -> float:
    total = masses.sum()
    p = masses[masses > 0] / total
    return float(-(p * np.log2(p)).sum())


def _class_masses(y_idx: np.ndarray, w: np.ndarray, n_classes: int) -> np.ndarray:
    return np.bincount(y_idx, weights=w, minlength=n_classes)


def _numeric_candidate(
    values: np.ndarray,
    y_idx: np.ndarray,
    w: np.ndarray,
    n_classes: int,
    parent_h: float,
    params: TreeParams,
    feature: int,
) -> SplitCandidate | None:
    n = len(values)
    if n < 2 * params.min_samples_per_leaf:
        return None
    order = np.argsort(values, kind="stable")
    v = values[order]
    m = np.zeros((n, n_classes))
    m[np.arange(n), y_idx[order]] = w[order]
    cum = np.cumsum(m, axis=0)
    total = cum[-1]
    big_w = total.sum()

    pos = np.nonzero(v[:-1] < v[1:])[0]  # split between pos and pos+1
    if params.min_samples_per_leaf > 1:
        k = params.min_samples_per_leaf
        pos = pos[(pos + 1 >= k) & (n - pos - 1 >= k)]
    if len(pos) == 0:
        return None

    left = cum[pos]
    right = total - left
    wl = left.sum(axis=1)
    wr = right.sum(axis=1)
    ok = (wl > 0) & (wr > 0)
    if not np.any(ok):
        return None
    pos, left, right, wl, wr = pos[ok], left[ok], right[ok], wl[ok], wr[ok]

    def h_rows(mass: np.ndarray, tot: np.ndarray) -> np.ndarray:
        p = mass / tot[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0, p * np.log2(p), 0.0)
        return -terms.sum(axis=1)

    gain = parent_h - (wl * h_rows(left, wl) + wr * h_rows(right, wr)) / big_w
    pl, pr = wl / big_w, wr / big_w
    split_info = -(pl * np.log2(pl) + pr * np.log2(pr))

    valid = (gain > 0.0) & (gain >= params.min_gain) & (split_info > 0)
    if not np.any(valid):
        return None
    ratio = np.where(valid, gain / split_info, -np.inf)
    best = int(np.argmax(ratio))  # first maximum, so ties pick the lowest threshold
    i = int(pos[best])
    threshold = (v[i] + v[i + 1]) / 2.0
    return SplitCandidate(
        feature, KIND_NUM, float(threshold),
        float(gain[best]), float(split_info[best]), float(ratio[best]),
    )


def _categorical_candidate(
    values: np.ndarray,
    y_idx: np.ndarray,
    w: np.ndarray,
    n_classes: int,
    parent_h: float,
    params: TreeParams,
    feature: int,
) -> SplitCandidate | None:
    groups: dict[str, list[int]] = {}
    for i, val in enumerate(values):
        groups.setdefault(val, []).append(i)
    if len(groups) < 2:
        return None
    if min(len(g) for g in groups.values()) < params.min_samples_per_leaf:
        return None

    big_w = w.sum()
    weighted_h = 0.0
    split_info = 0.0
    for val in sorted(groups):
        idx = np.array(groups[val])
        masses = _class_masses(y_idx[idx], w[idx], n_classes)
        wv = masses.sum()
        if wv <= 0:
            return None
        weighted_h += (wv / big_w) * _mass_entropy(masses)
        pv = wv / big_w
        split_info -= pv * np.log2(pv)
    gain = parent_h - weighted_h
    if not (gain > 0.0 and gain >= params.min_gain and split_info > 0):
        return None
    return SplitCandidate(
        feature, KIND_CAT, None, float(gain), float(split_info), float(gain / split_info)
    )


def best_split(
    table: FeatureTable,
    target: Sequence[ClassValue],
    weights: Sequence[float] | None,
    feature: int,
    params: TreeParams = TreeParams(),
) -> SplitCandidate | None:
    """Best admissible split of the whole table on one feature.

    Admissible means information gain strictly positive and at least
    min_gain, positive split information, and every branch at least
    min_samples_per_leaf records. Returns the candidate with the highest
    gain ratio, or None. For a numeric feature, ties on gain ratio resolve
    to the lowest threshold.
    """
    domain, y_idx, w = _prepare_targets(table, target, weights)
    idx = np.arange(table.n)
    parent_h = _mass_entropy(_class_masses(y_idx, w, len(domain)))
    return _feature_candidate(table, y_idx, w, idx, len(domain), parent_h, params, feature)


def _feature_candidate(
    table: FeatureTable,
    y_idx: np.ndarray,
    w: np.ndarray,
    idx: np.ndarray,
    n_classes: int,
    parent_h: float,
    params: TreeParams,
    feature: int,
) -> SplitCandidate | None:
    col = table.columns[feature][idx]
    yi = y_idx[idx]
    wi = w[idx]
    if table.kinds[feature] == KIND_NUM:
        return _numeric_candidate(col, yi, wi, n_classes, parent_h, params, feature)
    return _categorical_candidate(col, yi, wi, n_classes, parent_h, params, feature)


def _prepare_targets(
    table: FeatureTable,
    target: Sequence[ClassValue],
    weights: Sequence[float] | None,
) -> tuple[tuple[ClassValue, ...], np.ndarray, np.ndarray]:
    if table.n == 0:
        raise TreeError("cannot learn from an empty table")
    if len(target) != table.n:
        raise TreeError("target length does not match table")
    domain = tuple(sorted(set(target)))
    lut = {c: i for i, c in enumerate(domain)}
    y_idx = np.array([lut[c] for c in target], dtype=np.intp)
    if weights is None:
        w = np.full(table.n, 1.0 / table.n)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (table.n,):
            raise TreeError("weights length does not match table")
        if np.any(w <= 0) or not np.isfinite(w).all():
            raise TreeError("sample weights must be positive and finite")
    return domain, y_idx, w


def build_tree(
    table: FeatureTable,
    target: Sequence[ClassValue],
    params: TreeParams = TreeParams(),
    weights: Sequence[float] | None = None,
    workers: int = 1,
) -> DecisionTree:
    """Grow a C4.5 tree.

    At each node every feature's best admissible split competes on gain
    ratio; the strictly greater candidate wins, so ties go to the earlier
    feature index. Doubling every weight changes no decision. With more than
    one worker the per-feature search is evaluated in feature blocks whose
    results are reduced in block order, so the tree is identical at any
    worker count.
    """
    if workers < 1:
        raise TreeError("workers must be >= 1")
    domain, y_idx, w = _prepare_targets(table, target, weights)
    n_classes = len(domain)
    n_features = len(table.kinds)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def node_candidates(idx: np.ndarray, parent_h: float) -> SplitCandidate | None:
        def scan(features: Sequence[int]) -> SplitCandidate | None:
            found: SplitCandidate | None = None
            for f in features:
                cand = _feature_candidate(
                    table, y_idx, w, idx, n_classes, parent_h, params, f
                )
                if cand is not None and (found is None or cand.gain_ratio > found.gain_ratio):
                    found = cand
            return found

        if pool is None or n_features < 2 * workers:
            return scan(range(n_features))
        blocks = np.array_split(np.arange(n_features), workers)
        results = list(pool.map(scan, [b.tolist() for b in blocks]))
        found: SplitCandidate | None = None
        for cand in results:
            if cand is not None and (found is None or cand.gain_ratio > found.gain_ratio):
                found = cand
        return found

    def leaf_of(idx: np.ndarray) -> Leaf:
        masses = _class_masses(y_idx[idx], w[idx], n_classes)
        best = int(np.argmax(masses))  # ties pick the earliest class in the domain
        dist = tuple((domain[i], float(masses[i])) for i in range(n_classes))
        return Leaf(domain[best], dist)

    def grow(idx: np.ndarray, depth: int) -> Node:
        masses = _class_masses(y_idx[idx], w[idx], n_classes)
        if np.count_nonzero(masses) == 1:
            return leaf_of(idx)
        if params.max_depth is not None and depth >= params.max_depth:
            return leaf_of(idx)
        if len(idx) < 2 * params.min_samples_per_leaf:
            # no admissible split can exist; avoid the scan
            return leaf_of(idx)
        parent_h = _mass_entropy(masses)
        cand = node_candidates(idx, parent_h)
        if cand is None:
            return leaf_of(idx)
        col = table.columns[cand.feature][idx]
        if cand.kind == KIND_NUM:
            mask = col <= cand.threshold
            left = grow(idx[mask], depth + 1)
            right = grow(idx[~mask], depth + 1)
            return NumNode(cand.feature, cand.threshold, left, right)
        children: list[tuple[str, Node]] = []
        heaviest = None
        for val in sorted({str(x) for x in col}):
            sub = idx[col == val]
            children.append((val, grow(sub, depth + 1)))
            mass = float(w[sub].sum())
            if heaviest is None or mass > heaviest[1]:
                heaviest = (val, mass)
        assert heaviest is not None
        return CatNode(cand.feature, tuple(children), heaviest[0])

    try:
        root = grow(np.arange(table.n), 0)
    finally:
        if pool is not None:
            pool.shutdown()
    return DecisionTree(root, table.kinds, domain)


def _node_to_jsonable(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {
            "type": "leaf",
            "class": node.cls,
            "dist": [[c, m] for c, m in node.dist],
        }
    if isinstance(node, NumNode):
        return {
            "type": "num",
            "feature": node.feature,
            "threshold": node.threshold,
            "left": _node_to_jsonable(node.left),
            "right": _node_to_jsonable(node.right),
        }
    return {
        "type": "cat",
        "feature": node.feature,
        "default": node.default,
        "children": [[v, _node_to_jsonable(c)] for v, c in node.children],
    }


def _node_from_jsonable(data: Mapping) -> Node:
    kind = data["type"]
    if kind == "leaf":
        return Leaf(data["class"], tuple((c, float(m)) for c, m in data["dist"]))
    if kind == "num":
        return NumNode(
            int(data["feature"]),
            float(data["threshold"]),
            _node_from_jsonable(data["left"]),
            _node_from_jsonable(data["right"]),
        )
    if kind == "cat":
        return CatNode(
            int(data["feature"]),
            tuple((v, _node_from_jsonable(c)) for v, c in data["children"]),
            data["default"],
        )
    raise TreeError(f"unknown node type {kind!r}")


def tree_to_jsonable(tree: DecisionTree) -> dict:
    return {
        "kinds": list(tree.kinds),
        "class_domain": list(tree.class_domain),
        "root": _node_to_jsonable(tree.root),
    }


def tree_from_jsonable(data: Mapping) -> DecisionTree:
    return DecisionTree(
        _node_from_jsonable(data["root"]),
        tuple(data["kinds"]),
        tuple(data["class_domain"]),
    )


def save_tree(tree: DecisionTree, sink: str | Path | TextIO) -> None:
    text = json.dumps(tree_to_jsonable(tree), sort_keys=True, separators=(",", ":"))
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text + "\n", encoding="utf-8")
    else:
        sink.write(text + "\n")


def load_tree(source: str | Path | TextIO) -> DecisionTree:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    return tree_from_jsonable(json.loads(text))
