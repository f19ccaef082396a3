"""Discrete AdaBoost over shallow C4.5 trees.

Binary attack-vs-normal boosting with the classical reweighting scheme,
plus the multiway category tree used to name the attack class of flagged
records. Weight invariants are checked numerically on every run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence, TextIO

import numpy as np

from .c45 import (
    DecisionTree,
    FeatureTable,
    TreeParams,
    build_tree,
    tree_from_jsonable,
    tree_to_jsonable,
)

ALPHA_CAP = 0.5 * math.log(1e9)
_TOL = 1e-9


class BoostingError(ValueError):
    """Boosting cannot proceed (bad input, or no usable weak hypothesis)."""


class BoostingInvariantError(BoostingError):
    """A numeric invariant of the reweighting scheme failed."""


@dataclass(frozen=True)
class WeakHypothesis:
    tree: DecisionTree
    alpha: float
    epsilon: float


@dataclass(frozen=True)
class RoundLog:
    t: int
    epsilon: float
    alpha: float
    training_error: float


@dataclass(frozen=True)
class StrongClassifier:
    """Weighted vote of weak trees; sign(0) counts as attack (+1)."""

    rounds: tuple[WeakHypothesis, ...]

    def margin(self, row: Sequence[float | int | str]) -> float:
        return float(
            sum(h.alpha * h.tree.classify(row) for h in self.rounds)
        )

    def predict(self, row: Sequence[float | int | str]) -> int:
        return 1 if self.margin(row) >= 0 else -1

    def margins_many(self, table: FeatureTable) -> np.ndarray:
        total = np.zeros(table.n)
        for h in self.rounds:
            total += h.alpha * np.array(h.tree.classify_many(table), dtype=float)
        return total

    def predict_many(self, table: FeatureTable) -> np.ndarray:
        return np.where(self.margins_many(table) >= 0, 1, -1)


def alpha_for(epsilon: float) -> float:
    """Round weight for an error rate in (0, 0.5)."""
    if not 0.0 < epsilon < 0.5:
        raise BoostingError(f"epsilon must be in (0, 0.5), got {epsilon}")
    return 0.5 * math.log((1.0 - epsilon) / epsilon)


def train_adaboost(
    table: FeatureTable,
    targets: Sequence[int],
    rounds: int,
    weak_params: TreeParams = TreeParams(max_depth=2),
    workers: int = 1,
) -> tuple[StrongClassifier, list[RoundLog]]:
    """Boost for up to `rounds` rounds, returning the vote and its log.

    Per round: fit a weighted tree, measure its weighted error epsilon,
    stop early on a perfect tree (alpha capped at ln(1e9)/2) and discard
    plus stop on epsilon >= 0.5 (weights reset to uniform). A first-round
    hypothesis no better than chance is an error since no vote would
    exist. After each completed round three checks must hold within 1e-9:
    the renormalized weights sum to 1, the freshly reweighted error of the
    current tree is exactly one half, and the ensemble training error is
    bounded by the product of 2*sqrt(eps*(1-eps)) over the uncapped
    rounds. The log records each kept round's epsilon, alpha and the
    cumulative ensemble training error.
    """
    if rounds < 1:
        raise BoostingError("rounds must be >= 1")
    y = np.asarray(targets, dtype=np.int64)
    if y.shape != (table.n,) or not np.all(np.isin(y, (-1, 1))):
        raise BoostingError("targets must be +1/-1, one per record")
    if table.n == 0:
        raise BoostingError("cannot boost an empty table")

    n = table.n
    w = np.full(n, 1.0 / n)
    kept: list[WeakHypothesis] = []
    log: list[RoundLog] = []
    margins = np.zeros(n)
    bound = 1.0
    y_list = [int(v) for v in y]

    for t in range(1, rounds + 1):
        tree = build_tree(table, y_list, weak_params, weights=w, workers=workers)
        pred = np.array(tree.classify_many(table), dtype=np.int64)
        miss = pred != y
        eps = float(w[miss].sum())

        if eps >= 0.5:
            if not kept:
                raise BoostingError(
                    f"round 1 weak hypothesis no better than chance (epsilon={eps:.6f})"
                )
            w = np.full(n, 1.0 / n)
            break

        if eps == 0.0:
            alpha = ALPHA_CAP
            kept.append(WeakHypothesis(tree, alpha, eps))
            margins += alpha * pred
            err = _ensemble_error(margins, y)
            log.append(RoundLog(t, eps, alpha, err))
            break

        alpha = alpha_for(eps)
        w = w * np.exp(-alpha * y * pred)
        w = w / w.sum()
        _check_invariants(w, miss, eps)
        kept.append(WeakHypothesis(tree, alpha, eps))
        margins += alpha * pred
        err = _ensemble_error(margins, y)
        bound *= 2.0 * math.sqrt(eps * (1.0 - eps))
        if err > bound + _TOL:
            raise BoostingInvariantError(
                f"round {t}: training error {err:.9f} exceeds bound {bound:.9f}"
            )
        log.append(RoundLog(t, eps, alpha, err))

    return StrongClassifier(tuple(kept)), log


def _ensemble_error(margins: np.ndarray, y: np.ndarray) -> float:
    pred = np.where(margins >= 0, 1, -1)
    return float(np.mean(pred != y))


def _check_invariants(w: np.ndarray, miss: np.ndarray, eps: float) -> None:
    total = float(w.sum())
    if abs(total - 1.0) > _TOL:
        raise BoostingInvariantError(f"weights sum to {total!r} after renormalization")
    updated_err = float(w[miss].sum())
    if abs(updated_err - 0.5) > _TOL:
        raise BoostingInvariantError(
            f"reweighted error of current hypothesis is {updated_err!r}, expected 0.5"
        )


def write_training_log(log: Sequence[RoundLog], sink: str | Path | TextIO) -> None:
    """Tab-separated per-round log: t, epsilon, alpha, training error."""

    def _emit(fh: TextIO) -> None:
        fh.write("t\tepsilon\talpha\ttraining_error\n")
        for entry in log:
            fh.write(
                f"{entry.t}\t{entry.epsilon!r}\t{entry.alpha!r}\t{entry.training_error!r}\n"
            )

    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            _emit(fh)
    else:
        _emit(sink)


@dataclass(frozen=True)
class CategoryModel:
    """Multiway tree naming the attack category of a flagged record."""

    tree: DecisionTree
    categories_present: tuple[str, ...]


def train_category_tree(
    table: FeatureTable,
    categories: Sequence[str],
    params: TreeParams = TreeParams(),
    workers: int = 1,
) -> CategoryModel:
    """Fit the category tree on attack records only.

    Categories absent from the training data are simply recorded as absent
    in the model metadata; the tree can never emit them.
    """
    present = tuple(sorted(set(categories)))
    tree = build_tree(table, list(categories), params, workers=workers)
    return CategoryModel(tree, present)


def detect_and_categorize(
    strong: StrongClassifier,
    category_model: CategoryModel,
    row: Sequence[float | int | str],
) -> str:
    """Two-stage verdict: 'Normal' unless flagged, else the category tree's
    attack category."""
    if strong.predict(row) < 0:
        return "Normal"
    return str(category_model.tree.classify(row))


def model_to_jsonable(model: StrongClassifier) -> dict:
    return {
        "rounds": [
            {
                "alpha": h.alpha,
                "epsilon": h.epsilon,
                "tree": tree_to_jsonable(h.tree),
            }
            for h in model.rounds
        ]
    }


def model_from_jsonable(data: Mapping) -> StrongClassifier:
    rounds = tuple(
        WeakHypothesis(
            tree_from_jsonable(entry["tree"]),
            float(entry["alpha"]),
            float(entry["epsilon"]),
        )
        for entry in data["rounds"]
    )
    return StrongClassifier(rounds)


def category_model_to_jsonable(model: CategoryModel) -> dict:
    return {
        "categories_present": list(model.categories_present),
        "tree": tree_to_jsonable(model.tree),
    }


def category_model_from_jsonable(data: Mapping) -> CategoryModel:
    return CategoryModel(
        tree_from_jsonable(data["tree"]),
        tuple(data["categories_present"]),
    )


def save_model(model: StrongClassifier, sink: str | Path | TextIO) -> None:
    _dump_json(model_to_jsonable(model), sink)


def load_model(source: str | Path | TextIO) -> StrongClassifier:
    return model_from_jsonable(_load_json(source))


def save_category_model(model: CategoryModel, sink: str | Path | TextIO) -> None:
    _dump_json(category_model_to_jsonable(model), sink)


def load_category_model(source: str | Path | TextIO) -> CategoryModel:
    return category_model_from_jsonable(_load_json(source))


def _dump_json(data: dict, sink: str | Path | TextIO) -> None:
    text = json.dumps(data, sort_keys=True, separators=(",", ":"))
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text + "\n", encoding="utf-8")
    else:
        sink.write(text + "\n")


def _load_json(source: str | Path | TextIO):
    if isinstance(source, (str, Path)):
        return json.loads(Path(source).read_text(encoding="utf-8"))
    return json.loads(source.read())
