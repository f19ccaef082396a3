"""Frequent itemset mining, candidate generation, rules, dump formats."""

from __future__ import annotations

import io

import numpy as np
import pytest

from sigmine.apriori import (
    AssociationRule,
    MiningError,
    MiningParams,
    apriori,
    apriori_gen,
    generate_rules,
    read_rules,
    subset,
    write_itemsets,
    write_rules,
)
from sigmine.dataset import ParseError, TransactionDb

from oracles import brute_force_frequent, definitional_candidates, random_transaction_db


def db_of(*transactions):
    return TransactionDb.from_transactions(transactions)


TEXTBOOK = db_of(
    ["A", "B", "C"], ["A", "B"], ["A", "C"], ["B", "C"], ["A", "B", "C"]
)


class TestAprioriGen:
    def test_join_produces_abc(self):
        assert apriori_gen([("A", "B"), ("A", "C"), ("B", "C")]) == [("A", "B", "C")]

    def test_prune_kills_abc_without_bc(self):
        assert apriori_gen([("A", "B"), ("A", "C")]) == []

    def test_three_items_from_singletons(self):
        assert apriori_gen([("A",), ("B",), ("C",)]) == [
            ("A", "B"),
            ("A", "C"),
            ("B", "C"),
        ]

    def test_input_canonicalized(self):
        # unsorted itemsets and duplicates are tolerated on input
        assert apriori_gen([("B", "A"), ("C", "A"), ("C", "B"), ("A", "B")]) == [
            ("A", "B", "C")
        ]

    def test_empty_input(self):
        assert apriori_gen([]) == []

    def test_mixed_sizes_rejected(self):
        with pytest.raises(MiningError):
            apriori_gen([("A",), ("A", "B")])

    def test_matches_definition_randomly(self):
        rng = np.random.default_rng(13)
        for _ in range(30):
            n_items = int(rng.integers(2, 7))
            k = int(rng.integers(1, n_items))
            universe = [f"i{j}" for j in range(n_items)]
            from itertools import combinations

            all_k = list(combinations(universe, k))
            picked = [
                all_k[j]
                for j in rng.choice(
                    len(all_k), size=int(rng.integers(0, len(all_k) + 1)), replace=False
                )
            ]
            assert apriori_gen(picked) == definitional_candidates(picked)


class TestSubset:
    def test_contained_candidates(self):
        cands = [("A", "B"), ("A", "C"), ("B", "D")]
        assert subset(cands, ("A", "B", "C")) == [("A", "B"), ("A", "C")]

    def test_no_candidates(self):
        assert subset([], ("A",)) == []

    def test_matches_naive_containment(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            db = random_transaction_db(rng, max_items=6, max_transactions=8)
            universe = sorted(db.item_universe)
            from itertools import combinations

            k = int(rng.integers(1, max(2, len(universe))))
            cands = list(combinations(universe, min(k, len(universe))))
            for t in db.transactions:
                naive = [c for c in cands if set(c) <= set(t)]
                assert subset(cands, t) == naive


class TestApriori:
    def test_textbook_levels(self):
        freq = apriori(TEXTBOOK, MiningParams(min_sup=3, min_conf=0.5))
        assert freq.level(1) == [(("A",), 4), (("B",), 4), (("C",), 4)]
        assert freq.level(2) == [
            (("A", "B"), 3),
            (("A", "C"), 3),
            (("B", "C"), 3),
        ]
        assert freq.level(3) == []
        assert freq.max_k() == 2
        assert freq.db_size == 5

    def test_single_transaction_yields_all_subsets(self):
        db = db_of(["Dos", "R2L", "U2R"])
        freq = apriori(db, MiningParams(min_sup=1, min_conf=1.0))
        assert len(freq.sets) == 7

    def test_min_sup_above_db_size_is_empty(self):
        freq = apriori(TEXTBOOK, MiningParams(min_sup=6, min_conf=0.5))
        assert freq.sets == ()
        assert freq.max_k() == 0

    def test_max_len_stops_expansion(self):
        freq = apriori(TEXTBOOK, MiningParams(min_sup=1, min_conf=0.5, max_len=1))
        assert freq.max_k() == 1

    def test_matches_brute_force(self):
        rng = np.random.default_rng(31)
        for _ in range(25):
            db = random_transaction_db(rng, max_items=6, max_transactions=12)
            min_sup = int(rng.integers(1, len(db) + 1))
            freq = apriori(db, MiningParams(min_sup=min_sup, min_conf=0.5))
            assert list(freq.sets) == brute_force_frequent(db, min_sup)

    def test_support_map(self):
        freq = apriori(TEXTBOOK, MiningParams(min_sup=3, min_conf=0.5))
        assert freq.support_map()[("A", "B")] == 3

    def test_params_validation(self):
        with pytest.raises(MiningError):
            MiningParams(min_sup=0, min_conf=0.5)
        with pytest.raises(MiningError):
            MiningParams(min_sup=2.5, min_conf=0.5)  # type: ignore[arg-type]
        with pytest.raises(MiningError):
            MiningParams(min_sup=1, min_conf=0.0)
        with pytest.raises(MiningError):
            MiningParams(min_sup=1, min_conf=1.5)
        with pytest.raises(MiningError):
            MiningParams(min_sup=1, min_conf=0.5, max_len=0)
        with pytest.raises(MiningError):
            apriori(TEXTBOOK, MiningParams(min_sup=1, min_conf=0.5), workers=0)

    def test_workers_identical_output(self):
        rng = np.random.default_rng(37)
        for _ in range(5):
            db = random_transaction_db(rng)
            params = MiningParams(min_sup=2, min_conf=0.5)
            assert apriori(db, params, workers=1) == apriori(db, params, workers=3)


class TestGenerateRules:
    def test_textbook_confidence(self):
        # A -> B holds in 3 of A's 4 transactions
        freq = apriori(TEXTBOOK, MiningParams(min_sup=3, min_conf=0.75))
        rules = generate_rules(
            freq, MiningParams(min_sup=3, min_conf=0.75, consequent_filter=False)
        )
        ab = [r for r in rules if r.antecedent == ("A",) and r.consequent == ("B",)]
        assert len(ab) == 1
        assert ab[0].confidence == pytest.approx(0.75)
        assert ab[0].support == pytest.approx(3 / 5)

    def test_min_conf_cuts(self):
        freq = apriori(TEXTBOOK, MiningParams(min_sup=3, min_conf=0.8))
        rules = generate_rules(
            freq, MiningParams(min_sup=3, min_conf=0.8, consequent_filter=False)
        )
        assert rules == ()

    def test_consequent_filter_label_only(self):
        db = db_of(
            ["f=1", "g=2", "label=smurf"],
            ["f=1", "g=2", "label=smurf"],
            ["f=1", "g=3", "label=neptune"],
        )
        params = MiningParams(min_sup=2, min_conf=0.6)
        rules = generate_rules(apriori(db, params), params)
        assert rules
        for r in rules:
            assert len(r.consequent) == 1
            assert r.consequent[0].startswith("label=")
            assert not any(i.startswith("label=") for i in r.antecedent)

    def test_ordering_confidence_then_support(self):
        db = db_of(
            ["a", "label=x"],
            ["a", "label=x"],
            ["b", "label=x"],
            ["b", "label=y"],
            ["c", "label=y"],
            ["c", "label=y"],
            ["c", "label=y"],
        )
        params = MiningParams(min_sup=1, min_conf=0.5)
        rules = generate_rules(apriori(db, params), params)
        keys = [(-r.confidence, -r.support, r.antecedent, r.consequent) for r in rules]
        assert keys == sorted(keys)
        # conf 1.0 rules first; among them the better supported one leads
        assert rules[0].antecedent == ("c",)

    def test_rule_validation(self):
        with pytest.raises(MiningError):
            AssociationRule((), ("x",), 0.5, 0.5)
        with pytest.raises(MiningError):
            AssociationRule(("a",), ("a",), 0.5, 0.5)
        with pytest.raises(MiningError):
            AssociationRule(("b", "a"), ("x",), 0.5, 0.5)
        with pytest.raises(MiningError):
            AssociationRule(("a",), ("x",), 0.0, 0.5)
        with pytest.raises(MiningError):
            AssociationRule(("a",), ("x",), 0.5, 1.0001)


class TestDumps:
    def test_itemsets_format(self):
        freq = apriori(TEXTBOOK, MiningParams(min_sup=3, min_conf=0.5))
        buf = io.StringIO()
        write_itemsets(freq, buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "1\tA\t4"
        assert "2\tA,B\t3" in lines

    def test_rules_round_trip(self):
        rules = (
            AssociationRule(("service=http",), ("label=back",), 0.25, 0.9),
            AssociationRule(
                ("flag=SF", "src_bytes∈[520,1032)"),
                ("label=smurf",),
                1 / 3,
                0.8125,
            ),
        )
        buf = io.StringIO()
        write_rules(rules, buf)
        assert read_rules(io.StringIO(buf.getvalue())) == rules

    def test_range_items_survive_the_comma_field(self):
        rule = AssociationRule(
            ("count∈[0,100)", "src_bytes∈[520,1032)"), ("label=smurf",), 0.5, 1.0
        )
        buf = io.StringIO()
        write_rules([rule], buf)
        (back,) = read_rules(io.StringIO(buf.getvalue()))
        assert back.antecedent == rule.antecedent
        assert back.support == rule.support

    def test_read_rules_errors(self):
        with pytest.raises(ParseError, match="4 tab-separated"):
            read_rules(["a\tb\t0.5"])
        with pytest.raises(ParseError, match="line 1"):
            read_rules(["b,a\tlabel=x\t0.5\t0.5"])  # unsorted antecedent
        with pytest.raises(ParseError):
            read_rules(["a\tlabel=x\tnot-a-number\t0.5"])

    def test_empty_dumps(self):
        buf = io.StringIO()
        write_rules((), buf)
        assert buf.getvalue() == ""
        assert read_rules(io.StringIO("")) == ()
