"""Signature mining and evasion testing for connection-record intrusion data."""

from .dataset import (
    CATEGORIES,
    ATTACK_CATEGORIES,
    ConnectionRecord,
    Dataset,
    DiscretizationCuts,
    ParseError,
    Schema,
    TransactionDb,
    discretize,
    kdd_schema,
    load_taxonomy,
    map_label_to_category,
    parse_kdd,
    read_transactions,
    split,
    write_transactions,
)
from .c45 import DecisionTree, FeatureTable, TreeParams, best_split, build_tree, entropy
from .adaboost import StrongClassifier, train_adaboost, train_category_tree
from .apriori import (
    AssociationRule,
    FrequentItemsets,
    MiningParams,
    apriori,
    apriori_gen,
    generate_rules,
    subset,
)
from .signature import (
    Predicate,
    RuleSet,
    SignatureRule,
    compile_rules,
    export_snort,
    match,
    parse_snort,
)
from .evasion import (
    MutationBudget,
    ablate_rules,
    class_envelopes,
    evade_record,
    run_evasion_campaign,
)
from .metrics import ConfusionMatrix, EvaluationReport, evaluate

__version__ = "0.1.0"

__all__ = [
    "ATTACK_CATEGORIES",
    "AssociationRule",
    "CATEGORIES",
    "ConfusionMatrix",
    "ConnectionRecord",
    "Dataset",
    "DecisionTree",
    "DiscretizationCuts",
    "EvaluationReport",
    "FeatureTable",
    "FrequentItemsets",
    "MiningParams",
    "MutationBudget",
    "ParseError",
    "Predicate",
    "RuleSet",
    "Schema",
    "SignatureRule",
    "StrongClassifier",
    "TransactionDb",
    "TreeParams",
    "ablate_rules",
    "apriori",
    "apriori_gen",
    "best_split",
    "build_tree",
    "class_envelopes",
    "compile_rules",
    "discretize",
    "entropy",
    "evade_record",
    "evaluate",
    "export_snort",
    "generate_rules",
    "kdd_schema",
    "load_taxonomy",
    "map_label_to_category",
    "match",
    "parse_kdd",
    "parse_snort",
    "read_transactions",
    "run_evasion_campaign",
    "split",
    "subset",
    "train_adaboost",
    "train_category_tree",
    "write_transactions",
]
