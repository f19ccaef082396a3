from __future__ import annotations

import pytest

from sigmine.dataset import (
    ConnectionRecord,
    Dataset,
    FeatureSpec,
    Schema,
    kdd_schema,
    load_taxonomy,
    parse_kdd,
)
from sigmine.synth import sample_lines

# A schema small enough to reason about by hand but shaped like the real
# one: numeric, categorical and binary features all present.
TINY_FEATURES = (
    FeatureSpec("duration", "continuous"),
    FeatureSpec("service", "categorical"),
    FeatureSpec("src_bytes", "continuous"),
    FeatureSpec("logged_in", "binary"),
)


def tiny_schema(vocab=("http", "smtp", "ftp")) -> Schema:
    return Schema(TINY_FEATURES, {"service": tuple(vocab)})


def tiny_record(duration, service, src_bytes, logged_in, label, category):
    return ConnectionRecord(
        (float(duration), service, float(src_bytes), int(logged_in)),
        label,
        category,
    )


def tiny_dataset(rows) -> Dataset:
    """rows: (duration, service, src_bytes, logged_in, label, category)."""
    return Dataset(tiny_schema(), tuple(tiny_record(*r) for r in rows))


@pytest.fixture(scope="session")
def taxonomy():
    return load_taxonomy()


@pytest.fixture(scope="session")
def small_sample():
    """A few hundred synthetic records parsed once for the whole session."""
    mix = (
        ("normal", 120),
        ("smurf", 80),
        ("neptune", 60),
        ("portsweep", 25),
        ("ipsweep", 25),
        ("guess_passwd", 20),
        ("warezclient", 15),
        ("buffer_overflow", 8),
        ("rootkit", 4),
    )
    return parse_kdd(sample_lines(seed=424241, mix=mix), kdd_schema())
