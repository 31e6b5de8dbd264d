from __future__ import annotations

import pytest

from hopharness import synthkg
from hopharness.kg import TripleStore


@pytest.fixture(scope="session")
def tiny_kg() -> TripleStore:
    """Hand-built world small enough to verify every query by eye.

    Relations: ruler(country -> person), river(country -> river).
    Attributes: calling_code on countries, accession date on rulers.
    """
    import datetime as dt

    names = {
        "c1": "Mali",
        "c2": "Niger",
        "c3": "Benin",
        "p1": "Aria Stone",
        "p2": "Bela Frost",
        "r1": "Long River",
    }
    triples = [
        ("c1", "ruler", "p1"),
        ("c2", "ruler", "p2"),
        ("c3", "ruler", "p2"),
        ("c1", "river", "r1"),
        ("c2", "river", "r1"),
        ("c3", "river", "r1"),
    ]
    attributes = [
        ("c1", "calling_code", 223),
        ("c2", "calling_code", 227),
        ("c3", "calling_code", 229),
        ("p1", "accession", dt.date(1990, 5, 1)),
        ("p2", "accession", dt.date(2001, 7, 9)),
    ]
    return TripleStore(names, triples, attributes)


@pytest.fixture(scope="session")
def synth_kg() -> TripleStore:
    return synthkg.build(7, 120, 10, 2)


@pytest.fixture(scope="session")
def synth_examples(synth_kg):
    examples = []
    for qtype in synthkg.QTYPES:
        examples.extend(synthkg.gen_examples(synth_kg, qtype, 30, 3))
    return examples
