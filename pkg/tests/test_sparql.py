from __future__ import annotations

import datetime as dt

import pytest

from hopharness import sparql
from hopharness.corpus import EntityLexicon
from hopharness.errors import SparqlError

PREFIXED = "PREFIX ns: <http://synth.example/>\n"

COMPOSITION_QUERY = PREFIXED + (
    "SELECT DISTINCT ?x WHERE { ns:c1 ns:ruler ?mid . ?mid ns:accession ?x . }"
)


def test_parse_minimal_query():
    query = sparql.parse("SELECT ?x WHERE { ?x ?p ?o }")
    assert len(query.patterns) == 1
    assert query.select_vars == ("x",)
    assert not query.distinct


def test_parse_two_pattern_composition_query():
    query = sparql.parse(COMPOSITION_QUERY)
    assert len(query.patterns) == 2
    assert query.select_vars == ("x",)
    assert query.distinct


def test_parse_ordering_against_hand_built_ast():
    text = PREFIXED + "SELECT ?x WHERE { ?x ns:calling_code ?n . } ORDER BY ASC(?n) LIMIT 1"
    query = sparql.parse(text)
    expected = sparql.SparqlQuery(
        prefixes=(("ns", "http://synth.example/"),),
        select_vars=("x",),
        distinct=False,
        patterns=(
            sparql.TriplePattern(
                sparql.Variable("x"), sparql.Entity("ns:calling_code"), sparql.Variable("n")
            ),
        ),
        filters=(),
        ordering=sparql.Ordering("n", "asc", 1),
    )
    assert query == expected


def test_parse_filter_kinds():
    text = PREFIXED + (
        "SELECT ?x WHERE { ?x ns:ruler ?y . ?x ns:calling_code ?n . "
        'FILTER ( ?n < 228 ) FILTER ( !isLiteral(?x) ) FILTER ( ?y != ns:p9 ) }'
    )
    query = sparql.parse(text)
    kinds = [type(f).__name__ for f in query.filters]
    assert kinds == ["Comparison", "NotLiteral", "NotEqualEntity"]


def test_parse_date_literal():
    text = PREFIXED + 'SELECT ?x WHERE { ?x ns:accession ?d . FILTER ( ?d > "1995-01-01"^^xsd:dateTime ) }'
    query = sparql.parse(text)
    comparison = query.filters[0]
    assert comparison.literal.value == dt.date(1995, 1, 1)


def test_parse_rejects_plain_string_comparison():
    with pytest.raises(SparqlError, match="numeric or date"):
        sparql.parse(PREFIXED + 'SELECT ?x WHERE { ?x ns:r ?v . FILTER ( ?v > "hello" ) }')


@pytest.mark.parametrize("construct", ["UNION", "OPTIONAL", "MINUS"])
def test_parse_rejects_unsupported_constructs_with_offset(construct):
    text = "SELECT ?x WHERE { ?x ?p ?o . " + construct + " { ?x ?p ?o } }"
    with pytest.raises(SparqlError) as excinfo:
        sparql.parse(text)
    assert construct in str(excinfo.value)
    assert excinfo.value.offset == text.index(construct)


def test_parse_rejects_subquery():
    with pytest.raises(SparqlError, match="subquery"):
        sparql.parse("SELECT ?x WHERE { { SELECT ?x WHERE { ?x ?p ?o } } }")


def test_parse_rejects_unknown_prefix():
    with pytest.raises(SparqlError, match="unknown prefix"):
        sparql.parse("SELECT ?x WHERE { ?x ns:rel ?o }")


def test_parse_rejects_unbound_select_variable():
    with pytest.raises(SparqlError, match=r"\?y"):
        sparql.parse("SELECT ?y WHERE { ?x ?p ?o }")


def test_parse_serialize_fixpoint():
    for text in (
        COMPOSITION_QUERY,
        "SELECT ?x WHERE { ?x ?p ?o }",
        PREFIXED + "SELECT ?x WHERE { ?x ns:rel ns:e2 . ?x ns:code ?n . FILTER ( ?n >= 4 ) } ORDER BY DESC(?n) LIMIT 1",
        PREFIXED + 'SELECT ?x WHERE { ?x ns:accession ?d . FILTER ( ?d > "1995-01-01" ) }',
    ):
        once = sparql.parse(text)
        again = sparql.parse(sparql.serialize(once))
        assert once == again


# --- hop splitting -------------------------------------------------------

def test_split_composition_query():
    hop1, hop2 = sparql.split_hops(sparql.parse(COMPOSITION_QUERY))
    assert hop1.select_vars == ("mid",)
    assert len(hop1.patterns) == 1
    assert sparql.has_marker(hop2)
    assert hop2.select_vars == ("x",)


def test_split_conjunction_query():
    text = PREFIXED + "SELECT ?x WHERE { ?x ns:river ns:r1 . ?x ns:ruler ns:p2 . }"
    hop1, hop2 = sparql.split_hops(sparql.parse(text))
    assert hop1.select_vars == ("x",)
    assert len(hop1.patterns) == 1
    assert hop1.patterns[0].predicate == sparql.Entity("ns:river")
    marker_filters = [f for f in hop2.filters if isinstance(f, sparql.EqualEntity)]
    assert marker_filters and marker_filters[0].entity.token == "#1"


def test_split_superlative_assigns_ordering_to_hop2():
    text = PREFIXED + (
        "SELECT ?x WHERE { ?x ns:river ns:r1 . ?x ns:calling_code ?n . } ORDER BY ASC(?n) LIMIT 1"
    )
    hop1, hop2 = sparql.split_hops(sparql.parse(text))
    assert hop1.ordering is None
    assert hop2.ordering == sparql.Ordering("n", "asc", 1)
    # The condition group is hop2 even though its pattern comes second.
    assert hop1.patterns[0].predicate == sparql.Entity("ns:river")


def test_split_single_pattern_is_not_multihop():
    with pytest.raises(SparqlError, match="not multi-hop"):
        sparql.split_hops(sparql.parse("SELECT ?x WHERE { ?x ?p ?o }"))


def test_split_three_hop_chain_lists_candidates():
    text = PREFIXED + (
        "SELECT ?x WHERE { ns:c1 ns:ruler ?a . ?a ns:ruler ?b . ?b ns:ruler ?x . }"
    )
    with pytest.raises(SparqlError, match=r"\?a.*\?b|more than one"):
        sparql.split_hops(sparql.parse(text))


# --- execution (hand-traversal oracle on the tiny store) -----------------

def test_execute_hop1_of_composition(tiny_kg):
    # Hand traversal: c1 --ruler--> p1 ("Aria Stone").
    query = sparql.parse(PREFIXED + "SELECT ?who WHERE { ns:c1 ns:ruler ?who . }")
    assert sparql.execute(query, tiny_kg) == {"Aria Stone"}


def test_execute_contradictory_filters_is_empty(tiny_kg):
    query = sparql.parse(
        PREFIXED + "SELECT ?x WHERE { ?x ns:calling_code ?n . FILTER ( ?n < 224 ) FILTER ( ?n > 228 ) }"
    )
    assert sparql.execute(query, tiny_kg) == set()


def test_execute_superlative_matches_min_oracle(tiny_kg):
    # Brute-force oracle: min calling code among river countries is Mali (223).
    codes = {name: code for name, code in (("Mali", 223), ("Niger", 227), ("Benin", 229))}
    expected = {min(codes, key=codes.get)}
    query = sparql.parse(
        PREFIXED
        + "SELECT ?x WHERE { ?x ns:river ns:r1 . ?x ns:calling_code ?n . } ORDER BY ASC(?n) LIMIT 1"
    )
    assert sparql.execute(query, tiny_kg) == expected


def test_execute_date_filter(tiny_kg):
    query = sparql.parse(
        PREFIXED + 'SELECT ?x WHERE { ?x ns:accession ?d . FILTER ( ?d > "1995-01-01" ) }'
    )
    assert sparql.execute(query, tiny_kg) == {"Bela Frost"}


def test_execute_conjunction(tiny_kg):
    query = sparql.parse(PREFIXED + "SELECT ?x WHERE { ?x ns:river ns:r1 . ?x ns:ruler ns:p2 . }")
    assert sparql.execute(query, tiny_kg) == {"Niger", "Benin"}


def test_execute_not_equal_entity(tiny_kg):
    query = sparql.parse(
        PREFIXED + "SELECT ?x WHERE { ?x ns:ruler ?who . FILTER ( ?who != ns:p2 ) }"
    )
    assert sparql.execute(query, tiny_kg) == {"Mali"}


def test_execute_rejects_unsubstituted_marker(tiny_kg):
    _, hop2 = sparql.split_hops(sparql.parse(COMPOSITION_QUERY))
    with pytest.raises(SparqlError, match="marker"):
        sparql.execute(hop2, tiny_kg)


def test_compose_hops_equals_direct_execution(tiny_kg):
    for text in (
        PREFIXED + "SELECT ?x WHERE { ns:c2 ns:ruler ?mid . ?mid ns:accession ?x . }",
        PREFIXED + "SELECT ?x WHERE { ?x ns:river ns:r1 . ?x ns:ruler ns:p2 . }",
        PREFIXED + "SELECT ?x WHERE { ?x ns:river ns:r1 . ?x ns:calling_code ?n . } ORDER BY ASC(?n) LIMIT 1",
        PREFIXED + "SELECT ?x WHERE { ?x ns:river ns:r1 . ?x ns:calling_code ?n . FILTER ( ?n > 224 ) }",
    ):
        query = sparql.parse(text)
        hop1, hop2 = sparql.split_hops(query)
        assert sparql.compose_hops(hop1, hop2, tiny_kg) == sparql.execute(query, tiny_kg)


def test_substitute_marker_round_trip(tiny_kg):
    query = sparql.parse(COMPOSITION_QUERY)
    hop1, hop2 = sparql.split_hops(query)
    grounded = sparql.substitute_marker(hop2, "p1")
    assert not sparql.has_marker(grounded)
    assert sparql.execute(grounded, tiny_kg) == {"1990-05-01"}


# --- pseudo-question rendering -------------------------------------------

def _lexicon():
    return EntityLexicon({"c1": "Mali", "c2": "Niger", "p2": "Bela Frost", "r1": "Long River"})


def test_render_replaces_identifiers_with_names():
    query = sparql.parse(PREFIXED + "SELECT ?x WHERE { ns:c1 ns:ruler ?x . }")
    rendered = sparql.render_pseudo_question(query, _lexicon())
    assert "Mali" in rendered
    assert "ns:c1" not in rendered
    assert "ns:ruler" in rendered  # predicates stay verbatim


def test_render_without_entities_equals_plain_linearization():
    query = sparql.parse("SELECT ?x WHERE { ?x ?p ?o }")
    assert sparql.render_pseudo_question(query, _lexicon()) == "SELECT ?x WHERE { ?x ?p ?o . }"


def test_render_differs_only_in_the_changed_name():
    q1 = sparql.parse(PREFIXED + "SELECT ?x WHERE { ns:c1 ns:ruler ?x . }")
    q2 = sparql.parse(PREFIXED + "SELECT ?x WHERE { ns:c2 ns:ruler ?x . }")
    r1 = sparql.render_pseudo_question(q1, _lexicon())
    r2 = sparql.render_pseudo_question(q2, _lexicon())
    assert r1 != r2
    assert r1.replace("Mali", "Niger") == r2


def test_render_lists_missing_identifiers():
    query = sparql.parse(PREFIXED + "SELECT ?x WHERE { ns:zz1 ns:ruler ?x . ?x ns:ruler ns:zz2 . }")
    with pytest.raises(SparqlError, match="ns:zz1, ns:zz2"):
        sparql.render_pseudo_question(query, _lexicon())


def test_render_keeps_marker_verbatim():
    query = sparql.parse(COMPOSITION_QUERY)
    _, hop2 = sparql.split_hops(query)
    rendered = sparql.render_pseudo_question(hop2, EntityLexicon({"c1": "Mali"}))
    assert "#1" in rendered
