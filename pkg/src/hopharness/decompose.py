"""Two-hop question decomposition.

Composition questions are reverted to their first-hop form ("Return <phrase>.")
by aligning the machine-generated multi-hop question against the second-hop
source question: the span where they differ is the bridge entity the phrase
replaced. The other three types render a fixed second-hop template over the
first hop's candidate answers. The `#1` placeholder marks the slot where
first-hop answers get substituted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .errors import DecompositionError

logger = logging.getLogger(__name__)

PLACEHOLDER = "#1"
HOP2_TEMPLATE_PREFIX = "Which one of the following "
COMPOSITION_HOP1_PREFIX = "Return "
ANSWER_JOIN = ", "

QTYPES = ("composition", "conjunction", "superlative", "comparative")
TEMPLATE_QTYPES = ("conjunction", "superlative", "comparative")

_SENTENCE_PUNCT = ".?!"


@dataclass(frozen=True)
class RawExample:
    """Input fields required to decompose one multi-hop example.

    ``source_question`` is the second-hop source for composition (it contains
    the bridge entity) and the first-hop source for the other types.
    ``phrase`` is the relational phrase (composition) or the condition span.
    Composition records carry either the machine-generated multi-hop question
    (bridge recovered by alignment) or an explicit ``bridge_entity``.
    """

    id: str
    qtype: str
    question: str
    answers: tuple[str, ...]
    source_question: str
    phrase: str
    machine_question: str | None = None
    bridge_entity: str | None = None
    hop1_answers: tuple[str, ...] = ()
    sparql: str | None = None


@dataclass(frozen=True)
class DecompositionPair:
    hop1_question: str
    hop1_answers: tuple[str, ...]
    hop2_question: str
    hop2_placeholder: str
    hop2_answers: tuple[str, ...]
    ambiguous_bridge: bool = field(default=False, compare=False)


def render_hop2_template(condition: str, candidates: list[str] | tuple[str, ...]) -> str:
    """Render "Which one of the following [condition]: [candidates]?".

    A trailing run of sentence punctuation is collapsed into the final "?" so
    conditions or candidates ending in punctuation never double it.
    """
    if not condition:
        raise DecompositionError("empty condition span")
    if not candidates:
        raise DecompositionError("empty candidate list")
    body = f"{HOP2_TEMPLATE_PREFIX}{condition}: {ANSWER_JOIN.join(candidates)}"
    return body.rstrip(_SENTENCE_PUNCT) + "?"


def substitute(placeholder_question: str, answers: list[str] | tuple[str, ...]) -> str:
    """Replace the single `#1` token with the comma-joined answer list."""
    count = placeholder_question.count(PLACEHOLDER)
    if count != 1:
        raise DecompositionError(
            f"expected exactly one {PLACEHOLDER!r} token, found {count} in {placeholder_question!r}"
        )
    if not answers:
        raise DecompositionError("empty answer list for substitution")
    return placeholder_question.replace(PLACEHOLDER, ANSWER_JOIN.join(answers))


def make_placeholder(question: str, bridge: str) -> tuple[str, bool]:
    """Replace the bridge span in ``question`` with `#1`.

    Returns the placeholder form and whether the bridge occurred more than
    once (only the first occurrence is replaced; the caller flags these).
    """
    if not bridge:
        raise DecompositionError("empty bridge entity")
    first = question.find(bridge)
    if first < 0:
        raise DecompositionError(f"bridge entity {bridge!r} not found as a contiguous span of {question!r}")
    ambiguous = question.find(bridge, first + len(bridge)) >= 0
    return question[:first] + PLACEHOLDER + question[first + len(bridge):], ambiguous


def recover_bridge(machine_question: str, source_question: str, phrase: str) -> str:
    """Align the machine multi-hop question with the hop2 source question.

    The machine question is the source question with one entity span replaced
    by the relational phrase; the differing span of the source is the bridge.
    """
    start = machine_question.find(phrase)
    if start < 0:
        raise DecompositionError(
            f"relational phrase {phrase!r} not found as a contiguous span of the machine question"
        )
    while start >= 0:
        prefix = machine_question[:start]
        suffix = machine_question[start + len(phrase):]
        if source_question.startswith(prefix) and source_question.endswith(suffix):
            bridge = source_question[len(prefix): len(source_question) - len(suffix)]
            if bridge:
                return bridge
        start = machine_question.find(phrase, start + 1)
    raise DecompositionError("bridge entity not found as a contiguous span of the source question")


def _decompose_composition(raw: RawExample) -> DecompositionPair:
    if not raw.phrase:
        raise DecompositionError("empty relational phrase", example_id=raw.id)
    hop1_question = COMPOSITION_HOP1_PREFIX + raw.phrase
    if not hop1_question.endswith(tuple(_SENTENCE_PUNCT)):
        hop1_question += "."
    hop1_question = hop1_question[0].upper() + hop1_question[1:]
    try:
        if raw.machine_question is not None:
            bridge = recover_bridge(raw.machine_question, raw.source_question, raw.phrase)
            if raw.bridge_entity is not None and raw.bridge_entity != bridge:
                raise DecompositionError(
                    f"recovered bridge {bridge!r} disagrees with annotated {raw.bridge_entity!r}"
                )
        elif raw.bridge_entity is not None:
            bridge = raw.bridge_entity
        else:
            raise DecompositionError("composition record needs machine_question or bridge_entity")
        placeholder, ambiguous = make_placeholder(raw.source_question, bridge)
    except DecompositionError as exc:
        raise DecompositionError(str(exc), example_id=raw.id) from None
    if ambiguous:
        logger.warning("example %s: bridge entity %r occurs more than once; first span replaced", raw.id, bridge)
    hop1_answers = raw.hop1_answers or (bridge,)
    return DecompositionPair(
        hop1_question=hop1_question,
        hop1_answers=hop1_answers,
        hop2_question=raw.source_question,
        hop2_placeholder=placeholder,
        hop2_answers=raw.answers,
        ambiguous_bridge=ambiguous,
    )


def _decompose_template(raw: RawExample) -> DecompositionPair:
    if not raw.phrase:
        raise DecompositionError("empty condition span", example_id=raw.id)
    if not raw.hop1_answers:
        raise DecompositionError("missing first-hop answers", example_id=raw.id)
    placeholder = render_hop2_template(raw.phrase, [PLACEHOLDER])
    return DecompositionPair(
        hop1_question=raw.source_question,
        hop1_answers=raw.hop1_answers,
        hop2_question=substitute(placeholder, raw.hop1_answers),
        hop2_placeholder=placeholder,
        hop2_answers=raw.answers,
    )


def decompose(raw: RawExample) -> DecompositionPair:
    """Recover the two-hop decomposition of a raw multi-hop example."""
    if raw.qtype == "composition":
        return _decompose_composition(raw)
    if raw.qtype in TEMPLATE_QTYPES:
        return _decompose_template(raw)
    raise DecompositionError(f"unknown question type {raw.qtype!r}", example_id=raw.id)
