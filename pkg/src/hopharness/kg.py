"""Immutable in-memory triple store used as the brute-force oracle world.

Relation triples connect entities; attribute records attach numeric or date
literals to entities. Everything is indexed at construction and never
mutated, so stores are safe to share across threads.
"""

from __future__ import annotations

import datetime as _dt
from typing import Iterable, Union

from .corpus import EntityLexicon
from .errors import HarnessError

LiteralValue = Union[int, float, _dt.date]


class TripleStore:
    def __init__(
        self,
        names: dict[str, str],
        triples: Iterable[tuple[str, str, str]],
        attributes: Iterable[tuple[str, str, LiteralValue]] = (),
    ):
        self.names = dict(names)
        self.triples = tuple(triples)
        self.attributes = tuple(attributes)
        self._validate()

        self._by_name = {name: ident for ident, name in self.names.items()}
        self._objects: dict[tuple[str, str], list[str]] = {}
        self._subjects: dict[tuple[str, str], list[str]] = {}
        self.relations: set[str] = set()
        for s, r, o in self.triples:
            self.relations.add(r)
            self._objects.setdefault((s, r), []).append(o)
            self._subjects.setdefault((r, o), []).append(s)
        self._attr: dict[tuple[str, str], LiteralValue] = {}
        self.attribute_names: set[str] = set()
        for e, a, v in self.attributes:
            self.attribute_names.add(a)
            self._attr[(e, a)] = v

    def _validate(self) -> None:
        seen_names: set[str] = set()
        for ident, name in self.names.items():
            if not name:
                raise HarnessError(f"empty name for entity {ident!r}")
            if name in seen_names:
                raise HarnessError(f"duplicate entity name {name!r}")
            seen_names.add(name)
        for s, _, o in self.triples:
            if s not in self.names or o not in self.names:
                raise HarnessError(f"triple references unknown entity: ({s!r}, ..., {o!r})")
        for e, _, _ in self.attributes:
            if e not in self.names:
                raise HarnessError(f"attribute references unknown entity {e!r}")

    def name(self, ident: str) -> str:
        return self.names[ident]

    def entity_by_name(self, name: str) -> str | None:
        return self._by_name.get(name)

    def objects(self, subject: str, relation: str) -> tuple[str, ...]:
        return tuple(self._objects.get((subject, relation), ()))

    def subjects(self, relation: str, obj: str) -> tuple[str, ...]:
        return tuple(self._subjects.get((relation, obj), ()))

    def attribute(self, entity: str, attr: str) -> LiteralValue | None:
        return self._attr.get((entity, attr))

    def resolve_entity(self, token: str) -> str | None:
        """Resolve a query token (id or prefixed name) to an entity id."""
        if token in self.names:
            return token
        _, _, local = token.rpartition(":")
        if local and local in self.names:
            return local
        return None

    def resolve_relation(self, token: str) -> str | None:
        if token in self.relations:
            return token
        _, _, local = token.rpartition(":")
        if local and local in self.relations:
            return local
        return None

    def resolve_attribute(self, token: str) -> str | None:
        if token in self.attribute_names:
            return token
        _, _, local = token.rpartition(":")
        if local and local in self.attribute_names:
            return local
        return None

    def lexicon(self) -> EntityLexicon:
        return EntityLexicon(self.names)
