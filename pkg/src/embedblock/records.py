"""Record vocabulary shared by every stage: records, record sets and blocking keys.

Records are read from and written to a small CSV dialect with the header
``record_id,given_name,surname,entity_id``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

RECORD_HEADER = ("record_id", "given_name", "surname", "entity_id")

ROLES = ("dedup", "reference", "query")


class InvalidRecordError(ValueError):
    """Raised when a record violates the data model (empty names, bad ids)."""


@dataclass(frozen=True)
class Record:
    record_id: str
    given_name: str
    surname: str
    entity_id: str = ""

    def __post_init__(self):
        if not self.record_id or not self.record_id.strip():
            raise InvalidRecordError("record_id must be non-empty")
        if not self.given_name.strip():
            raise InvalidRecordError(f"record {self.record_id!r}: empty given_name")
        if not self.surname.strip():
            raise InvalidRecordError(f"record {self.record_id!r}: empty surname")


def make_blocking_value(record: Record) -> str:
    """Return the blocking key ``"<given> <surname>"``, trimmed and lowercased.

    Both names go into one key so a single edit distance covers errors in
    either field.
    """
    given = record.given_name.strip().lower()
    surname = record.surname.strip().lower()
    if not given or not surname:
        raise InvalidRecordError(f"record {record.record_id!r}: empty name attribute")
    return f"{given} {surname}"


@dataclass(frozen=True)
class RecordSet:
    """An ordered, immutable collection of records.

    Positions in ``records`` are the integer ids used by embeddings, trees
    and blocks.
    """

    records: tuple[Record, ...]
    role: str = "dedup"
    _positions: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}; expected one of {ROLES}")
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        positions = {}
        for i, r in enumerate(records):
            if r.record_id in positions:
                raise InvalidRecordError(f"duplicate record_id {r.record_id!r}")
            positions[r.record_id] = i
        object.__setattr__(self, "_positions", positions)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i: int) -> Record:
        return self.records[i]

    @property
    def ids(self) -> list[str]:
        return [r.record_id for r in self.records]

    def blocking_values(self) -> list[str]:
        return [make_blocking_value(r) for r in self.records]

    def position(self, record_id: str) -> int:
        return self._positions[record_id]

    def __contains__(self, record_id: object) -> bool:
        return record_id in self._positions


def read_records(
    path: str | Path,
    role: str = "dedup",
    columns: Mapping[str, str] | None = None,
) -> RecordSet:
    """Load a record CSV.

    Parameters
    ----------
    path : path-like
        UTF-8 CSV file whose first line is a header.
    role : str
        Role of the resulting set (``dedup``, ``reference`` or ``query``).
    columns : mapping, optional
        Maps our field names to the file's column names, e.g.
        ``{"given_name": "first_name", "surname": "last_name"}`` for
        voter-registry style exports. Unmapped fields use their own name.
        ``entity_id`` may be absent from the file.
    """
    mapping = {name: name for name in RECORD_HEADER}
    if columns:
        mapping.update(columns)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for name in RECORD_HEADER[:3]:
            if mapping[name] not in header:
                raise InvalidRecordError(f"{path}: missing column {mapping[name]!r}")
        has_entity = mapping["entity_id"] in header
        records = [
            Record(
                record_id=row[mapping["record_id"]].strip(),
                given_name=row[mapping["given_name"]],
                surname=row[mapping["surname"]],
                entity_id=(row[mapping["entity_id"]] or "").strip() if has_entity else "",
            )
            for row in reader
        ]
    return RecordSet(tuple(records), role=role)


def write_records(path: str | Path, records: Iterable[Record]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_HEADER)
        for r in records:
            writer.writerow([r.record_id, r.given_name, r.surname, r.entity_id])


def read_pairs(path: str | Path) -> list[tuple[str, str]]:
    """Read a two-column truth CSV (``left_id,right_id`` or ``query_id,reference_id``)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        return [(row[0], row[1]) for row in reader if row]


def write_pairs(path: str | Path, pairs: Sequence[tuple[str, str]], header: Sequence[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(pairs)
