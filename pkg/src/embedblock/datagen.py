"""Seeded synthetic name records with typo-corrupted duplicates.

Clean records draw given names and surnames from bundled frequency-weighted
pools. Duplicates receive a few random typographical edits: substitutions,
deletions, insertions and adjacent transpositions.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

from .records import Record, RecordSet, make_blocking_value
from .strdist import levenshtein

OPERATIONS = ("substitution", "deletion", "insertion", "transposition")
ALPHABET = "abcdefghijklmnopqrstuvwxyz"
MAX_RETRIES = 100


class InfeasibleDatasetError(ValueError):
    """Requested sizes or rates cannot be realized."""


@dataclass(frozen=True)
class NamePools:
    given: tuple[str, ...]
    given_weights: np.ndarray = field(repr=False)
    surnames: tuple[str, ...]
    surname_weights: np.ndarray = field(repr=False)

    @property
    def capacity(self) -> int:
        return len(self.given) * len(self.surnames)


def _read_pool(name: str) -> tuple[tuple[str, ...], np.ndarray]:
    text = resources.files("embedblock").joinpath("data", name).read_text(encoding="utf-8")
    rows = list(csv.reader(text.splitlines()))[1:]
    names = tuple(r[0] for r in rows)
    weights = np.array([float(r[1]) for r in rows])
    return names, weights / weights.sum()


def load_name_pools() -> NamePools:
    """The bundled pools: about 700 given names and 1000 surnames with frequencies."""
    given, gw = _read_pool("given_names.csv")
    surnames, sw = _read_pool("surnames.csv")
    return NamePools(given, gw, surnames, sw)


def make_pools(given: Sequence[str], surnames: Sequence[str]) -> NamePools:
    """Uniformly weighted pools from explicit name lists."""
    if not given or not surnames:
        raise ValueError("name pools must be non-empty")
    return NamePools(
        tuple(given), np.full(len(given), 1.0 / len(given)),
        tuple(surnames), np.full(len(surnames), 1.0 / len(surnames)),
    )


def _record_id(prefix: str, i: int) -> str:
    return f"{prefix}{i:06d}"


def generate_clean_records(
    n: int,
    seed: int,
    pools: NamePools | None = None,
    id_prefix: str = "r",
    role: str = "dedup",
) -> RecordSet:
    """``n`` records with pairwise distinct blocking values.

    A draw that repeats an existing key is redrawn; the whole generation
    gives up after ``MAX_RETRIES * n`` rejected draws.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    pools = pools or load_name_pools()
    if n > pools.capacity:
        raise InfeasibleDatasetError(f"pools hold only {pools.capacity} distinct keys, need {n}")
    rng = np.random.default_rng(seed)
    seen: set[tuple[int, int]] = set()
    records = []
    rejected = 0
    while len(records) < n:
        gi = rng.choice(len(pools.given), p=pools.given_weights)
        si = rng.choice(len(pools.surnames), p=pools.surname_weights)
        if (gi, si) in seen:
            rejected += 1
            if rejected > MAX_RETRIES * n:
                raise InfeasibleDatasetError("too many key collisions; pools too small for n")
            continue
        seen.add((gi, si))
        i = len(records)
        records.append(
            Record(
                _record_id(id_prefix, i),
                pools.given[gi].capitalize(),
                pools.surnames[si].capitalize(),
                _record_id("e", i),
            )
        )
    return RecordSet(tuple(records), role=role)


@dataclass(frozen=True)
class CorruptionSpec:
    """How duplicates are corrupted.

    ``max_edits`` is an edit budget. Each corruption draws a budget uniformly
    from ``[1, max_edits]`` and spends it on random operations; substitutions,
    deletions and insertions cost one unit and a transposition costs
    ``transposition_units``. With the default of 2 a transposition is charged
    its Levenshtein cost, so the key moves by at most the drawn budget.
    """

    max_edits: int = 2
    operations: tuple[str, ...] = OPERATIONS
    rng_seed: int = 0
    transposition_units: int = 2

    def __post_init__(self):
        if self.max_edits < 1:
            raise ValueError("max_edits must be positive")
        unknown = set(self.operations) - set(OPERATIONS)
        if unknown or not self.operations:
            raise ValueError(f"operations must be a non-empty subset of {OPERATIONS}")
        if self.transposition_units < 1:
            raise ValueError("transposition_units must be positive")


def _cost(op: str, spec: CorruptionSpec) -> int:
    return spec.transposition_units if op == "transposition" else 1


def _apply(op: str, s: str, rng: np.random.Generator) -> str | None:
    """Apply one edit to ``s``; ``None`` when ``s`` is too short for ``op``."""
    if op == "insertion":
        pos = int(rng.integers(0, len(s) + 1))
        return s[:pos] + ALPHABET[int(rng.integers(0, 26))] + s[pos:]
    if op == "substitution":
        pos = int(rng.integers(0, len(s)))
        choices = [c for c in ALPHABET if c != s[pos]]
        return s[:pos] + choices[int(rng.integers(0, len(choices)))] + s[pos + 1:]
    if op == "deletion":
        if len(s) < 2:
            return None
        pos = int(rng.integers(0, len(s)))
        return s[:pos] + s[pos + 1:]
    # transposition of two differing adjacent characters
    spots = [i for i in range(len(s) - 1) if s[i] != s[i + 1]]
    if not spots:
        return None
    pos = spots[int(rng.integers(0, len(spots)))]
    return s[:pos] + s[pos + 1] + s[pos] + s[pos + 2:]


def _corruption_rng(record: Record, spec: CorruptionSpec) -> np.random.Generator:
    return np.random.default_rng([spec.rng_seed, zlib.crc32(record.record_id.encode("utf-8"))])


def corrupt(record: Record, spec: CorruptionSpec, new_id: str | None = None) -> Record:
    """A typo-corrupted copy of ``record`` with the same entity id.

    The result's blocking value differs from the original by at least one
    edit. The randomness depends only on ``spec.rng_seed`` and the record id.
    """
    rng = _corruption_rng(record, spec)
    original = make_blocking_value(record)
    for _ in range(MAX_RETRIES):
        budget = int(rng.integers(1, spec.max_edits + 1))
        fields = [record.given_name.strip().lower(), record.surname.strip().lower()]
        stalled = 0
        while budget > 0 and stalled < MAX_RETRIES:
            op = spec.operations[int(rng.integers(0, len(spec.operations)))]
            if _cost(op, spec) > budget:
                stalled += 1
                continue
            f = int(rng.integers(0, 2))
            edited = _apply(op, fields[f], rng)
            if edited is None:
                stalled += 1
                continue
            fields[f] = edited
            budget -= _cost(op, spec)
        if budget > 0:
            continue
        out = Record(
            new_id or f"{record.record_id}-dup",
            fields[0].capitalize(),
            fields[1].capitalize(),
            record.entity_id,
        )
        # edits can cancel (insert then delete the same letter); redraw if so
        if levenshtein(make_blocking_value(out), original) >= 1:
            return out
    raise InfeasibleDatasetError(f"could not corrupt record {record.record_id!r}")


def _relabel(records: list[Record], prefix: str) -> tuple[list[Record], dict[str, str]]:
    mapping = {}
    out = []
    for i, r in enumerate(records):
        rid = _record_id(prefix, i)
        mapping[r.record_id] = rid
        out.append(Record(rid, r.given_name, r.surname, r.entity_id))
    return out, mapping


def make_dedup_dataset(
    n: int,
    dmr: float,
    spec: CorruptionSpec = CorruptionSpec(),
    pools: NamePools | None = None,
) -> tuple[RecordSet, list[tuple[str, str]]]:
    """A shuffled set of ``n`` records of which ``round(n * dmr)`` are duplicates.

    Every duplicate copies a distinct original from the same set. Truth pairs
    are ``(original_id, duplicate_id)``; ids are reassigned in final order.
    """
    if not 0 <= dmr < 1:
        raise InfeasibleDatasetError("dmr must lie in [0, 1)")
    n_dup = int(round(n * dmr))
    n_orig = n - n_dup
    if n_dup > n_orig:
        raise InfeasibleDatasetError(f"{n_dup} duplicates need as many distinct originals; only {n_orig}")
    clean = generate_clean_records(n_orig, spec.rng_seed, pools, id_prefix="o")
    rng = np.random.default_rng([spec.rng_seed, 1])
    picked = rng.choice(n_orig, size=n_dup, replace=False) if n_dup else np.zeros(0, dtype=int)
    dups = [corrupt(clean[int(i)], spec, new_id=f"x{j:06d}") for j, i in enumerate(picked)]
    pool = list(clean.records) + dups
    order = rng.permutation(len(pool))
    records, mapping = _relabel([pool[int(i)] for i in order], "r")
    truth = sorted((mapping[clean[int(i)].record_id], mapping[d.record_id]) for i, d in zip(picked, dups))
    return RecordSet(tuple(records), role="dedup"), truth


@dataclass
class BenchmarkBundle:
    reference: RecordSet
    queries: RecordSet
    truth: list[tuple[str, str]]
    rate: float


def make_query_benchmark(
    n_ref: int,
    n_query: int,
    qmr: float = 1.0,
    spec: CorruptionSpec = CorruptionSpec(),
    pools: NamePools | None = None,
) -> BenchmarkBundle:
    """Duplicate-free reference set plus a query stream.

    ``round(qmr * n_query)`` queries are corruptions of distinct reference
    records; the rest are fresh records whose keys do not occur in the
    reference. ``qmr = 1`` makes every query matchable. Truth pairs are
    ``(query_id, reference_id)``.
    """
    if not 0 <= qmr <= 1:
        raise InfeasibleDatasetError("qmr must lie in [0, 1]")
    if n_query < 0:
        raise InfeasibleDatasetError("n_query must be non-negative")
    n_match = int(round(qmr * n_query))
    if n_match > n_ref:
        raise InfeasibleDatasetError(f"{n_match} matched queries need as many reference records")
    n_fresh = n_query - n_match
    clean = generate_clean_records(n_ref + n_fresh, spec.rng_seed, pools, id_prefix="o")
    reference_raw = list(clean.records[:n_ref])
    fresh = list(clean.records[n_ref:])
    rng = np.random.default_rng([spec.rng_seed, 2])
    picked = rng.choice(n_ref, size=n_match, replace=False) if n_match else np.zeros(0, dtype=int)
    matched = [corrupt(reference_raw[int(i)], spec, new_id=f"x{j:06d}") for j, i in enumerate(picked)]
    stream = matched + fresh
    order = rng.permutation(len(stream))
    reference, ref_map = _relabel(reference_raw, "r")
    queries, q_map = _relabel([stream[int(i)] for i in order], "q")
    truth = sorted(
        (q_map[m.record_id], ref_map[reference_raw[int(i)].record_id]) for i, m in zip(picked, matched)
    )
    rate = n_match / n_query if n_query else 0.0
    return BenchmarkBundle(
        RecordSet(tuple(reference), role="reference"),
        RecordSet(tuple(queries), role="query"),
        truth,
        rate,
    )
