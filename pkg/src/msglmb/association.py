"""Association maps, association histories, validity, and enumeration.

A per-scan association map sends each label of its domain to a measurement
index (1..M), to 0 for alive-but-misdetected, or to -1 for not alive.  The
domain at scan j is the scan's birth labels plus the labels alive at j-1;
everything else is implicitly -1.  A history is the sequence of maps over
scans 1..k and is the hypothesis key of the multi-scan posterior.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .errors import EnumerationLimitError
from .labels import Label

ENUMERATION_GUARD = 10_000_000


@dataclass(frozen=True)
class AssociationMap:
    """One scan's label-to-measurement assignment, stored on its domain only."""

    scan: int
    items: tuple[tuple[Label, int], ...]

    def __init__(self, scan: int, entries: Mapping[Label, int] | Iterable[tuple[Label, int]]):
        if isinstance(entries, Mapping):
            entries = entries.items()
        items = tuple(sorted((Label(*lab), int(val)) for lab, val in entries))
        for lab, val in items:
            if val < -1:
                raise ValueError(f"association value for {lab} below -1: {val}")
        object.__setattr__(self, "scan", int(scan))
        object.__setattr__(self, "items", items)

    @cached_property
    def entries(self) -> dict[Label, int]:
        return dict(self.items)

    @property
    def domain(self) -> tuple[Label, ...]:
        return tuple(lab for lab, _ in self.items)

    def value(self, label: Label) -> int:
        """Assignment of a label; -1 when the label is outside the domain."""
        return self.entries.get(label, -1)

    def serialize(self) -> str:
        return ",".join(f"{lab}:{val}" for lab, val in self.items)

    @classmethod
    def parse(cls, scan: int, text: str) -> "AssociationMap":
        if not text:
            return cls(scan, {})
        pairs = []
        for chunk in text.split(","):
            lab, _, val = chunk.rpartition(":")
            pairs.append((Label.parse(lab), int(val)))
        return cls(scan, pairs)


def live_labels(assoc: AssociationMap) -> frozenset[Label]:
    """Labels the map keeps alive (value >= 0)."""
    return frozenset(lab for lab, val in assoc.items if val >= 0)


def is_positive_one_to_one(assoc: AssociationMap) -> bool:
    """True iff no positive measurement index is assigned twice."""
    positives = [val for _, val in assoc.items if val > 0]
    return len(positives) == len(set(positives))


def to_detection_map(assoc: AssociationMap) -> dict[Label, int]:
    """The detection-map view: live labels only, values in {0..M}."""
    return {lab: val for lab, val in assoc.items if val >= 0}


def from_detection_map(
    scan: int, detections: Mapping[Label, int], domain: Iterable[Label]
) -> AssociationMap:
    """Rebuild the extended map from its detection-map view on a given domain."""
    return AssociationMap(scan, {lab: detections.get(lab, -1) for lab in domain})


@dataclass(frozen=True)
class AssociationHistory:
    """Association maps for scans 1..k; the component key of the posterior."""

    maps: tuple[AssociationMap, ...]

    def __init__(self, maps: Sequence[AssociationMap]):
        maps = tuple(maps)
        for j, m in enumerate(maps, start=1):
            if m.scan != j:
                raise ValueError(f"map at position {j} is labeled scan {m.scan}")
        object.__setattr__(self, "maps", maps)

    @property
    def k(self) -> int:
        return len(self.maps)

    def map_at(self, scan: int) -> AssociationMap:
        return self.maps[scan - 1]

    def value(self, label: Label, scan: int) -> int:
        if not 1 <= scan <= self.k:
            return -1
        return self.maps[scan - 1].value(label)

    def live_at(self, scan: int) -> frozenset[Label]:
        if scan <= 0 or scan > self.k:
            return frozenset()
        return live_labels(self.maps[scan - 1])

    def ever_live(self) -> frozenset[Label]:
        out: set[Label] = set()
        for m in self.maps:
            out.update(live_labels(m))
        return frozenset(out)

    def life_span(self, label: Label) -> tuple[int, int] | None:
        """(first, last) alive scans of a label, or None if never alive."""
        alive = [m.scan for m in self.maps if m.value(label) >= 0]
        if not alive:
            return None
        return alive[0], alive[-1]

    @cached_property
    def key(self) -> tuple:
        return tuple(m.items for m in self.maps)

    def serialize(self) -> str:
        return "|".join(m.serialize() for m in self.maps)

    @classmethod
    def parse(cls, text: str) -> "AssociationHistory":
        if text == "":
            return cls(())
        parts = text.split("|")
        return cls(tuple(AssociationMap.parse(j, part) for j, part in enumerate(parts, start=1)))

    def __hash__(self):
        return hash(self.key)

    def __eq__(self, other):
        if not isinstance(other, AssociationHistory):
            return NotImplemented
        return self.key == other.key


def _birth_table(births, k: int) -> list[tuple[Label, ...]]:
    """Normalize per-scan birth labels to a list indexed by scan 1..k."""
    if isinstance(births, Mapping):
        table = [tuple(births.get(j, ())) for j in range(1, k + 1)]
    else:
        table = [tuple(b) for b in births]
        if len(table) < k:
            table += [()] * (k - len(table))
    return [tuple(sorted(Label(*lab) for lab in scan)) for scan in table]


def domain_order(survivors: Iterable[Label], births: Iterable[Label]) -> tuple[Label, ...]:
    """Deterministic sweep order: surviving labels (sorted) then births (sorted)."""
    return tuple(sorted(survivors)) + tuple(sorted(births))


def is_valid_history(
    history: AssociationHistory, births, meas_counts: Sequence[int]
) -> bool:
    """Check validity: positive 1-1 maps, domain confinement, no dead relive.

    Confinement of live labels to births plus the previous scan's live set
    already forbids a dead label from reliving, because birth label spaces
    of distinct scans are disjoint.
    """
    k = history.k
    if len(meas_counts) < k:
        return False
    births = _birth_table(births, k)
    prev_live: frozenset[Label] = frozenset()
    for j in range(1, k + 1):
        m = history.map_at(j)
        if not is_positive_one_to_one(m):
            return False
        if any(val > meas_counts[j - 1] for _, val in m.items):
            return False
        allowed = set(births[j - 1]) | prev_live
        live = live_labels(m)
        if not live <= allowed:
            return False
        prev_live = live
    return True


def _enumerate_scan_maps(domain: Sequence[Label], n_meas: int):
    """All positive 1-1 value tuples over a domain, values in {-1..n_meas}."""
    if not domain:
        yield ()
        return
    values = list(range(-1, n_meas + 1))

    def rec(i: int, used: frozenset[int], acc: tuple[int, ...]):
        if i == len(domain):
            yield acc
            return
        for v in values:
            if v > 0 and v in used:
                continue
            yield from rec(i + 1, used | {v} if v > 0 else used, acc + (v,))

    yield from rec(0, frozenset(), ())


def enumerate_valid_histories(
    births, meas_counts: Sequence[int], k: int | None = None
) -> list[AssociationHistory]:
    """Exhaustive, duplicate-free list of valid histories (brute-force oracle).

    Guarded: the product of per-scan branching bounds must not exceed
    ENUMERATION_GUARD.
    """
    if k is None:
        k = len(meas_counts)
    births = _birth_table(births, k)

    bound = 1.0
    max_domain = 0
    for j in range(1, k + 1):
        max_domain += len(births[j - 1])
        bound *= float(meas_counts[j - 1] + 2) ** max_domain
        if bound > ENUMERATION_GUARD:
            raise EnumerationLimitError(
                f"enumeration bound {bound:.3g} exceeds guard {ENUMERATION_GUARD:g}"
            )

    results: list[AssociationHistory] = []

    def rec(j: int, prev_live: frozenset[Label], maps: tuple[AssociationMap, ...]):
        if j > k:
            results.append(AssociationHistory(maps))
            return
        domain = domain_order(prev_live, births[j - 1])
        for values in _enumerate_scan_maps(domain, meas_counts[j - 1]):
            m = AssociationMap(j, zip(domain, values))
            rec(j + 1, live_labels(m), maps + (m,))

    rec(1, frozenset(), ())
    return results
