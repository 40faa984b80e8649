"""Labels, labeled states, multi-object state sequences and trajectories.

A label identifies one object across its lifetime; a multi-object state
sequence stores per-scan sets of labeled states; a trajectory groups the
same information by label instead of by time.  The two groupings are
interconvertible without loss.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidSequenceError


class Label(NamedTuple):
    """Object identity: birth scan plus an index separating same-scan births.

    Labels order lexicographically by (birth_time, index), which matches
    the deterministic sweep order used throughout the samplers.
    """

    birth_time: int
    index: int

    def __str__(self) -> str:
        return f"{self.birth_time}.{self.index}"

    @classmethod
    def parse(cls, text: str) -> "Label":
        birth, _, index = str(text).partition(".")
        return cls(int(birth), int(index))


@dataclass(frozen=True)
class LabeledState:
    """One object's kinematic vector at a single scan, tagged with its label."""

    kinematic: np.ndarray
    label: Label

    def __post_init__(self):
        arr = np.asarray(self.kinematic, dtype=float)
        if arr.ndim != 1:
            raise InvalidSequenceError("kinematic state must be a 1-D vector")
        arr.setflags(write=False)
        object.__setattr__(self, "kinematic", arr)

    def __eq__(self, other):
        if not isinstance(other, LabeledState):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.kinematic, other.kinematic)

    def __hash__(self):
        return hash((self.label, self.kinematic.tobytes()))


@dataclass(frozen=True)
class TrajectorySegment:
    """A label's kinematic states over its contiguous alive scans."""

    label: Label
    start: int
    states: np.ndarray  # (n_scans, d)

    def __post_init__(self):
        arr = np.asarray(self.states, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise InvalidSequenceError("trajectory needs at least one state vector")
        arr.setflags(write=False)
        object.__setattr__(self, "states", arr)

    @property
    def end(self) -> int:
        return self.start + self.states.shape[0] - 1

    @property
    def length(self) -> int:
        return self.states.shape[0]

    def state_at(self, scan: int) -> np.ndarray:
        if not self.start <= scan <= self.end:
            raise KeyError(f"label {self.label} is not alive at scan {scan}")
        return self.states[scan - self.start]

    def restrict(self, lo: int, hi: int) -> "TrajectorySegment":
        """The sub-trajectory on scans [lo, hi]; both bounds clipped to life."""
        lo = max(lo, self.start)
        hi = min(hi, self.end)
        if lo > hi:
            raise InvalidSequenceError("restriction window misses the trajectory")
        return TrajectorySegment(self.label, lo, self.states[lo - self.start : hi - self.start + 1])

    def __eq__(self, other):
        if not isinstance(other, TrajectorySegment):
            return NotImplemented
        return (
            self.label == other.label
            and self.start == other.start
            and np.array_equal(self.states, other.states)
        )

    def __hash__(self):
        return hash((self.label, self.start, self.states.tobytes()))


def start_time(label: Label, window_start: int) -> int:
    """First scan a label can be alive within a window starting at window_start."""
    return max(window_start, label.birth_time)


def end_time(label: Label, label_sets: Sequence[Iterable[Label]], window_start: int = 0) -> int:
    """Last alive scan of a label, from the per-scan label sets of a window.

    ``label_sets[i]`` holds the labels present at scan ``window_start + i``.
    """
    sets = [frozenset(s) for s in label_sets]
    if not any(label in s for s in sets):
        raise InvalidSequenceError(f"label {label} not in window")
    s = start_time(label, window_start)
    t = s
    for i in range(s + 1 - window_start, len(sets)):
        if label in sets[i]:
            t += 1
    return t


class MultiObjectStateSequence:
    """Per-scan sets of labeled states over an inclusive scan window.

    Construction validates the structural invariants every downstream
    formula relies on: distinct labels per scan, a single kinematic
    dimension, contiguous lifetimes (no resurrection), and first
    appearance at max(window start, birth time).
    """

    def __init__(self, window_start: int, scans: Sequence[Iterable[LabeledState]]):
        self._start = int(window_start)
        per_scan: list[dict[Label, np.ndarray]] = []
        d = None
        for offset, states in enumerate(scans):
            here: dict[Label, np.ndarray] = {}
            for st in states:
                if not isinstance(st, LabeledState):
                    st = LabeledState(np.asarray(st[0], dtype=float), st[1])
                if st.label in here:
                    raise InvalidSequenceError(
                        f"duplicate label {st.label} at scan {self._start + offset}"
                    )
                if d is None:
                    d = st.kinematic.shape[0]
                elif st.kinematic.shape[0] != d:
                    raise InvalidSequenceError(
                        f"kinematic dimension changed from {d} to {st.kinematic.shape[0]}"
                    )
                here[st.label] = st.kinematic
            per_scan.append(here)
        self._scans = per_scan
        self._d = d
        self._validate_lifetimes()

    def _validate_lifetimes(self):
        seen_first: dict[Label, int] = {}
        seen_last: dict[Label, int] = {}
        for offset, here in enumerate(self._scans):
            scan = self._start + offset
            for label in here:
                seen_first.setdefault(label, scan)
                seen_last[label] = scan
        for label, first in seen_first.items():
            expected = start_time(label, self._start)
            if first != expected:
                raise InvalidSequenceError(
                    f"label {label} first appears at scan {first}, expected {expected}"
                )
            for scan in range(first, seen_last[label] + 1):
                if label not in self._scans[scan - self._start]:
                    raise InvalidSequenceError(f"label {label} resurrects after scan {scan - 1}")

    @property
    def window_start(self) -> int:
        return self._start

    @property
    def window_end(self) -> int:
        return self._start + len(self._scans) - 1

    @property
    def n_scans(self) -> int:
        return len(self._scans)

    @property
    def d(self) -> int | None:
        """Kinematic dimension, or None for an all-empty sequence."""
        return self._d

    def labels_at(self, scan: int) -> frozenset[Label]:
        return frozenset(self._scans[scan - self._start])

    @property
    def label_sets(self) -> list[frozenset[Label]]:
        return [frozenset(s) for s in self._scans]

    def all_labels(self) -> list[Label]:
        out = set()
        for here in self._scans:
            out.update(here)
        return sorted(out)

    def state_of(self, label: Label, scan: int) -> np.ndarray:
        return self._scans[scan - self._start][label]

    def states_at(self, scan: int) -> list[LabeledState]:
        here = self._scans[scan - self._start]
        return [LabeledState(vec, label) for label, vec in sorted(here.items())]

    def restrict(self, lo: int, hi: int) -> "MultiObjectStateSequence":
        if not (self._start <= lo <= hi <= self.window_end):
            raise InvalidSequenceError("restriction window outside the sequence window")
        return MultiObjectStateSequence(
            lo, [self.states_at(scan) for scan in range(lo, hi + 1)]
        )

    def __eq__(self, other):
        if not isinstance(other, MultiObjectStateSequence):
            return NotImplemented
        if self._start != other._start or len(self._scans) != len(other._scans):
            return False
        for a, b in zip(self._scans, other._scans):
            if a.keys() != b.keys():
                return False
            if any(not np.array_equal(a[lab], b[lab]) for lab in a):
                return False
        return True

    def __repr__(self):
        counts = ",".join(str(len(s)) for s in self._scans)
        return f"MultiObjectStateSequence(start={self._start}, counts=[{counts}])"


def to_trajectories(seq: MultiObjectStateSequence) -> tuple[TrajectorySegment, ...]:
    """Regroup a state sequence by label.  Lossless together with from_trajectories."""
    segments = []
    for label in seq.all_labels():
        s = start_time(label, seq.window_start)
        t = end_time(label, seq.label_sets, seq.window_start)
        states = np.stack([seq.state_of(label, scan) for scan in range(s, t + 1)])
        segments.append(TrajectorySegment(label, s, states))
    return tuple(segments)


def from_trajectories(
    segments: Iterable[TrajectorySegment], window_start: int, n_scans: int
) -> MultiObjectStateSequence:
    """Reassemble per-scan sets from trajectory segments."""
    scans: list[list[LabeledState]] = [[] for _ in range(n_scans)]
    for seg in segments:
        if seg.start < window_start or seg.end > window_start + n_scans - 1:
            raise InvalidSequenceError(f"segment for {seg.label} leaves the window")
        for scan in range(seg.start, seg.end + 1):
            scans[scan - window_start].append(LabeledState(seg.state_at(scan), seg.label))
    return MultiObjectStateSequence(window_start, scans)


def multiscan_exponential(h: Callable[[TrajectorySegment], float], seq: MultiObjectStateSequence) -> float:
    """Product of h over the trajectories of seq; 1 for an empty label set."""
    value = 1.0
    for seg in to_trajectories(seq):
        value *= h(seg)
    return value


def splice(
    g: Callable[[TrajectorySegment], float],
    h: Callable[[TrajectorySegment], float],
    split: int,
) -> Callable[[TrajectorySegment], float]:
    """Combine two trajectory functionals across a split scan.

    The returned functional applies h to trajectories born after the split,
    g to trajectories terminated before it, and the product of g on the head
    and h on the tail (sharing the split scan) otherwise.  It turns the
    product of window-restricted exponentials into a single full-window one.
    """

    def spliced(seg: TrajectorySegment) -> float:
        if seg.start > split:
            return h(seg)
        if seg.end < split:
            return g(seg)
        return g(seg.restrict(seg.start, split)) * h(seg.restrict(split, seg.end))

    return spliced
