"""Labels, sequences, trajectories, and the multi-scan exponential algebra."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msglmb import (
    InvalidSequenceError,
    Label,
    LabeledState,
    MultiObjectStateSequence,
    TrajectorySegment,
    end_time,
    from_trajectories,
    multiscan_exponential,
    start_time,
    to_trajectories,
)
from msglmb.labels import splice


def seq_from_spans(spans, window_start=0, n_scans=3, rng=None):
    """Build a valid sequence from {label: (first, last)} life spans."""
    rng = rng or np.random.default_rng(0)
    scans = []
    for scan in range(window_start, window_start + n_scans):
        here = []
        for label, (first, last) in spans.items():
            if first <= scan <= last:
                here.append(LabeledState(rng.normal(size=2), label))
        scans.append(here)
    return MultiObjectStateSequence(window_start, scans)


def random_spans(rng, n_scans=3, n_labels=4, window_start=0):
    spans = {}
    for i in range(n_labels):
        birth = int(rng.integers(window_start, window_start + n_scans))
        first = max(window_start, birth)
        last = int(rng.integers(first, window_start + n_scans))
        spans[Label(birth, i + 1)] = (first, last)
    return spans


class TestLabel:
    def test_ordering_is_lexicographic(self):
        assert Label(1, 2) < Label(2, 1)
        assert Label(2, 1) < Label(2, 3)
        assert sorted([Label(3, 1), Label(1, 2), Label(1, 1)]) == [
            Label(1, 1),
            Label(1, 2),
            Label(3, 1),
        ]

    def test_string_round_trip(self):
        assert str(Label(3, 1)) == "3.1"
        assert Label.parse("3.1") == Label(3, 1)
        assert Label.parse(str(Label(12, 34))) == Label(12, 34)


class TestStartEndTime:
    def test_start_time_examples(self):
        assert start_time(Label(3, 1), 0) == 3
        assert start_time(Label(3, 1), 5) == 5
        assert start_time(Label(0, 2), 0) == 0

    def test_end_time_examples(self):
        a = Label(0, 1)
        assert end_time(a, [{a}, {a}, set()], 0) == 1
        assert end_time(a, [{a}, set(), set()], 0) == 0
        assert end_time(a, [{a}] * 5, 0) == 4

    def test_end_time_missing_label(self):
        with pytest.raises(InvalidSequenceError, match="not in window"):
            end_time(Label(0, 1), [set(), set()], 0)


class TestSequenceValidation:
    def test_duplicate_label_rejected(self):
        a = Label(0, 1)
        with pytest.raises(InvalidSequenceError, match="duplicate"):
            MultiObjectStateSequence(
                0, [[LabeledState([0.0], a), LabeledState([1.0], a)]]
            )

    def test_resurrection_rejected(self):
        a = Label(0, 1)
        with pytest.raises(InvalidSequenceError, match="resurrect"):
            MultiObjectStateSequence(
                0,
                [[LabeledState([0.0], a)], [], [LabeledState([1.0], a)]],
            )

    def test_late_first_appearance_rejected(self):
        a = Label(0, 1)
        with pytest.raises(InvalidSequenceError, match="first appears"):
            MultiObjectStateSequence(0, [[], [LabeledState([0.0], a)]])

    def test_dimension_change_rejected(self):
        with pytest.raises(InvalidSequenceError, match="dimension"):
            MultiObjectStateSequence(
                0,
                [
                    [LabeledState([0.0], Label(0, 1))],
                    [LabeledState([0.0, 1.0], Label(0, 1))],
                ],
            )


class TestTrajectories:
    def test_empty_sequence(self):
        seq = MultiObjectStateSequence(0, [[], [], []])
        assert to_trajectories(seq) == ()

    def test_single_label_three_scans(self):
        seq = seq_from_spans({Label(0, 1): (0, 2)})
        segs = to_trajectories(seq)
        assert len(segs) == 1
        assert segs[0].start == 0 and segs[0].length == 3

    def test_round_trip_random_sequences(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            spans = random_spans(rng)
            seq = seq_from_spans(spans, rng=rng)
            rebuilt = from_trajectories(to_trajectories(seq), 0, seq.n_scans)
            assert rebuilt == seq

    def test_round_trip_nonzero_window_start(self):
        rng = np.random.default_rng(7)
        spans = random_spans(rng, window_start=2)
        seq = seq_from_spans(spans, window_start=2, rng=rng)
        assert from_trajectories(to_trajectories(seq), 2, seq.n_scans) == seq


class TestMultiscanExponential:
    def test_empty_product_is_one(self):
        seq = MultiObjectStateSequence(0, [[], []])
        assert multiscan_exponential(lambda seg: 3.0, seq) == 1.0

    def test_constant_function(self):
        seq = seq_from_spans({Label(0, 1): (0, 2), Label(1, 2): (1, 2)})
        assert multiscan_exponential(lambda seg: 3.0, seq) == pytest.approx(9.0)

    def test_disjoint_union_factorizes(self):
        rng = np.random.default_rng(3)
        spans_a = {Label(0, 1): (0, 2), Label(1, 2): (1, 1)}
        spans_b = {Label(0, 7): (0, 1), Label(2, 8): (2, 2)}
        h = lambda seg: 1.0 + 0.3 * seg.length + abs(seg.states).sum() * 0.01
        seq_a = seq_from_spans(spans_a, rng=rng)
        seq_b = seq_from_spans(spans_b, rng=rng)
        union = MultiObjectStateSequence(
            0, [seq_a.states_at(i) + seq_b.states_at(i) for i in range(3)]
        )
        assert multiscan_exponential(h, union) == pytest.approx(
            multiscan_exponential(h, seq_a) * multiscan_exponential(h, seq_b), rel=1e-12
        )

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_product_of_functions_factorizes(self, seed):
        rng = np.random.default_rng(seed)
        seq = seq_from_spans(random_spans(rng), rng=rng)
        g = lambda seg: 1.0 + 0.2 * seg.length
        h = lambda seg: np.exp(0.05 * float(seg.states.sum()))
        gh = lambda seg: g(seg) * h(seg)
        lhs = multiscan_exponential(gh, seq)
        rhs = multiscan_exponential(g, seq) * multiscan_exponential(h, seq)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_splice_property_by_enumeration(self):
        # the product of window-restricted exponentials equals the spliced
        # full-window exponential, for every split scan of 3-scan sequences
        rng = np.random.default_rng(11)
        g = lambda seg: 1.0 + 0.1 * seg.length + 0.01 * float(abs(seg.states).sum())
        h = lambda seg: 2.0 - 0.05 * seg.length
        for _ in range(10):
            seq = seq_from_spans(random_spans(rng), rng=rng)
            for split in range(0, 3):
                lhs = multiscan_exponential(g, seq.restrict(0, split)) * multiscan_exponential(
                    h, seq.restrict(split, 2)
                )
                rhs = multiscan_exponential(splice(g, h, split), seq)
                assert lhs == pytest.approx(rhs, rel=1e-12)


class TestLabelPartition:
    def test_partition_cells_cover_and_are_disjoint(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            seq = seq_from_spans(random_spans(rng, n_labels=5), rng=rng)
            segs = {s.label: s for s in to_trajectories(seq)}
            every = set(segs)
            for i in range(0, 3):
                terminated = {l for l, s in segs.items() if s.end < i}
                live = {l for l, s in segs.items() if s.start <= i <= s.end}
                born_after = {l for l, s in segs.items() if s.start > i}
                assert terminated | live | born_after == every
                assert not terminated & live
                assert not live & born_after
                assert not terminated & born_after
                assert live == seq.labels_at(i)
