"""Event matching with boundary tolerance and the accuracy rollup."""

import numpy as np
import pytest

from pausebench.core import PauseEvent, PauseType
from pausebench.evaluation import (
    MatchConfig, greedy_match, oracle_match, event_accuracy,
    overlap_frames, frame_confusion,
)

S, B, BS = PauseType.S, PauseType.B, PauseType.BS


def random_events(rng, max_events=8, T=500, types=(S, B, BS)):
    events = []
    pos = int(rng.integers(0, 20))
    for _ in range(int(rng.integers(0, max_events + 1))):
        ln = int(rng.integers(3, 50))
        if pos + ln > T:
            break
        events.append(PauseEvent(pos, pos + ln, types[int(rng.integers(len(types)))]))
        pos += ln + int(rng.integers(1, 40))
    return events


class TestMatchConfig:
    def test_defaults(self):
        cfg = MatchConfig()
        assert cfg.tolerance_frames == 10
        assert cfg.min_overlap_ratio == 0.30
        assert cfg.require_both_boundaries is True

    @pytest.mark.parametrize("kw", [
        dict(tolerance_frames=-1), dict(min_overlap_ratio=0.0),
        dict(min_overlap_ratio=1.5),
    ])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            MatchConfig(**kw)


class TestFeasibility:
    def test_overlap_frames(self):
        assert overlap_frames(PauseEvent(0, 10, S), PauseEvent(5, 15, S)) == 5
        assert overlap_frames(PauseEvent(0, 10, S), PauseEvent(10, 15, S)) == 0

    def test_boundary_tolerance_edges(self):
        gt = [PauseEvent(20, 60, S)]
        cfg = MatchConfig(tolerance_frames=10)
        # both boundaries off by exactly the tolerance: still a match
        ok = greedy_match(gt, [PauseEvent(30, 70, S)], cfg)
        assert len(ok.pairs) == 1
        # one frame beyond: no match
        bad = greedy_match(gt, [PauseEvent(31, 70, S)], cfg)
        assert len(bad.pairs) == 0

    def test_overlap_floor(self):
        gt = [PauseEvent(20, 60, S)]  # 40 frames -> needs >= 12 overlap
        cfg = MatchConfig(tolerance_frames=30)
        assert len(greedy_match(gt, [PauseEvent(48, 90, S)], cfg).pairs) == 1
        assert len(greedy_match(gt, [PauseEvent(49, 90, S)], cfg).pairs) == 0

    def test_either_boundary_mode(self):
        gt = [PauseEvent(20, 60, S)]
        pred = [PauseEvent(22, 90, S)]  # offset off by 30
        strict = MatchConfig(tolerance_frames=10)
        loose = MatchConfig(tolerance_frames=10, require_both_boundaries=False)
        assert len(greedy_match(gt, pred, strict).pairs) == 0
        assert len(greedy_match(gt, pred, loose).pairs) == 1


class TestGreedy:
    def test_exact_self_match(self, rng):
        events = random_events(rng)
        result = greedy_match(events, list(events))
        assert len(result.pairs) == len(events)
        assert result.agree_count == len(events)
        assert result.unmatched_gt == []
        assert result.unmatched_pred == []

    def test_one_to_one(self):
        gt = [PauseEvent(0, 20, S), PauseEvent(25, 45, S)]
        pred = [PauseEvent(2, 22, S)]
        result = greedy_match(gt, pred)
        assert len(result.pairs) == 1
        assert len(result.unmatched_gt) == 1

    def test_prefers_agreeing_type_over_distance(self):
        gt = [PauseEvent(20, 60, S)]
        pred = [PauseEvent(20, 60, B), PauseEvent(25, 65, S)]
        result = greedy_match(gt, pred)
        (g, p, agree), = result.pairs
        assert p.ptype == S
        assert agree

    def test_type_mismatch_still_pairs(self):
        gt = [PauseEvent(20, 60, S)]
        pred = [PauseEvent(20, 60, B)]
        result = greedy_match(gt, pred)
        (g, p, agree), = result.pairs
        assert not agree
        assert result.agree_count == 0


class TestOracle:
    def test_known_greedy_blind_spot(self):
        # the closest agreeing pair uses the only prediction that can
        # cover the second event; the optimal assignment crosses
        gt = [PauseEvent(0, 10, S), PauseEvent(11, 21, S)]
        pred = [PauseEvent(4, 14, S), PauseEvent(0, 20, S)]
        g = greedy_match(gt, pred)
        o = oracle_match(gt, pred)
        assert g.agree_count == 1
        assert o.agree_count == 2

    def test_never_below_greedy_on_random_instances(self, rng):
        cfg = MatchConfig()
        for _ in range(200):
            gt = random_events(rng)
            pred = random_events(rng)
            g = greedy_match(gt, pred, cfg)
            o = oracle_match(gt, pred, cfg)
            assert o.agree_count >= g.agree_count

    def test_refuses_large_instances(self):
        events = [PauseEvent(i * 20, i * 20 + 10, S) for i in range(11)]
        with pytest.raises(ValueError):
            oracle_match(events, events[:1])


class TestEventAccuracy:
    def test_rollup(self):
        gt = [PauseEvent(0, 20, S), PauseEvent(40, 60, B), PauseEvent(80, 100, B)]
        pred = [PauseEvent(0, 20, S), PauseEvent(40, 60, BS)]
        result = greedy_match(gt, pred)
        acc = event_accuracy(result, gt)
        assert acc["per_type"]["S"] == 1.0
        assert acc["per_type"]["B"] == 0.0
        assert acc["per_type"]["BS"] == "n/a"
        assert acc["overall"] == pytest.approx(1 / 3)
        assert acc["counts"]["gt"] == {"S": 1, "B": 2, "BS": 0}

    def test_empty_gt(self):
        acc = event_accuracy(greedy_match([], []), [])
        assert acc["overall"] == "n/a"


class TestFrameConfusion:
    def test_counts(self):
        gt = np.array([0, 1, 1, 2])
        pred = np.array([0, 1, 2, 2])
        m = frame_confusion(gt, pred)
        assert m.shape == (4, 4)
        assert m[1, 1] == 1 and m[1, 2] == 1 and m[2, 2] == 1 and m[0, 0] == 1
        assert m.sum() == 4
