"""Noise-tolerant run-length coalescing."""

from __future__ import annotations

import numpy as np
import pytest

from uninline.coalesce import (
    CoalesceParams,
    LabelSequence,
    RunSegment,
    bridge_and_encode,
    coalesce,
    denoise,
    finalize,
)
from uninline.corpus import FunctionId
from uninline.windows import EMPTY

X = EMPTY
GOLDEN = ["a", "a", X, X, "a", "a", "b", "b", "b", "b", "b", X, "c", X, X, X, X, "c", "d", "c"]


def test_denoise_erases_isolated_label() -> None:
    out = denoise(GOLDEN, 5)
    assert out[18] == X  # the lone d has no d within 5 on either side
    assert out[:18] == GOLDEN[:18]
    assert out[19] == "c"


def test_denoise_keeps_label_with_distant_support() -> None:
    # c at 12 sees the c at 17 (5 ahead); both survive
    out = denoise(GOLDEN, 5)
    assert out[12] == "c" and out[17] == "c"


def test_denoise_all_empty_unchanged() -> None:
    seq = [X] * 12
    assert denoise(seq, 5) == seq


def test_denoise_judges_against_original_sequence() -> None:
    # q is erased; the b pair supports itself across the erased cell
    seq = ["b", "q", "b"]
    assert denoise(seq, 2) == ["b", X, "b"]


def test_denoise_boundary_uses_up_to_n_neighbors() -> None:
    assert denoise(["a", "a"], 5) == ["a", "a"]
    assert denoise(["a"], 5) == [X]


def test_bridge_fills_small_same_label_gaps() -> None:
    runs = bridge_and_encode(denoise(GOLDEN, 5), 3)
    assert [(r.label, r.length) for r in runs] == [("a", 6), ("b", 5), ("c", 1), ("c", 3)]


def test_bridge_gap_above_limit_stays_open() -> None:
    runs = bridge_and_encode(["a", X, X, X, X, "a"], 3)
    assert [(r.label, r.length) for r in runs] == [("a", 1), ("a", 1)]


def test_bridge_requires_equal_flanks() -> None:
    runs = bridge_and_encode(["a", X, "b"], 3)
    assert [(r.label, r.length) for r in runs] == [("a", 1), ("b", 1)]


def test_all_empty_encodes_to_nothing() -> None:
    assert bridge_and_encode([X, X, X], 3) == []


def test_finalize_threshold_and_ceiling() -> None:
    runs = [RunSegment("a", 6), RunSegment("b", 5), RunSegment("c", 1), RunSegment("c", 3)]
    assert finalize(runs, 4, 20).as_dict() == {"a": 1, "b": 1}
    assert finalize([RunSegment("a", 40)], 4, 20).as_dict() == {"a": 2}
    assert finalize([RunSegment("a", 3)], 4, 20).as_dict() == {}


def test_coalesce_composes_all_steps() -> None:
    assert coalesce(GOLDEN).as_dict() == {"a": 1, "b": 1}
    assert coalesce([]).as_dict() == {}


def test_coalesce_accepts_label_sequence_records() -> None:
    seq = LabelSequence(FunctionId("x.c", "f", 0), tuple(GOLDEN))
    assert coalesce(seq).as_dict() == {"a": 1, "b": 1}
    assert LabelSequence.from_json(seq.as_json()) == seq


def test_params_validated() -> None:
    with pytest.raises(ValueError):
        CoalesceParams(neighbor_span=0)
    with pytest.raises(ValueError):
        RunSegment(EMPTY, 3)
    with pytest.raises(ValueError):
        RunSegment("a", 0)


def _oracle(seq: list[str], n: int, g: int, t: int, d: int) -> dict[str, int]:
    """Direct reading of the three steps, written independently of the
    package: index sets instead of slices, explicit run assembly."""
    kept = []
    for i, lab in enumerate(seq):
        if lab == X:
            kept.append(X)
            continue
        support = False
        for j in range(len(seq)):
            if j != i and abs(j - i) <= n and seq[j] == lab:
                support = True
        kept.append(lab if support else X)
    # fill gaps
    filled = list(kept)
    i = 0
    while i < len(filled):
        if filled[i] != X:
            i += 1
            continue
        j = i
        while j < len(filled) and filled[j] == X:
            j += 1
        left = filled[i - 1] if i > 0 else None
        right = filled[j] if j < len(filled) else None
        if left is not None and right is not None and left == right and (j - i) <= g:
            for k in range(i, j):
                filled[k] = left
        i = j
    # assemble runs
    runs: list[tuple[str, int]] = []
    for lab in filled:
        if lab == X:
            runs.append((X, 0))
            continue
        if runs and runs[-1][0] == lab:
            runs[-1] = (lab, runs[-1][1] + 1)
        else:
            runs.append((lab, 1))
    counts: dict[str, int] = {}
    for lab, length in runs:
        if lab != X and length >= t:
            counts[lab] = counts.get(lab, 0) + (length + d - 1) // d
    return counts


def test_random_sequences_match_direct_oracle(rng) -> None:
    alphabet = [X, "a", "b", "c", "d"]
    params = CoalesceParams()
    for _ in range(2000):
        length = int(rng.integers(0, 31))
        seq = [alphabet[int(rng.integers(0, len(alphabet)))] for _ in range(length)]
        got = coalesce(seq, params).as_dict()
        want = _oracle(seq, 5, 3, 4, 20)
        assert got == want, seq


def test_unbroken_run_counts_ceil_length_over_divisor() -> None:
    params = CoalesceParams()
    for length in range(4, 101):
        out = coalesce(["a"] * length, params)
        assert out.as_dict() == {"a": (length + 19) // 20}


def test_separated_runs_count_independently() -> None:
    # gap of 4 exceeds the bridge, so each run of 25 contributes 2
    seq = ["a"] * 25 + [X] * 4 + ["a"] * 25
    assert coalesce(seq, CoalesceParams()).as_dict() == {"a": 4}


def test_label_renaming_equivariance(rng) -> None:
    mapping = {"a": "zz", "b": "yy", "c": "xx", X: X}
    params = CoalesceParams()
    for _ in range(200):
        length = int(rng.integers(0, 30))
        seq = [[X, "a", "b", "c"][int(rng.integers(0, 4))] for _ in range(length)]
        renamed = [mapping[l] for l in seq]
        direct = {mapping[k]: v for k, v in coalesce(seq, params).as_dict().items()}
        assert coalesce(renamed, params).as_dict() == direct


def test_denoise_reversal_symmetry(rng) -> None:
    for _ in range(200):
        length = int(rng.integers(0, 30))
        seq = [[X, "a", "b"][int(rng.integers(0, 3))] for _ in range(length)]
        assert denoise(seq[::-1], 5) == denoise(seq, 5)[::-1]


def test_raising_threshold_never_increases_counts(rng) -> None:
    for _ in range(200):
        length = int(rng.integers(0, 30))
        seq = [[X, "a", "b"][int(rng.integers(0, 3))] for _ in range(length)]
        lower = coalesce(seq, CoalesceParams(retain_threshold=3)).as_dict()
        higher = coalesce(seq, CoalesceParams(retain_threshold=5)).as_dict()
        for name, count in higher.items():
            assert count <= lower.get(name, 0)
