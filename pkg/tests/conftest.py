"""Shared builders for synthetic pseudo-C bodies and window sets."""

from __future__ import annotations

import numpy as np
import pytest

from uninline.corpus import DecompiledFunction, FunctionId


def make_body(
    name: str,
    length: int,
    labels: tuple[tuple[str, int], ...] = (),
    path: str = "fixture.c",
    ordinal: int = 0,
    filler: str = "  iVar{i} = iVar{i} + 1;",
) -> DecompiledFunction:
    """A body of `length` boilerplate lines with the given (name, anchor) labels."""
    lines = tuple(filler.format(i=i) for i in range(length))
    return DecompiledFunction(
        id=FunctionId(path, name, ordinal),
        lines=lines,
        true_labels=tuple(labels),
        recovered=(),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)
