"""
Sliding windows over a decompiled body
======================================

Cut a function listing into overlapping fixed-height windows, watch how the
anchor line of an inlined call labels every window that covers it, then thin
the unlabeled majority class for training.
"""

from collections import Counter

from uninline.corpus import DecompiledFunction, FunctionId
from uninline.windows import EMPTY, WindowSpec, rebalance, scan_windows

# a 60-line body with one known inlined memcpy anchored at line 17
lines = tuple(f"  iVar{i % 7} = iVar{(i + 1) % 7} + uVar2;" for i in range(60))
body = DecompiledFunction(
    FunctionId("demo/blob.c", "unpack_record", 0),
    lines,
    true_labels=(("memcpy", 17),),
)

spec = WindowSpec(height=20, stride=1)
windows = scan_windows(body, spec)

# a body of L lines yields max(1, L - height + 1) windows at stride 1
print(f"body length {len(lines)} -> {len(windows)} windows of height {spec.height}")

# every window whose [start, start + height) span covers line 17 inherits the
# label; the label column reads as one contiguous band
column = "".join("m" if w.label == "memcpy" else "." for w in windows)
print(f"label column (m = memcpy, . = EMPTY): {column}")

labeled = [w for w in windows if w.label != EMPTY]
print(f"labeled windows: {len(labeled)} (starts {labeled[0].start}..{labeled[-1].start})")
print()

# short bodies still produce one truncated window
stub = DecompiledFunction(FunctionId("demo/blob.c", "tiny", 1), ("  return 0;",) * 4)
print(f"4-line body -> {len(scan_windows(stub, spec))} window")
print()

# real corpora are dominated by EMPTY windows; discard a seeded fraction of
# them before training, never touching the labeled ones
kept = rebalance(windows, discard_fraction=0.8, seed=7)
before = Counter("labeled" if w.label != EMPTY else "empty" for w in windows)
after = Counter("labeled" if w.label != EMPTY else "empty" for w in kept)
print(f"before rebalance: {dict(before)}")
print(f"after  rebalance: {dict(after)} (seed 7, discard 0.8, labeled untouched)")
