"""
From noisy window labels to an invocation multiset
==================================================

Walk one predicted label sequence through the three coalescing stages:
erase unsupported singletons, bridge short gaps inside a band, then turn
the surviving runs into per-function call counts.
"""

from uninline.coalesce import CoalesceParams, bridge_and_encode, coalesce, denoise, finalize
from uninline.windows import EMPTY

# 20 consecutive window predictions for one function; "." marks EMPTY
seq = ["a", "a", ".", ".", "a", "a", "b", "b", "b", "b",
       "b", ".", "c", ".", ".", ".", ".", "c", "d", "c"]
labels = [s if s != "." else EMPTY for s in seq]
params = CoalesceParams()  # neighbor_span 5, bridge_gap 3, retain 4, divisor 20

show = lambda xs: "".join(x if x else "." for x in xs)
print(f"raw predictions : {show(labels)}")

# stage 1: a non-EMPTY cell survives only if the same label appears again
# within neighbor_span cells on either side; the lone d has no support
cleaned = denoise(labels, params.neighbor_span)
print(f"after denoise   : {show(cleaned)}  (the stray d is gone)")

# stage 2: gaps of up to bridge_gap EMPTY cells between equal labels close,
# then the sequence collapses to runs
runs = bridge_and_encode(cleaned, params.bridge_gap)
print(f"runs            : {[(r.label, r.length) for r in runs]}")
print("                  the 4-wide c gap exceeds bridge_gap, so c stays split")

# stage 3: runs shorter than retain_threshold are dropped; each survivor
# counts ceil(length / count_divisor) invocations
counts = finalize(runs, params.retain_threshold, params.count_divisor)
print(f"final multiset  : {counts.as_dict()}")
print()

# the one-call convenience wrapper does all three stages
assert coalesce(labels, params).as_dict() == counts.as_dict()

# a long unbroken band of predictions means several distinct calls: a run of
# 45 equal labels is read as ceil(45 / 20) = 3 invocations
wide = ["memset"] * 45
print(f"45 consecutive memset predictions -> {coalesce(wide, params).as_dict()}")
