"""
End to end: windows to scored recoveries
========================================

Train the token-statistics classifier on bodies with known inlined calls,
run held-out bodies through the full path (scan, predict, coalesce, combine
with decompiler-recovered calls, score), and print the scoring report.
"""

from uninline.bpe import train_bpe
from uninline.classify import fit_token_stats, predict_token_stats
from uninline.coalesce import CoalesceParams, coalesce
from uninline.combine import FunctionRecovery, RecoveryMultiset, combine_recoveries
from uninline.corpus import DecompiledFunction, FunctionId
from uninline.evaluate import EvalCounts, frequency_correlation, score_by_name, score_recoveries
from uninline.windows import WindowSpec, scan_windows

NAMES = ["memset", "strcpy", "sprintf", "strlen"]

# each library function leaves a recognizable 3-line residue when inlined
def pattern(name: str) -> list[str]:
    return [
        f"  {name}_len = (uint)(byte)local_{name[:4]}[0];",
        f"  while ({name}_acc < {name}_len) {{",
        f"    {name}_acc = {name}_acc + *pb_{name[:4]}++;",
    ]


def body(fn: str, ordinal: int, name: str, anchor: int, length: int, shift: int,
         recovered: tuple[str, ...] = ()) -> DecompiledFunction:
    lines = [f"  uVar{(i + shift) % 5} = uVar{(i + shift + 1) % 5} ^ iVar3;" for i in range(length)]
    lines[anchor - 1 : anchor + 2] = pattern(name)
    if recovered:
        lines[length - 2] = f"  {recovered[0]}(&local_buf);"
    return DecompiledFunction(
        FunctionId("demo/held.c", fn, ordinal), tuple(lines),
        true_labels=((name, anchor),), recovered=recovered,
    )


# training corpus: six bodies per name at varied offsets, plus plain filler
train_bodies = [
    body(f"train_{n}_{s}", i, n, anchor=6 + s, length=30, shift=s)
    for i, (n, s) in enumerate((n, s) for n in NAMES for s in range(6))
]
train_bodies += [
    DecompiledFunction(
        FunctionId("demo/fill.c", f"fill_{k}", k),
        tuple(f"  iVar{(i + k) % 4} = iVar{(i + k + 1) % 4} + 1;" for i in range(30)),
    )
    for k in range(8)
]

spec = WindowSpec(height=20, stride=1)
train_windows = [w for b in train_bodies for w in scan_windows(b, spec)]
vocab = train_bpe(["\n".join(b.lines) for b in train_bodies], vocab_size=400, min_frequency=2)
model = fit_token_stats(train_windows, vocab, alpha=1.0)
print(f"trained on {len(train_windows)} windows, labels: {model.labels}")
print()

# held-out bodies: one per name; the strlen body also shows one plain
# (decompiler-visible) memset call that never goes through the classifier
held = [
    body(f"held_{n}", 100 + i, n, anchor=10, length=32, shift=7 + i,
         recovered=("memset",) if n == "strlen" else ())
    for i, n in enumerate(NAMES)
]

params = CoalesceParams()
predicted, decompiler, truth = [], [], []
for b in held:
    labels = [predict_token_stats(model, w) for w in scan_windows(b, spec)]
    predicted.append(FunctionRecovery(b.id, coalesce(labels, params), "O2"))
    decompiler.append(FunctionRecovery(b.id, RecoveryMultiset(b.recovered_counts)))
    truth.append(FunctionRecovery(b.id, RecoveryMultiset(b.true_counts + b.recovered_counts), "O2"))
    print(f"{b.id.name:12s} predicted {predicted[-1].counts.as_dict()}"
          f"  plain calls {decompiler[-1].counts.as_dict()}")
print()

# model-recovered and decompiler-recovered calls add up per function
combined = combine_recoveries(predicted, decompiler)
report = score_recoveries(combined, truth)
print(report.render(breakdown="optimization"))
print()

# per-name scores against how often each target occurs in the wild
per_name = {}
for p, t in zip(combined, truth):
    for name, c in score_by_name(p.counts, t.counts).items():
        per_name[name] = per_name.get(name, EvalCounts()) + c

_FREQ = {"memset": 900.0, "strcpy": 410.0, "sprintf": 300.0, "strlen": 780.0}
corr = frequency_correlation(
    {n: (_FREQ[n], c.precision, c.recall, c.f1) for n, c in per_name.items()}
)
print(f"correlation points: {corr.points}")
# every name scored f1 = 1.0 here, and a flat axis has no defined correlation
print(f"frequency vs f1: {corr.r_f1} (flat metric axis, correctly undefined)")
