"""
Marking library calls so they survive compilation
=================================================

Instrument a C file with indelible string-assignment markers, prove the
instrumentation strips back out byte for byte, then reconcile a simulated
decompiled listing against the decompiler's own call recovery.
"""

from uninline.corpus import DecompiledFunction, FunctionId, Language, SourceFile, TargetFunctionSet
from uninline.markers import (
    MARKER_PREFIX,
    extract_markers,
    inject_markers,
    reconcile_function,
    strip_instrumentation,
)

C_TEXT = b"""\
#include <stdio.h>
#include <string.h>

void emit(char *dst, const char *who) {
    char line[64];
    sprintf(line, "hello %s", who);
    memset(dst, 0, 64);
    strcpy(dst, line);
    sprintf(dst + 32, "again %s", who);
}
"""

targets = TargetFunctionSet.from_names(["sprintf", "memset", "EnterCriticalSection"])
source = SourceFile("demo/emit.c", C_TEXT, Language.C)

marked, plan = inject_markers(source, targets)
print(f"marked {len(plan.assignments)} call sites in {source.path}")
print(f"marker array: {plan.file_array_name}")
print()
print(marked.content.decode())

# the marker lines are pure additions; stripping them restores the input exactly
assert strip_instrumentation(marked.content) == C_TEXT
print("strip round-trip: byte-identical")
print()

# Simulate what a decompiler hands back: the string assignments survive as
# opaque stores, the first sprintf and the memset were inlined into anonymous
# code, but the second sprintf came through as a plain recoverable call.
surviving = [ln.strip() for ln in marked.content.decode().splitlines() if MARKER_PREFIX in ln]
listing = (
    "void emit(char *dst, char *who)",
    "{",
    "  char acStack_58 [64];",
    surviving[0],
    "  __builtin_snprintf(acStack_58, 0x40, &DAT_00402000, who);",
    surviving[1],
    "  _zero_span(dst, 0x40);",
    "  strcpy(dst, acStack_58);",
    surviving[2],
    "  sprintf(dst + 0x20, &DAT_00402010, who);",
    "}",
)
body = DecompiledFunction(FunctionId("demo/emit.c", "emit", 0), listing)

found = extract_markers(body)
print(f"markers surviving decompilation: {[(m.name, m.line) for m in found]}")

# reconcile: every plain call the decompiler already sees cancels one marker,
# so the survivors are exactly the calls that got inlined away
reconciled = reconcile_function(body, targets)
print(f"decompiler-recovered target calls: {reconciled.recovered}")
print(f"inlined-call labels (name, anchor line): {reconciled.true_labels}")
print(f"ground-truth multiset: {dict(reconciled.true_counts)}")
