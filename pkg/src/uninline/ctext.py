"""Lexical helpers for C and decompiler pseudo-C.

Nothing here parses C properly. The pipeline only needs to know which
characters are *code* (outside string/char literals, comments, and
preprocessor directives) so that brace counting and call-site matching
do not trip over braces in string literals or commented-out code.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, NamedTuple

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class ScanState:
    """Carry-over lexical state between consecutive lines."""

    in_comment: bool = False
    in_directive: bool = False


START_STATE = ScanState()


def code_view(line: str, state: ScanState = START_STATE) -> tuple[str, ScanState]:
    """Return `line` with every non-code character blanked to a space.

    The result has the same length as the input, so column offsets are
    preserved. String and character literals (quotes included), `//` and
    `/* */` comments, and preprocessor directives (with backslash
    continuations) are all blanked. Literals are assumed not to span
    lines; an unterminated literal is closed at end of line.
    """
    if state.in_directive or (not state.in_comment and line.lstrip().startswith("#")):
        continued = line.endswith("\\")
        return " " * len(line), ScanState(in_comment=False, in_directive=continued)

    out = [" "] * len(line)
    mode = "comment" if state.in_comment else "code"
    escaped = False
    i = 0
    while i < len(line):
        ch = line[i]
        if mode == "code":
            if ch == '"':
                mode = "string"
            elif ch == "'":
                mode = "char"
            elif ch == "/" and line.startswith("//", i):
                break
            elif ch == "/" and line.startswith("/*", i):
                mode = "comment"
                i += 2
                continue
            else:
                out[i] = ch
        elif mode in ("string", "char"):
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif (ch == '"' and mode == "string") or (ch == "'" and mode == "char"):
                mode = "code"
        else:  # comment
            if ch == "*" and line.startswith("*/", i):
                mode = "code"
                i += 2
                continue
        i += 1
    return "".join(out), ScanState(in_comment=(mode == "comment"), in_directive=False)


def code_views(lines: Iterable[str]) -> list[str]:
    """Blank out non-code characters across a whole file."""
    state = START_STATE
    views = []
    for line in lines:
        view, state = code_view(line, state)
        views.append(view)
    return views


class CallSite(NamedTuple):
    line: int
    col: int
    name: str


def find_call_sites(
    lines: Iterable[str], names: frozenset[str] | set[str], min_depth: int = 1
) -> list[CallSite]:
    """Locate invocations of `names`: an identifier directly followed by `(`.

    Matching is lexical and case-insensitive against the (lowercased)
    `names`. Member accesses (`p->free(..)`, `obj.free(..)`) are skipped,
    as is anything at brace depth below `min_depth`, which excludes
    declarations, prototypes, and definition headers at file scope.
    Results are in source order.
    """
    sites = []
    depth = 0
    for lineno, view in enumerate(code_views(lines)):
        for match in IDENT_RE.finditer(view):
            if match.group(0).lower() not in names:
                continue
            rest = view[match.end():].lstrip()
            if not rest.startswith("("):
                continue
            before = view[: match.start()].rstrip()
            if before.endswith(".") or before.endswith("->"):
                continue
            here = depth + view[: match.start()].count("{") - view[: match.start()].count("}")
            if here >= min_depth:
                sites.append(CallSite(lineno, match.start(), match.group(0).lower()))
        depth += view.count("{") - view.count("}")
    return sites
