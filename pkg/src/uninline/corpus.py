"""Data model and ingestion for original C sources and decompiled pseudo-C.

A corpus is described by a manifest, one file per line::

    role<TAB>optlevel<TAB>path

where role is ``original`` or ``decompiled``, optlevel is one of
O0 O1 Os O2 O3 Of Unknown, and path is relative to the corpus root.
Blank lines and lines starting with ``#`` are skipped. The format is
deliberately trivial so shell pipelines can generate it.

Decompiled files are carved into per-function records by brace matching
from a signature-shaped header line; decompiler output is syntactically
regular enough that this is reliable. All types here are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

import enum
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from . import ctext
from . import jsonl

log = logging.getLogger(__name__)


class Language(enum.Enum):
    C = "C"
    PSEUDO_C = "PseudoC"


class OptLevel(enum.Enum):
    O0 = "O0"
    O1 = "O1"
    Os = "Os"
    O2 = "O2"
    O3 = "O3"
    Of = "Of"
    UNKNOWN = "Unknown"


ROLE_LANGUAGE = {"original": Language.C, "decompiled": Language.PSEUDO_C}


def split_lines(content: bytes) -> list[str]:
    """Split raw bytes into lines; LF and CRLF both terminate a line.

    A trailing fragment with no terminator still counts as a line.
    Decoding uses surrogateescape so arbitrary bytes survive a
    decode/encode round trip.
    """
    text = content.decode("utf-8", "surrogateescape")
    parts = text.split("\n")
    if parts and parts[-1] == "":
        parts.pop()
    return [p[:-1] if p.endswith("\r") else p for p in parts]


@dataclass(frozen=True)
class SourceFile:
    path: str
    content: bytes
    language: Language
    optimization: OptLevel = OptLevel.UNKNOWN

    @property
    def lines(self) -> list[str]:
        return split_lines(self.content)


class FunctionId(NamedTuple):
    """Stable key for one decompiled function body."""

    path: str
    name: str
    ordinal: int

    def as_json(self) -> list:
        return [self.path, self.name, self.ordinal]

    @classmethod
    def from_json(cls, obj: Sequence) -> "FunctionId":
        path, name, ordinal = obj
        return cls(str(path), str(name), int(ordinal))


@dataclass(frozen=True)
class DecompiledFunction:
    """One decompiled function body: ordered lines plus ground truth.

    `true_labels` holds residual markers as (function name, anchor line)
    pairs; `recovered` is the multiset of target-function calls the
    decompiler itself recovered, stored as a sorted name tuple.
    """

    id: FunctionId
    lines: tuple[str, ...]
    true_labels: tuple[tuple[str, int], ...] = ()
    recovered: tuple[str, ...] = ()
    truncated: bool = False

    def __post_init__(self):
        for name, anchor in self.true_labels:
            if not 0 <= anchor < len(self.lines):
                raise ValueError(
                    f"{self.id}: label anchor {anchor} outside body of {len(self.lines)} lines"
                )
            if not name:
                raise ValueError(f"{self.id}: empty label name")

    @property
    def recovered_counts(self) -> Counter:
        return Counter(self.recovered)

    @property
    def true_counts(self) -> Counter:
        return Counter(name for name, _ in self.true_labels)

    def as_json(self) -> dict:
        return {
            "id": self.id.as_json(),
            "lines": list(self.lines),
            "true_labels": [[name, anchor] for name, anchor in self.true_labels],
            "recovered": list(self.recovered),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DecompiledFunction":
        return cls(
            id=FunctionId.from_json(obj["id"]),
            lines=tuple(obj["lines"]),
            true_labels=tuple((str(n), int(a)) for n, a in obj["true_labels"]),
            recovered=tuple(sorted(obj["recovered"])),
        )


def read_functions(path: str | Path) -> list[DecompiledFunction]:
    return [DecompiledFunction.from_json(obj) for obj in jsonl.read_jsonl(path)]


def write_functions(path: str | Path, functions: Iterable[DecompiledFunction]) -> int:
    return jsonl.write_jsonl(path, (fn.as_json() for fn in functions))


@dataclass(frozen=True)
class TargetFunctionSet:
    """The library functions the pipeline tries to recover.

    Names are lowercased; matching throughout the toolkit is
    case-insensitive via this normalization.
    """

    names: tuple[str, ...]
    frequencies: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for name in self.names:
            if not name:
                raise ValueError("empty target-function name")
            if name != name.lower():
                raise ValueError(f"target name not normalized: {name!r}")
            if name in seen:
                raise ValueError(f"duplicate target name: {name!r}")
            seen.add(name)

    @classmethod
    def from_names(
        cls, names: Iterable[str], frequencies: dict[str, int] | None = None
    ) -> "TargetFunctionSet":
        normalized = []
        seen = set()
        for name in names:
            low = name.strip().lower()
            if low and low not in seen:
                normalized.append(low)
                seen.add(low)
        freqs = {k.lower(): int(v) for k, v in (frequencies or {}).items()}
        return cls(tuple(normalized), freqs)

    def __contains__(self, name: str) -> bool:
        return name.lower() in set(self.names)

    @property
    def name_set(self) -> frozenset[str]:
        return frozenset(self.names)


def load_targets(path: str | Path) -> TargetFunctionSet:
    """Read a target list: one ``name`` or ``name<TAB>frequency`` per line."""
    names = []
    freqs = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        names.append(parts[0])
        if len(parts) > 1:
            freqs[parts[0].lower()] = int(parts[1])
    return TargetFunctionSet.from_names(names, freqs)


@dataclass(frozen=True)
class ManifestEntry:
    role: str
    optlevel: OptLevel
    path: str


@dataclass(frozen=True)
class LoadError:
    path: str
    message: str


@dataclass(frozen=True)
class CorpusLoad:
    files: tuple[SourceFile, ...]
    errors: tuple[LoadError, ...]


def parse_manifest(lines: Iterable[str]) -> tuple[list[ManifestEntry], list[LoadError]]:
    entries: list[ManifestEntry] = []
    errors: list[LoadError] = []
    seen_paths: set[str] = set()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            errors.append(LoadError(line, f"line {lineno}: expected role<TAB>optlevel<TAB>path"))
            continue
        role, opt, path = parts
        if role not in ROLE_LANGUAGE:
            errors.append(LoadError(path, f"line {lineno}: undeclared role {role!r}"))
            continue
        try:
            optlevel = OptLevel(opt)
        except ValueError:
            errors.append(LoadError(path, f"line {lineno}: unknown optimization level {opt!r}"))
            continue
        if path in seen_paths:
            errors.append(LoadError(path, f"line {lineno}: duplicate path"))
            continue
        seen_paths.add(path)
        entries.append(ManifestEntry(role, optlevel, path))
    return entries, errors


def load_corpus(root: str | Path, manifest: str | Path) -> CorpusLoad:
    """Load every file listed in the manifest under `root`.

    Per-entry failures (missing file, bad role) are collected instead of
    aborting the load. Files come back sorted by path, so the result is
    independent of manifest order and filesystem enumeration.
    """
    root = Path(root)
    with open(manifest, "r", encoding="utf-8") as fh:
        entries, errors = parse_manifest(fh)
    files: list[SourceFile] = []
    for entry in entries:
        full = root / entry.path
        try:
            content = full.read_bytes()
        except OSError as exc:
            errors.append(LoadError(entry.path, f"unreadable: {exc}"))
            continue
        files.append(
            SourceFile(
                path=entry.path,
                content=content,
                language=ROLE_LANGUAGE[entry.role],
                optimization=entry.optlevel,
            )
        )
    files.sort(key=lambda f: f.path)
    return CorpusLoad(tuple(files), tuple(errors))


# Words that can precede "(" at file scope without being a function name.
_NON_NAMES = frozenset(
    """if else while for do switch return goto sizeof case break continue
    typedef struct union enum int char void long short unsigned signed
    float double const static volatile register extern inline""".split()
)


def _match_header(views: list[str], start: int) -> tuple[str, int, int] | None:
    """Try to read a function signature beginning at line `start`.

    Returns (function name, open-brace line, open-brace column) or None.
    The shape accepted: type tokens, an identifier, a balanced paren
    group (possibly spanning lines), then `{` either on the same line or
    on the next non-blank line.
    """
    view = views[start]
    paren = view.find("(")
    if paren < 0:
        return None
    prefix = view[:paren]
    if not re.fullmatch(r"[A-Za-z0-9_\s\*]*", prefix):
        return None
    idents = ctext.IDENT_RE.findall(prefix)
    if not idents or idents[-1] in _NON_NAMES:
        return None
    name = idents[-1]

    # Balance the parameter list, which may continue on following lines.
    depth = 0
    line_idx, col = start, paren
    while line_idx < len(views):
        text = views[line_idx]
        while col < len(text):
            ch = text[col]
            if ch == "(":
                depth += 1
            elif ch == ")":
                depth -= 1
                if depth == 0:
                    return _find_open_brace(views, name, line_idx, col + 1)
            elif ch in "{};":
                return None
            col += 1
        line_idx += 1
        col = 0
    return None


def _find_open_brace(
    views: list[str], name: str, line_idx: int, col: int
) -> tuple[str, int, int] | None:
    rest = views[line_idx][col:]
    stripped = rest.lstrip()
    if stripped.startswith("{"):
        return name, line_idx, col + rest.index("{")
    if stripped:
        return None  # a declaration (`;`) or something else entirely
    for nxt in range(line_idx + 1, len(views)):
        stripped = views[nxt].lstrip()
        if not stripped:
            continue
        if stripped.startswith("{"):
            return name, nxt, views[nxt].index("{")
        return None
    return None


def _scan_body(views: list[str], open_line: int, open_col: int) -> int | None:
    """Return the line index holding the matching close brace, or None at EOF."""
    depth = 0
    col = open_col
    for line_idx in range(open_line, len(views)):
        text = views[line_idx]
        while col < len(text):
            if text[col] == "{":
                depth += 1
            elif text[col] == "}":
                depth -= 1
                if depth == 0:
                    return line_idx
            col += 1
        col = 0
    return None


def split_functions(file: SourceFile) -> list[DecompiledFunction]:
    """Carve a pseudo-C file into function bodies, signature through close brace.

    Text outside bodies (warnings, stray declarations) is discarded. A
    body left open at end of file is truncated there and flagged.
    """
    if file.language is not Language.PSEUDO_C:
        raise ValueError(f"{file.path}: split_functions expects decompiled pseudo-C")
    lines = file.lines
    views = ctext.code_views(lines)
    functions: list[DecompiledFunction] = []
    i = 0
    while i < len(lines):
        header = _match_header(views, i)
        if header is None:
            i += 1
            continue
        name, open_line, open_col = header
        close = _scan_body(views, open_line, open_col)
        truncated = close is None
        if truncated:
            log.warning("%s: unbalanced braces in %s; truncated at end of file", file.path, name)
            close = len(lines) - 1
        functions.append(
            DecompiledFunction(
                id=FunctionId(file.path, name, len(functions)),
                lines=tuple(lines[i : close + 1]),
                truncated=truncated,
            )
        )
        i = close + 1
    return functions
