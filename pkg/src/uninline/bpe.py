"""Byte-level byte-pair encoding, trained from scratch.

Token ids 0..255 are the raw bytes; each merge appends one id. Training
repeatedly merges the most frequent adjacent pair, breaking frequency
ties toward the smaller (left_id, right_id) pair, and stops once the
vocabulary limit is reached or no pair occurs min_frequency times.
Pair frequencies count every adjacent position; application is
left-to-right non-overlapping.

Text enters and leaves through utf-8 with surrogateescape, so
decode(encode(text)) is the identity even for text that round-trips
arbitrary bytes.

Vocabulary file layout (line-oriented, one artifact for external models):

    # comment / header lines
    <rank>\\t<left_id>\\t<right_id>    three fields per merge, rank ascending
    <id>\\t<escaped token bytes>       two fields per id-table entry

The id table is derivable from the merges; it is written for consumers
that want token strings without replaying merges, and checked on load.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .jsonl import atomic_write_text

log = logging.getLogger(__name__)

BASE_TOKENS = 256
DEFAULT_VOCAB_SIZE = 25_000
DEFAULT_MIN_FREQUENCY = 20


def _to_bytes(text: str | bytes) -> bytes:
    if isinstance(text, bytes):
        return text
    return text.encode("utf-8", "surrogateescape")


@dataclass(frozen=True)
class BpeVocab:
    merges: tuple[tuple[int, int], ...]
    vocab_size_limit: int = DEFAULT_VOCAB_SIZE
    min_frequency: int = DEFAULT_MIN_FREQUENCY

    def __post_init__(self):
        if BASE_TOKENS + len(self.merges) > self.vocab_size_limit:
            raise ValueError("more merges than the vocabulary limit allows")
        for rank, (a, b) in enumerate(self.merges):
            if not (0 <= a < BASE_TOKENS + rank and 0 <= b < BASE_TOKENS + rank):
                raise ValueError(f"merge {rank} references an id not yet defined: {(a, b)}")

    @property
    def size(self) -> int:
        return BASE_TOKENS + len(self.merges)

    def token_bytes(self) -> list[bytes]:
        """Byte expansion of every token id, index = id."""
        table = [bytes([i]) for i in range(BASE_TOKENS)]
        for a, b in self.merges:
            table.append(table[a] + table[b])
        return table

    @property
    def token_to_id(self) -> dict[str, int]:
        return {_escape(tok): i for i, tok in enumerate(self.token_bytes())}

    def merge_ranks(self) -> dict[tuple[int, int], int]:
        return {pair: rank for rank, pair in enumerate(self.merges)}


def _apply_merge(seq: list[int], pair: tuple[int, int], new_id: int) -> list[int]:
    out = []
    i = 0
    a, b = pair
    n = len(seq)
    while i < n:
        if i + 1 < n and seq[i] == a and seq[i + 1] == b:
            out.append(new_id)
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


def train_bpe(
    corpus: Iterable[str | bytes],
    vocab_size: int = DEFAULT_VOCAB_SIZE,
    min_frequency: int = DEFAULT_MIN_FREQUENCY,
) -> BpeVocab:
    """Learn merges over the documents until the size limit or frequency floor."""
    if vocab_size <= BASE_TOKENS:
        raise ValueError(f"vocab_size must exceed {BASE_TOKENS}")
    if min_frequency < 1:
        raise ValueError("min_frequency must be at least 1")
    seqs = [list(_to_bytes(doc)) for doc in corpus]
    seqs = [s for s in seqs if len(s) >= 2]
    if not seqs:
        log.warning("empty corpus; vocabulary holds only the %d base byte tokens", BASE_TOKENS)

    merges: list[tuple[int, int]] = []
    while BASE_TOKENS + len(merges) < vocab_size:
        counts: Counter = Counter()
        for s in seqs:
            counts.update(zip(s, s[1:]))
        if not counts:
            break
        # max frequency, ties toward the smaller pair
        neg_freq, pair = min((-f, p) for p, f in counts.items())
        if -neg_freq < min_frequency:
            break
        new_id = BASE_TOKENS + len(merges)
        merges.append(pair)
        seqs = [_apply_merge(s, pair, new_id) for s in seqs]
        seqs = [s for s in seqs if len(s) >= 2]
    return BpeVocab(tuple(merges), vocab_size_limit=vocab_size, min_frequency=min_frequency)


def encode(vocab: BpeVocab, text: str | bytes) -> list[int]:
    """Tokenize by applying merges in rank order wherever they occur."""
    seq = list(_to_bytes(text))
    ranks = vocab.merge_ranks()
    while len(seq) >= 2:
        best = min((ranks[p] for p in set(zip(seq, seq[1:])) if p in ranks), default=None)
        if best is None:
            break
        seq = _apply_merge(seq, vocab.merges[best], BASE_TOKENS + best)
    return seq


def decode(vocab: BpeVocab, ids: Sequence[int]) -> str:
    table = vocab.token_bytes()
    try:
        raw = b"".join(table[i] for i in ids)
    except IndexError:
        raise ValueError(f"token id outside the vocabulary of {vocab.size}") from None
    return raw.decode("utf-8", "surrogateescape")


def _escape(token: bytes) -> str:
    out = []
    for byte in token:
        ch = chr(byte)
        if byte in (0x5C,):
            out.append("\\\\")
        elif 0x20 < byte < 0x7F:
            out.append(ch)
        else:
            out.append(f"\\x{byte:02x}")
    return "".join(out)


def save_vocab(path: str | Path, vocab: BpeVocab) -> None:
    lines = [
        "# byte-level bpe vocabulary",
        f"# vocab_size_limit\t{vocab.vocab_size_limit}",
        f"# min_frequency\t{vocab.min_frequency}",
    ]
    for rank, (a, b) in enumerate(vocab.merges):
        lines.append(f"{rank}\t{a}\t{b}")
    for tid, token in enumerate(vocab.token_bytes()):
        lines.append(f"{tid}\t{_escape(token)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_vocab(path: str | Path) -> BpeVocab:
    limit = DEFAULT_VOCAB_SIZE
    min_freq = DEFAULT_MIN_FREQUENCY
    merges: list[tuple[int, int]] = []
    id_table: dict[int, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            parts = line[1:].split("\t")
            if len(parts) == 2 and parts[0].strip() == "vocab_size_limit":
                limit = int(parts[1])
            elif len(parts) == 2 and parts[0].strip() == "min_frequency":
                min_freq = int(parts[1])
            continue
        fields = line.split("\t")
        if len(fields) == 3:
            rank, a, b = (int(f) for f in fields)
            if rank != len(merges):
                raise ValueError(f"{path}:{lineno}: merge ranks out of order")
            merges.append((a, b))
        elif len(fields) == 2:
            id_table[int(fields[0])] = fields[1]
        else:
            raise ValueError(f"{path}:{lineno}: expected 2 or 3 tab-separated fields")
    vocab = BpeVocab(tuple(merges), vocab_size_limit=limit, min_frequency=min_freq)
    if id_table:
        expected = {i: _escape(tok) for i, tok in enumerate(vocab.token_bytes())}
        if id_table != expected:
            raise ValueError(f"{path}: id table disagrees with the merge list")
    return vocab
