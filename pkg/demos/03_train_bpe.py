"""
Byte-pair vocabulary over pseudo-C
==================================

Train a small byte-level vocabulary on decompiler-flavored text, inspect the
merges it learns, and confirm the encode/decode round trip, including bytes
that are not valid UTF-8.
"""

from uninline.bpe import BASE_TOKENS, decode, encode, train_bpe

DOCS = [
    "  uVar1 = *(uint *)(param_1 + 8);\n  iVar2 = iVar2 + 1;\n",
    "  uVar1 = *(uint *)(param_1 + 0xc);\n  if (uVar1 < 0x20) {\n",
    "  iVar2 = *(int *)(param_2 + 8);\n  uVar1 = uVar1 | 0x80;\n",
    "  *(uint *)(param_1 + 8) = uVar1;\n  return iVar2;\n",
]

vocab = train_bpe(DOCS, vocab_size=290, min_frequency=2)
print(f"base alphabet: {BASE_TOKENS} byte tokens")
print(f"learned merges: {len(vocab.merges)} -> vocabulary size {vocab.size}")

# the first merges capture the idioms the corpus repeats most
table = vocab.token_bytes()
print("first learned tokens:")
for tid in range(BASE_TOKENS, BASE_TOKENS + 8):
    print(f"  id {tid}: {table[tid]!r}")
print()

line = "  uVar1 = *(uint *)(param_1 + 8);"
ids = encode(vocab, line)
print(f"encode {line!r}")
print(f"  -> {len(ids)} ids (from {len(line)} bytes): {ids[:12]}...")
assert decode(vocab, ids) == line
print("  decode restores the text exactly")
print()

# arbitrary byte strings round-trip too: compare at the byte level, since
# invalid UTF-8 comes back through the surrogateescape codec
raw = bytes(range(128, 140)) + b"\x00\xff junk"
rids = encode(vocab, raw)
restored = b"".join(table[i] for i in rids)
assert restored == raw
print(f"non-UTF-8 bytes {raw!r} round-trip through {len(rids)} ids")

# training is deterministic: same corpus, same merges, every run
again = train_bpe(DOCS, vocab_size=290, min_frequency=2)
assert again.merges == vocab.merges
print("retraining reproduces the identical merge sequence")
