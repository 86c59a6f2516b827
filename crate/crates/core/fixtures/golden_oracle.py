#!/usr/bin/env python3
"""Independent reference for the fallback embedder.

Regenerates golden_vectors.json. Vectors are stored as the hex bit pattern
of each f64 component so comparisons are exact.
"""
import json
import math
import struct
from pathlib import Path

DIM = 256
MASK = (1 << 64) - 1

LEAK_PHRASES = [
    "the correct answer is",
    "the answer is definitely",
    "the choice is",
    "Option C is the right one",
    "We can conclude the answer is",
    "the solution is B",
]

TEXTS = [
    "",
    "   ",
    "The correct answer is",
    "the correct answer is",
    "The solution is B",
    "Option C is the right one",
    "Fever and productive cough suggest pneumonia",
    "a a a a",
    "Ketotifen eye drops relieve allergic conjunctivitis",
    "Café au lait spots with axillary freckling",
]

DIFFERENTIAL = (Path(__file__).parent / "clinical_differential.txt").read_text().strip()


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & MASK
    return h


def embed(text: str) -> list:
    words = text.lower().split()
    buckets = [0] * DIM
    feats = [w for w in words] + [a + "_" + b for a, b in zip(words, words[1:])]
    for f in feats:
        h = fnv1a64(f.encode("utf-8"))
        buckets[(h >> 1) % DIM] += 1 if h & 1 == 0 else -1
    v = [float(c) for c in buckets]
    norm = math.sqrt(sum_seq(c * c for c in v))
    if norm > 0.0:
        v = [c / norm for c in v]
    return v


def sum_seq(xs) -> float:
    total = 0.0
    for x in xs:
        total += x
    return total


def cosine(u, v) -> float:
    nu = math.sqrt(sum_seq(c * c for c in u))
    nv = math.sqrt(sum_seq(c * c for c in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    dot = sum_seq(a * b for a, b in zip(u, v))
    return max(-1.0, min(1.0, dot / (nu * nv)))


def bits(x: float) -> str:
    return struct.pack(">d", x).hex()


def main():
    leak_vecs = [embed(p) for p in LEAK_PHRASES]
    diff_vec = embed(DIFFERENTIAL)
    s = max(cosine(diff_vec, lv) for lv in leak_vecs)
    out = {
        "dimension": DIM,
        "vectors": [{"text": t, "bits": [bits(c) for c in embed(t)]} for t in TEXTS],
        "differential_max_similarity": {"value": s, "bits": bits(s)},
    }
    path = Path(__file__).parent / "golden_vectors.json"
    lines = ["{", f' "dimension": {DIM},', ' "vectors": [']
    rows = [{"text": t, "bits": [bits(c) for c in embed(t)]} for t in TEXTS]
    lines.append(",\n".join("  " + json.dumps(r, ensure_ascii=False) for r in rows))
    lines.append(" ],")
    lines.append(' "differential_max_similarity": ' + json.dumps(out["differential_max_similarity"]))
    lines.append("}")
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path}; differential S = {s:.6f}, words = {len(DIFFERENTIAL.split())}")


if __name__ == "__main__":
    main()
