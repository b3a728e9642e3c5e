"""Writes the toy retrieval fixture and its brute-force mAP.

Ranking is by (Hamming distance, database index); AP averages precision at
each relevant item's rank over the full ranking; queries whose label never
occurs in the database are left out of the mean.
"""
import random
import struct
from fractions import Fraction

BITS, N_DB, N_Q = 10, 30, 6
rng = random.Random(20240611)
db = [[rng.randrange(2) for _ in range(BITS)] for _ in range(N_DB)]
qs = [[rng.randrange(2) for _ in range(BITS)] for _ in range(N_Q)]
db_labels = [rng.randrange(3) for _ in range(N_DB)]
q_labels = [rng.randrange(3) for _ in range(N_Q - 1)] + [7]


def codes_file(path, rows):
    out = b"HLBC" + bytes([1]) + struct.pack("<QI", len(rows), BITS)
    for r in rows:
        word = sum(bit << k for k, bit in enumerate(r))
        out += struct.pack("<Q", word)
    open(path, "wb").write(out)


def labels_file(path, labels):
    open(path, "wb").write(b"HLLB" + bytes([1]) + struct.pack("<Q", len(labels)) + bytes(labels))


aps = []
for q, ql in zip(qs, q_labels):
    dist = [sum(a != b for a, b in zip(q, d)) for d in db]
    order = sorted(range(N_DB), key=lambda i: (dist[i], i))
    total = sum(1 for l in db_labels if l == ql)
    if total == 0:
        continue
    hits, s = 0, Fraction(0)
    for rank, i in enumerate(order, 1):
        if db_labels[i] == ql:
            hits += 1
            s += Fraction(hits, rank)
    aps.append(s / total)

codes_file("toy_db.hlbc", db)
codes_file("toy_queries.hlbc", qs)
labels_file("toy_db.hllb", db_labels)
labels_file("toy_queries.hllb", q_labels)
mean = sum(aps) / len(aps)
open("toy_map.txt", "w").write(f"{float(mean)!r}\n")
print(len(aps), mean, float(mean))
