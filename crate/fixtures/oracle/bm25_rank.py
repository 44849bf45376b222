"""Brute-force BM25 over a tasks.jsonl corpus, independent of the Rust index.

Usage: python3 bm25_rank.py <tasks.jsonl> <query>
Prints "score doc_id" lines, best first, ties by doc id.
"""
import json
import math
import re
import sys
import unicodedata

STOP = set(
    "a an and are as at be by can do for from how i in is it me my of on or so that the this to was what with".split()
)


def tokens(text):
    text = "".join(c for c in unicodedata.normalize("NFD", text) if not unicodedata.combining(c)).lower()
    words = re.findall(r"[\w']+(?:[.,]\w+)*", text)
    return [w for w in words if len(w) > 1 and w not in STOP]


def main(path, query):
    docs = {}
    for line in open(path, encoding="utf-8"):
        d = json.loads(line)
        body = d.get("tags", []) + [r["name"] for r in d.get("requirements", [])] + [s["text"] for s in d["steps"]]
        counts = {}
        for w in tokens(d["title"]):
            counts[w] = counts.get(w, 0) + 2
        for w in tokens("\n".join(body)):
            counts[w] = counts.get(w, 0) + 1
        docs[d["id"]] = counts
    n = len(docs)
    avg = sum(sum(c.values()) for c in docs.values()) / n
    ranked = []
    for doc_id, counts in docs.items():
        dl = sum(counts.values())
        parts = []
        for t in set(tokens(query)):
            if t not in counts:
                continue
            df = sum(1 for c in docs.values() if t in c)
            idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
            tf = counts[t]
            parts.append(idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * dl / avg)))
        score = math.fsum(parts)
        if score > 0:
            ranked.append((-score, doc_id))
    for neg, doc_id in sorted(ranked):
        print(f"{-neg:.10f} {doc_id}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
