"""Builds the test BPE vocabulary and the golden encoding.

Run once from this directory; the outputs are committed. The vocabulary is
trained with a plain byte-level BPE loop on `bpe_corpus.txt`, and the golden
ids come from tiktoken's merge implementation with the same split pattern.
"""

import base64
import collections
import json

import regex
import tiktoken

PATTERN = r"""'(?:[sdmt]|ll|ve|re)| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+"""
MERGES = 400
SENTENCES = [
    "<table><tr><th>Year</th><th>Population</th></tr><tr><td>1990</td><td>12,345</td></tr></table>",
    "The table shows the population of the city for each year since 1990.",
    "def main():\n    return read_table('data.csv')",
    "Ünïcödé text & entities &amp; don't break it's merge rules.",
]


def train(text):
    words = collections.Counter(m.encode() for m in regex.findall(PATTERN, text))
    ranks = {bytes([b]): b for b in range(256)}
    parts = {w: [bytes([b]) for b in w] for w in words}
    for _ in range(MERGES):
        pairs = collections.Counter()
        for w, n in words.items():
            p = parts[w]
            for a, b in zip(p, p[1:]):
                pairs[(a, b)] += n
        if not pairs:
            break
        (a, b), _ = max(pairs.items(), key=lambda kv: (kv[1], kv[0]))
        tok = a + b
        ranks[tok] = len(ranks)
        for w in words:
            p, out, i = parts[w], [], 0
            while i < len(p):
                if i + 1 < len(p) and p[i] == a and p[i + 1] == b:
                    out.append(tok)
                    i += 2
                else:
                    out.append(p[i])
                    i += 1
            parts[w] = out
    return ranks


def main():
    with open("bpe_corpus.txt", encoding="utf-8") as f:
        ranks = train(f.read())
    with open("test-vocab.tiktoken", "w", encoding="ascii") as f:
        for tok, rank in sorted(ranks.items(), key=lambda kv: kv[1]):
            f.write(f"{base64.b64encode(tok).decode()} {rank}\n")
    enc = tiktoken.Encoding("fixture", pat_str=PATTERN, mergeable_ranks=ranks, special_tokens={})
    golden = [{"text": s, "ids": enc.encode_ordinary(s)} for s in SENTENCES]
    with open("bpe_golden.json", "w", encoding="utf-8") as f:
        json.dump(golden, f, ensure_ascii=False, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
