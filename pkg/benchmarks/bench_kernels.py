"""Benchmark the compiled LCS kernel against the pure-Python fallback.

Run:  python benchmarks/bench_kernels.py [--pairs 200] [--length 300]

Sequence lengths default to typical summary sizes, where the O(n*m) LCS
dynamic program dominates corpus-scale ROUGE-L runs.
"""

from __future__ import annotations

import argparse
import random
import statistics
import time

from laybench._kernels_py import lcs_length as lcs_python

try:
    from laybench._kernels import lcs_length as lcs_compiled
except ImportError:
    lcs_compiled = None


def _make_pairs(pairs: int, length: int, vocab: int, seed: int):
    rng = random.Random(seed)
    return [
        (
            [rng.randrange(vocab) for _ in range(rng.randint(length // 2, length))],
            [rng.randrange(vocab) for _ in range(rng.randint(length // 2, length))],
        )
        for _ in range(pairs)
    ]


def _time_fn(fn, data, repeats: int = 3) -> float:
    timings = []
    for _ in range(repeats):
        started = time.perf_counter()
        for a, b in data:
            fn(a, b)
        timings.append(time.perf_counter() - started)
    return min(timings)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=200)
    parser.add_argument("--length", type=int, default=300)
    parser.add_argument("--vocab", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    data = _make_pairs(args.pairs, args.length, args.vocab, args.seed)
    mean_len = statistics.mean(len(a) for a, _ in data)
    print(f"{args.pairs} pairs, mean length {mean_len:.0f} tokens, "
          f"vocab {args.vocab}")

    python_time = _time_fn(lcs_python, data)
    per_pair_py = 1000.0 * python_time / args.pairs
    print(f"pure-python : {python_time:8.3f} s total  {per_pair_py:7.3f} ms/pair")

    if lcs_compiled is None:
        print("compiled    : not built (pip install -e . rebuilds it)")
        return 0

    mismatches = sum(1 for a, b in data if lcs_compiled(a, b) != lcs_python(a, b))
    compiled_time = _time_fn(lcs_compiled, data)
    per_pair_c = 1000.0 * compiled_time / args.pairs
    print(f"compiled    : {compiled_time:8.3f} s total  {per_pair_c:7.3f} ms/pair")
    print(f"speedup     : {python_time / compiled_time:8.1f}x  "
          f"(agreement on {args.pairs - mismatches}/{args.pairs} pairs)")
    return 1 if mismatches else 0


if __name__ == "__main__":
    raise SystemExit(main())
