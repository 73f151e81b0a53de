#!/usr/bin/env python3
"""Deterministic mock synthesis backend speaking the line-oriented protocol.

Reads one JSON request per line on stdin, writes one JSON response per line
on stdout. Used to exercise the subprocess generator integration end to end:

    python scripts/mock_generator.py --seed 7 --match-prob 0.8
"""

import argparse
import sys

from cotforge.failure_engine import MockGenerator, serve_generator_stdio


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--match-prob", type=float, default=1.0)
    parser.add_argument("--vote-match-prob", type=float, default=1.0)
    args = parser.parse_args()
    generator = MockGenerator(
        seed=args.seed,
        match_prob=args.match_prob,
        vote_match_prob=args.vote_match_prob,
    )
    serve_generator_stdio(generator, sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
