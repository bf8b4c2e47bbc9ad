"""Generate a synthetic word-order task plus matching word vectors.

Writes a task directory (manifest + TSV splits + parse trees) and an
embeddings file the sweep config can point at. The task is balanced
binary: label 1 iff the "alpha" marker precedes "beta". Filler tokens
carry a soft content cue so bag-of-words encoders stay above chance.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from randenc.embeddings import write_embeddings
from randenc.tasks import (
    make_synthetic_embeddings,
    make_synthetic_order_task,
    synthetic_vocabulary,
    write_task_files,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/order", help="task output directory")
    ap.add_argument("--n", type=int, default=2000, help="number of sentences")
    ap.add_argument("--dim", type=int, default=16, help="word vector width")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--fillers", type=int, default=64, help="filler vocabulary size")
    ap.add_argument("--cue", type=float, default=0.75,
                    help="content-cue strength in [0.5, 1]; 0.5 = order-only task")
    args = ap.parse_args()

    dataset = make_synthetic_order_task(
        args.n, n_fillers=args.fillers, seed=args.seed, cue_strength=args.cue
    )
    manifest = write_task_files(dataset, args.out)
    vocab = synthetic_vocabulary(args.fillers)
    table = make_synthetic_embeddings(vocab, args.dim, seed=args.seed + 1)
    vectors_path = os.path.join(args.out, "vectors.txt")
    write_embeddings(table, vectors_path)

    n_pos = sum(1 for l in dataset.labels if l == "1")
    print(f"wrote {manifest}")
    print(f"wrote {vectors_path} ({len(vocab)} words, dim {args.dim})")
    print(f"{dataset.n_examples} sentences, {n_pos} positive / {dataset.n_examples - n_pos} negative")
    print(f"splits: train {len(dataset.plan.train)}, dev {len(dataset.plan.dev)}, "
          f"test {len(dataset.plan.test)}")


if __name__ == "__main__":
    main()
