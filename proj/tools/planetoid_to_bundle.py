#!/usr/bin/env python3
"""Convert a raw Planetoid dataset (ind.<name>.* files) into a nodenorm bundle.

The input directory holds the eight files distributed with the Planetoid
benchmark: ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index}. The output
directory receives meta.json, features.csv, labels.txt, edges.tsv and,
with --public-split, splits.json.

Test indices missing from the raw files (Citeseer has some isolated nodes)
become rows of zero features with label -1.
"""

import argparse
import json
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp

PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph")


def load_part(root: Path, name: str, part: str):
    path = root / f"ind.{name}.{part}"
    if not path.exists():
        raise FileNotFoundError(f"missing {path}")
    with path.open("rb") as handle:
        return pickle.load(handle, encoding="latin1")


def load_planetoid(root: Path, name: str, val_size: int = 500):
    x, y, tx, ty, allx, ally, graph = (load_part(root, name, p) for p in PARTS)
    test_index = [int(line) for line in (root / f"ind.{name}.test.index").read_text().split()]
    test_sorted = np.sort(test_index)

    lo, hi = int(test_sorted.min()), int(test_sorted.max())
    span = hi - lo + 1
    tx_full = sp.lil_matrix((span, tx.shape[1]))
    ty_full = np.zeros((span, ty.shape[1]))
    tx_full[test_sorted - lo, :] = tx
    ty_full[test_sorted - lo, :] = ty

    features = sp.vstack((allx, tx_full)).tolil()
    features[test_index, :] = features[test_sorted, :]
    onehot = np.vstack((ally, ty_full))
    onehot[test_index, :] = onehot[test_sorted, :]

    n = features.shape[0]
    labels = np.where(onehot.sum(axis=1) > 0, onehot.argmax(axis=1), -1)

    edges = set()
    for u, neighbours in graph.items():
        for v in neighbours:
            if u != v and u < n and v < n:
                edges.add((min(u, v), max(u, v)))

    split = {
        "train": list(range(y.shape[0])),
        "val": list(range(y.shape[0], min(y.shape[0] + val_size, lo))),
        "test": sorted(int(i) for i in test_index if labels[i] >= 0),
    }
    return sp.csr_matrix(features, dtype=np.float64), labels, sorted(edges), split, onehot.shape[1]


def row_normalize(features: sp.csr_matrix) -> sp.csr_matrix:
    sums = np.asarray(features.sum(axis=1)).ravel()
    inv = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums != 0)
    return sp.diags(inv) @ features


def write_bundle(out: Path, name: str, features, labels, edges, split, num_classes: int, public_split: bool):
    out.mkdir(parents=True, exist_ok=True)
    n, d = features.shape
    (out / "meta.json").write_text(json.dumps({"n": n, "d": d, "num_classes": num_classes, "name": name}, indent=2) + "\n")
    dense = features.toarray()
    with (out / "features.csv").open("w") as handle:
        for row in dense:
            handle.write(",".join(repr(float(v)) if v != 0 else "0" for v in row) + "\n")
    (out / "labels.txt").write_text("".join(f"{int(label)}\n" for label in labels))
    (out / "edges.tsv").write_text("".join(f"{u}\t{v}\n" for u, v in edges))
    split_file = out / "splits.json"
    if public_split:
        split_file.write_text(json.dumps(split) + "\n")
    elif split_file.exists():
        split_file.unlink()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("raw_dir", type=Path, help="directory with the ind.<name>.* files")
    parser.add_argument("out_dir", type=Path, help="bundle directory to write")
    parser.add_argument("--name", default="cora", help="dataset name in the file prefix (default: cora)")
    parser.add_argument("--raw-features", action="store_true", help="keep features as stored instead of row-normalizing")
    parser.add_argument("--public-split", action="store_true", help="write the fixed Planetoid split as splits.json")
    parser.add_argument("--val-size", type=int, default=500, help="validation nodes in the public split (default: 500)")
    args = parser.parse_args(argv)

    try:
        features, labels, edges, split, num_classes = load_planetoid(args.raw_dir, args.name, args.val_size)
    except (OSError, ValueError, pickle.UnpicklingError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    if not args.raw_features:
        features = row_normalize(features)
    write_bundle(args.out_dir, args.name, features, labels, edges, split, num_classes, args.public_split)
    print(f"{args.name}: {features.shape[0]} nodes, {features.shape[1]} features, {len(edges)} edges, "
          f"{num_classes} classes -> {args.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
