#!/usr/bin/env python3
"""Convert a Planetoid citation dataset (cora, citeseer, pubmed) into the
dataset directory format this project loads.

Expects the eight pickled files of the Planetoid distribution:

    ind.<name>.x  ind.<name>.y  ind.<name>.tx  ind.<name>.ty
    ind.<name>.allx  ind.<name>.ally  ind.<name>.graph  ind.<name>.test.index

Public copies live in the `kimiyoung/planetoid` GitHub repository (data/)
and in the PyTorch Geometric mirrors. Usage:

    python3 tools/convert_planetoid.py --name cora --raw-dir /path/to/planetoid/data --out data/cora

Features are row-normalized (each row divided by its sum), the standard
preprocessing for these benchmarks. Splits follow the Planetoid convention:
train = the labeled training rows, validation = the next 500 nodes,
test = the published test index list.
"""

import argparse
import json
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def load_pickle(path: Path):
    with open(path, "rb") as f:
        return pickle.load(f, encoding="latin1")


def convert(name: str, raw_dir: Path, out_dir: Path) -> None:
    def raw(suffix: str) -> Path:
        p = raw_dir / f"ind.{name}.{suffix}"
        if not p.exists():
            sys.exit(f"missing input file: {p}")
        return p

    x = load_pickle(raw("x"))
    y = load_pickle(raw("y"))
    tx = load_pickle(raw("tx"))
    ty = load_pickle(raw("ty"))
    allx = load_pickle(raw("allx"))
    ally = load_pickle(raw("ally"))
    graph = load_pickle(raw("graph"))
    test_idx = np.loadtxt(raw("test.index"), dtype=np.int64)

    test_idx_range = np.sort(test_idx)
    if name == "citeseer":
        # isolated test nodes are missing from the index list; fill the gap
        # with zero feature rows and unlabeled one-hots
        full_range = np.arange(test_idx_range.min(), test_idx_range.max() + 1)
        tx_ext = sp.lil_matrix((len(full_range), x.shape[1]))
        tx_ext[test_idx_range - test_idx_range.min(), :] = tx
        tx = tx_ext
        ty_ext = np.zeros((len(full_range), y.shape[1]))
        ty_ext[test_idx_range - test_idx_range.min(), :] = ty
        ty = ty_ext

    features = sp.vstack((allx, tx)).tolil()
    features[test_idx, :] = features[test_idx_range, :]
    features = np.asarray(features.todense(), dtype=np.float64)
    row_sums = features.sum(axis=1)
    row_sums[row_sums == 0.0] = 1.0
    features = features / row_sums[:, None]

    onehot = np.vstack((ally, ty))
    onehot[test_idx, :] = onehot[test_idx_range, :]
    labels = np.full(onehot.shape[0], -1, dtype=np.int64)
    labeled = onehot.sum(axis=1) > 0
    labels[labeled] = onehot[labeled].argmax(axis=1)

    num_nodes = features.shape[0]
    idx_train = np.arange(len(y))
    # the 500 nodes after the training block, clipped for tiny inputs
    idx_val = np.arange(len(y), min(len(y) + 500, num_nodes))
    idx_val = idx_val[~np.isin(idx_val, test_idx_range)]
    idx_test = test_idx_range

    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "num_nodes": int(num_nodes),
        "num_features": int(features.shape[1]),
        "num_classes": int(onehot.shape[1]),
        "undirected": True,
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")

    with open(out_dir / "edges.tsv", "w") as f:
        for src, neighbors in graph.items():
            for dst in neighbors:
                if src < num_nodes and dst < num_nodes:
                    f.write(f"{src}\t{dst}\n")

    with open(out_dir / "features.csv", "w") as f:
        for row in features:
            f.write(",".join(f"{v:.17g}" for v in row))
            f.write("\n")

    with open(out_dir / "labels.csv", "w") as f:
        for v in labels:
            f.write(f"{v}\n")

    splits = {
        "train": [int(i) for i in idx_train],
        "validation": [int(i) for i in idx_val],
        "test": [int(i) for i in idx_test],
    }
    (out_dir / "splits.json").write_text(json.dumps(splits) + "\n")

    print(f"wrote {out_dir}: {num_nodes} nodes, {features.shape[1]} features, "
          f"{meta['num_classes']} classes, splits {len(idx_train)}/{len(idx_val)}/{len(idx_test)}")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--name", required=True, choices=["cora", "citeseer", "pubmed"])
    parser.add_argument("--raw-dir", required=True, type=Path, help="directory with the ind.<name>.* files")
    parser.add_argument("--out", required=True, type=Path, help="output dataset directory")
    args = parser.parse_args()
    convert(args.name, args.raw_dir, args.out)


if __name__ == "__main__":
    main()
