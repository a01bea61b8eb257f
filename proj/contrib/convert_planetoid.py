#!/usr/bin/env python3
"""Convert a Planetoid-format citation dataset (ind.<name>.{x,y,allx,ally,tx,ty,test.index})
into the glam dataset directory format (features.tsv, labels.tsv, split.tsv).

The standard split is used: the first len(y) nodes train, the next 500 validate,
and the nodes listed in test.index test. CiteSeer's missing test indices become
zero-feature nodes that belong to no split.

    python3 contrib/convert_planetoid.py <raw_dir> <name> <out_dir>
"""
import os
import pickle
import sys

import numpy as np
import scipy.sparse as sp


def load(raw_dir, name, part):
    with open(os.path.join(raw_dir, f"ind.{name}.{part}"), "rb") as f:
        return pickle.load(f, encoding="latin1")


def main():
    raw_dir, name, out_dir = sys.argv[1:4]
    x, y, allx, ally, tx, ty = (load(raw_dir, name, p) for p in ("x", "y", "allx", "ally", "tx", "ty"))
    with open(os.path.join(raw_dir, f"ind.{name}.test.index")) as f:
        test_index = [int(line) for line in f if line.strip()]
    test_sorted = np.sort(test_index)

    if name == "citeseer":
        full_range = range(test_sorted.min(), test_sorted.max() + 1)
        tx_ext = sp.lil_matrix((len(full_range), tx.shape[1]))
        tx_ext[test_sorted - test_sorted.min(), :] = tx
        tx = tx_ext
        ty_ext = np.zeros((len(full_range), ty.shape[1]))
        ty_ext[test_sorted - test_sorted.min(), :] = ty
        ty = ty_ext

    features = sp.vstack((allx, tx)).tolil()
    features[test_index, :] = features[test_sorted, :]
    labels = np.vstack((ally, ty))
    labels[test_index, :] = labels[test_sorted, :]
    features = features.tocoo()
    label_ids = labels.argmax(axis=1)

    n, d = features.shape
    os.makedirs(out_dir, exist_ok=True)
    order = np.lexsort((features.col, features.row))
    with open(os.path.join(out_dir, "features.tsv"), "w") as f:
        f.write(f"# converted from Planetoid ind.{name}.*\n{n} {d}\n")
        for k in order:
            f.write(f"{features.row[k]} {features.col[k]} {features.data[k]:.17g}\n")
    with open(os.path.join(out_dir, "labels.tsv"), "w") as f:
        f.write(f"{labels.shape[1]}\n")
        for i, c in enumerate(label_ids):
            f.write(f"{i} {c}\n")
    roles = {}
    for i in range(len(y)):
        roles[i] = "train"
    for i in range(len(y), len(y) + 500):
        roles[i] = "val"
    for i in test_index:
        roles[i] = "test"
    with open(os.path.join(out_dir, "split.tsv"), "w") as f:
        for i in sorted(roles):
            f.write(f"{i} {roles[i]}\n")


if __name__ == "__main__":
    main()
