#!/usr/bin/env python3
"""Convert a Planetoid citation dataset into the gmlp text layout.

Reads the eight ``ind.<name>.*`` pickle files published with the Planetoid
paper (Yang et al., 2016) and writes ``edges.tsv``, ``features.txt``,
``labels.txt``, and ``splits.txt`` in the format expected by
``gmlp::load_dataset``.

Missing input files are downloaded from ``--base-url``. Features are
row-normalized (the standard Planetoid preprocessing), and the canonical
splits are preserved: the first ``|y|`` nodes are train, the next 500 are
val, and ``test.index`` selects the test nodes.
"""

import argparse
import pickle
import sys
import urllib.request
from pathlib import Path

import numpy as np
import scipy.sparse as sp

SUFFIXES = ["x", "y", "tx", "ty", "allx", "ally", "graph", "test.index"]
DEFAULT_BASE_URL = "https://github.com/kimiyoung/planetoid/raw/master/data"


def ensure_file(path: Path, url: str) -> None:
    if path.exists():
        return
    print(f"downloading {url}")
    path.parent.mkdir(parents=True, exist_ok=True)
    with urllib.request.urlopen(url) as resp:
        path.write_bytes(resp.read())


def load_pickle(path: Path):
    with path.open("rb") as fh:
        return pickle.load(fh, encoding="latin1")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dataset", default="cora",
                    choices=["cora", "citeseer", "pubmed"])
    ap.add_argument("--input-dir", type=Path, default=None,
                    help="directory with ind.<dataset>.* files "
                         "(default: <out>/raw, downloading as needed)")
    ap.add_argument("--out", type=Path, default=None,
                    help="output directory (default: data/<dataset> "
                         "next to this script's parent)")
    ap.add_argument("--base-url", default=DEFAULT_BASE_URL)
    args = ap.parse_args()

    out = args.out or Path(__file__).resolve().parent.parent / "data" / args.dataset
    raw = args.input_dir or out / "raw"

    paths = {}
    for suffix in SUFFIXES:
        name = f"ind.{args.dataset}.{suffix}"
        paths[suffix] = raw / name
        ensure_file(paths[suffix], f"{args.base_url}/{name}")

    x = load_pickle(paths["x"])
    allx = load_pickle(paths["allx"])
    tx = load_pickle(paths["tx"])
    y = load_pickle(paths["y"])
    ally = load_pickle(paths["ally"])
    ty = load_pickle(paths["ty"])
    graph = load_pickle(paths["graph"])
    test_idx = np.loadtxt(paths["test.index"], dtype=np.int64)

    num_nodes = len(graph)
    test_sorted = np.sort(test_idx)

    # Citeseer's test.index skips isolated nodes; pad tx/ty so positional
    # rows exist for the full test range before reordering.
    full_range = np.arange(test_sorted[0], test_sorted[-1] + 1)
    if len(full_range) > tx.shape[0]:
        tx_full = sp.lil_matrix((len(full_range), tx.shape[1]), dtype=tx.dtype)
        tx_full[test_sorted - test_sorted[0]] = tx
        tx = tx_full.tocsr()
        ty_full = np.zeros((len(full_range), ty.shape[1]), dtype=ty.dtype)
        ty_full[test_sorted - test_sorted[0]] = ty
        ty = ty_full

    features = sp.vstack([allx, tx]).tolil()
    features[test_idx] = features[test_sorted]
    labels_onehot = np.vstack([ally, ty])
    labels_onehot[test_idx] = labels_onehot[test_sorted]

    if features.shape[0] != num_nodes:
        raise SystemExit(f"feature rows {features.shape[0]} != graph nodes {num_nodes}")

    dense = np.asarray(features.todense(), dtype=np.float64)
    row_sums = dense.sum(axis=1, keepdims=True)
    np.divide(dense, row_sums, out=dense, where=row_sums > 0)

    labels = labels_onehot.argmax(axis=1)

    split = np.full(num_nodes, "none", dtype=object)
    split[: y.shape[0]] = "train"
    split[y.shape[0] : y.shape[0] + 500] = "val"
    split[test_idx] = "test"

    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u != v:
                edges.add((min(u, v), max(u, v)))

    out.mkdir(parents=True, exist_ok=True)
    with (out / "edges.tsv").open("w") as fh:
        for u, v in sorted(edges):
            fh.write(f"{u}\t{v}\n")
    np.savetxt(out / "features.txt", dense, fmt="%.9g")
    np.savetxt(out / "labels.txt", labels, fmt="%d")
    with (out / "splits.txt").open("w") as fh:
        fh.write("\n".join(split) + "\n")

    counts = {name: int((split == name).sum()) for name in ("train", "val", "test", "none")}
    print(f"wrote {out}: {num_nodes} nodes, {len(edges)} edges, "
          f"{dense.shape[1]} features, {labels_onehot.shape[1]} classes, splits {counts}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
