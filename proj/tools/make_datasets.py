#!/usr/bin/env python3
"""Rebuild the desk-scale benchmark files under data/ in LIBSVM format.

The LIBSVM binary-classification copies of heart, diabetes and breast-cancer are
not reachable from every build host, so they are reconstructed from the UCI
originals redistributed inside two PyPI packages:

  keel-ds     heart (Statlog, 270 x 13), pima (768 x 8)
  pydataset   MASS::biopsy (Wisconsin, 699 rows with the sample id column)

Every feature is linearly scaled to [-1, 1] (svm-scale defaults) and zero
entries are omitted, which is how the *_scale files on the LIBSVM site look.
fourclass has no redistributable copy on PyPI and is not produced here.

Usage: python3 tools/make_datasets.py [--out data] [--cache /tmp/svcb-pkgs]
"""
import argparse
import csv
import io
import pathlib
import subprocess
import sys
import tarfile
import zipfile


def fetch(pkg, version, cache):
    cache.mkdir(parents=True, exist_ok=True)
    hits = [p for p in cache.iterdir() if p.name.lower().replace("-", "_").startswith(pkg.replace("-", "_"))]
    if not hits:
        subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "-d", str(cache),
                        f"{pkg}=={version}"], check=True, stdout=subprocess.DEVNULL)
        hits = [p for p in cache.iterdir() if p.name.lower().replace("-", "_").startswith(pkg.replace("-", "_"))]
    return hits[0]


def scale(rows):
    cols = list(zip(*rows))
    lo = [min(c) for c in cols]
    hi = [max(c) for c in cols]
    out = []
    for r in rows:
        s = []
        for v, a, b in zip(r, lo, hi):
            s.append(0.0 if b == a else -1.0 + 2.0 * (v - a) / (b - a))
        out.append(s)
    return out


def write_libsvm(path, labels, rows):
    with open(path, "w") as fh:
        for y, r in zip(labels, scale(rows)):
            feats = " ".join(f"{i + 1}:{v:.6g}" for i, v in enumerate(r) if v != 0.0)
            fh.write(f"{y:+d} {feats}\n".rstrip() + "\n")


def keel_rows(whl, name):
    text = zipfile.ZipFile(whl).read(f"keel_ds/data/balanced/raw/{name}.dat").decode()
    return [l.split(",") for l in text.splitlines() if l and not l.startswith("@")]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data")
    ap.add_argument("--cache", default="/tmp/svcb-pkgs")
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cache = pathlib.Path(args.cache)

    keel = fetch("keel_ds", "0.2.5", cache)

    # Statlog heart: class 2 = disease present -> +1.
    rows = keel_rows(keel, "heart")
    write_libsvm(out / "heart.libsvm", [1 if r[-1].strip() == "2" else -1 for r in rows],
                 [[float(v) for v in r[:-1]] for r in rows])

    # Pima diabetes: tested_positive -> +1.
    rows = keel_rows(keel, "pima")
    write_libsvm(out / "diabetes.libsvm", [1 if "positive" in r[-1] else -1 for r in rows],
                 [[float(v) for v in r[:-1]] for r in rows])

    # Wisconsin breast cancer with the id column as feature 1; malignant -> +1.
    pyd = fetch("pydataset", "0.2.0", cache)
    with tarfile.open(pyd) as outer:
        inner = outer.extractfile("pydataset-0.2.0/pydataset/resources.tar.gz").read()
    with tarfile.open(fileobj=io.BytesIO(inner)) as res:
        text = res.extractfile("resources/rdata/csv/MASS/biopsy.csv").read().decode()
    labels, feats = [], []
    for rec in csv.DictReader(io.StringIO(text)):
        vals = [rec["ID"]] + [rec[f"V{i}"] for i in range(1, 10)]
        if any(v in ("NA", "") for v in vals):
            continue
        feats.append([float(v) for v in vals])
        labels.append(1 if rec["class"] == "malignant" else -1)
    write_libsvm(out / "breast-cancer.libsvm", labels, feats)


if __name__ == "__main__":
    main()
