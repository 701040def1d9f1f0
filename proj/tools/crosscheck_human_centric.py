#!/usr/bin/env python3
# Copyright 2026 The oodbench Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Independent human-centric evaluation of a fixture directory.

Reads the binary packs with numpy, recomputes MSP, Energy, GradNorm and KNN
scores, derives the reject thresholds from the correctly classified training
rows, and compares every DER cell against the report written by
`oodbench eval`.
"""

import argparse
import csv
import json
import math
import struct
import subprocess
import sys
from pathlib import Path

import numpy as np


def read_container(path, magic):
    raw = Path(path).read_bytes()
    if raw[:4] != magic:
        raise ValueError(f"{path}: bad magic")
    version, header_len = struct.unpack_from("<IQ", raw, 4)
    if version != 1:
        raise ValueError(f"{path}: version {version}")
    header = json.loads(raw[16 : 16 + header_len])
    return header, raw[16 + header_len :]


def read_pack(path):
    h, payload = read_container(path, b"OODP")
    n, d, k = h["n"], h["d"], h["k"]
    buf = np.frombuffer(payload, dtype="<f4", count=n * d + n * k)
    features = buf[: n * d].reshape(n, d).astype(np.float64)
    logits = buf[n * d :].reshape(n, k).astype(np.float64)
    labels = np.frombuffer(payload, dtype="<i4", offset=4 * (n * d + n * k), count=n)
    return h, features, logits, labels


def correct_mask(kind, logits, labels):
    if kind == "label_shift":
        return np.zeros(len(labels), dtype=bool)
    return np.argmax(logits, axis=1) == labels


def softmax(l):
    e = np.exp(l - l.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def energy(l):
    m = l.max(axis=1)
    return m + np.log(np.exp(l - m[:, None]).sum(axis=1))


def scorers(train_z, knn_k):
    unit = train_z / np.linalg.norm(train_z, axis=1, keepdims=True)

    def knn(z, l):
        q = z / np.linalg.norm(z, axis=1, keepdims=True)
        out = np.empty(len(q))
        for i, row in enumerate(q):
            d = np.sqrt(((unit - row) ** 2).sum(axis=1))
            out[i] = -np.partition(d, knn_k - 1)[knn_k - 1]
        return out

    return {
        "msp": lambda z, l: softmax(l).max(axis=1),
        "energy": lambda z, l: energy(l),
        "gradnorm": lambda z, l: np.abs(softmax(l) - 1.0 / l.shape[1]).sum(axis=1) * np.abs(z).sum(axis=1),
        "knn": knn,
    }


def threshold(train_scores, p):
    k = math.floor((1 - p) * len(train_scores) + 1e-9)
    if k == 0:
        return -math.inf
    return np.sort(train_scores)[k - 1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cli", required=True)
    ap.add_argument("--fixture", required=True)
    ap.add_argument("--work", required=True)
    args = ap.parse_args()

    fixture = Path(args.fixture)
    cfg = json.loads((fixture / "config.json").read_text())
    out_dir = Path(args.work) / "report"
    subprocess.run([args.cli, "eval", "--config", str(fixture / "config.json"), "--out", str(out_dir)],
                   check=True, stdout=subprocess.DEVNULL)
    reported = {}
    with open(out_dir / "report.csv", newline="") as f:
        for row in csv.DictReader(f):
            reported[(row["method"], row["dataset"], row["metric"])] = float(row["value"])

    _, tz, tl, ty = read_pack(fixture / cfg["train_path"])
    keep = correct_mask("id_train", tl, ty)
    tz, tl = tz[keep], tl[keep]
    tests = []
    for t in cfg["tests"]:
        h, z, l, y = read_pack(fixture / t["path"])
        tests.append((h["dataset_id"], z, l, correct_mask(t["kind"], l, y)))

    fractions = sorted(set(cfg.get("keep_fractions", [0.95, 0.99])), reverse=True)
    knn_k = cfg.get("scorer", {}).get("knn_k", 50)
    failures = 0
    checked = 0
    for method, fn in scorers(tz, knn_k).items():
        gammas = {p: threshold(fn(tz, tl), p) for p in fractions}
        sums = {p: 0.0 for p in fractions}
        for name, z, l, y in tests:
            s = fn(z, l)
            for p, g in gammas.items():
                kept = s > g
                value = float(np.mean(kept != y))
                sums[p] += value
                metric = f"DER{100 * p:g}"
                got = reported[(method, name, metric)]
                checked += 1
                if abs(got - value) > 5e-6 * max(1.0, abs(value)):
                    failures += 1
                    print(f"MISMATCH {method} {name} {metric}: report {got} recomputed {value}")
        for p in fractions:
            avg = sums[p] / len(tests)
            metric = f"DER{100 * p:g}"
            checked += 1
            if abs(reported[(method, "Average", metric)] - avg) > 5e-6:
                failures += 1
                print(f"MISMATCH {method} Average {metric}: report {reported[(method, 'Average', metric)]} recomputed {avg}")
            print(f"{method:9s} {metric} average {avg:.6f}")
    print(f"{checked} cells checked, {failures} mismatches")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
