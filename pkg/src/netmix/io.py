"""
File formats.

* Population text: first line ``N n``; then per network ``n`` lines of ``n``
  space-separated 0/1 tokens; networks separated by exactly one blank line.
* Distance matrices and MDS coordinates: headerless CSV.
* Ground truth: JSON with representative edge lists, block labels, memberships
  and the regime parameters.
* Posterior samples, one directory per chain: ``trace.csv`` (iteration,
  parameter, cluster_index, value), ``reps.txt`` (one line per draw and slot:
  iteration, slot, then ``i-j`` edge tokens), ``z.csv`` and ``b_<slot>.csv``
  (one row per draw, first column the iteration), and ``manifest.json``.
* Summary: ``summary.json`` plus CSV tables.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .graph import NetworkPopulation, check_adjacency, n_pairs, upper_indices
from .sampler import PosteriorSamples

FORMAT_VERSION = 1
SAMPLE_FILES = ("trace.csv", "reps.txt", "z.csv", "manifest.json")


class DataFormatError(ValueError):
    """Malformed input file.  The message names the file and line."""


# ----------------------------------------------------------------- population

def format_population(pop: NetworkPopulation) -> str:
    blocks = ["\n".join(" ".join(str(int(v)) for v in row) for row in a) for a in pop.networks]
    return f"{pop.N} {pop.n}\n" + "\n\n".join(blocks) + "\n"


def write_population(path, pop: NetworkPopulation):
    Path(path).write_text(format_population(pop))


def parse_population(text: str, source: str = "<string>") -> NetworkPopulation:
    """Parse the population text format, reporting the first problem found.
    Adjacency violations raise :class:`~netmix.graph.AdjacencyError` with the
    offending network and pair."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    def fail(lineno, msg):
        raise DataFormatError(f"{source}:{lineno}: {msg}")

    if not lines:
        fail(1, "empty file; expected header 'N n'")
    head = lines[0].split()
    if len(head) != 2 or not all(h.isdigit() for h in head) or min(int(h) for h in head) < 1:
        fail(1, "header must be two positive integers 'N n'")
    N, n = int(head[0]), int(head[1])
    expected = 1 + N * n + (N - 1)
    nets = np.zeros((N, n, n), dtype=np.uint8)
    pos = 1
    for k in range(N):
        if k > 0:
            if pos >= len(lines):
                fail(pos + 1, f"file ends after {k} of {N} networks")
            if lines[pos].strip() != "":
                fail(pos + 1, f"expected one blank line before network {k}")
            pos += 1
        for i in range(n):
            if pos >= len(lines):
                fail(pos + 1, f"file ends inside network {k}")
            toks = lines[pos].split()
            if len(toks) != n:
                fail(pos + 1, f"network {k} row {i} has {len(toks)} entries, expected {n}")
            for j, t in enumerate(toks):
                if t not in ("0", "1"):
                    fail(pos + 1, f"network {k} entry ({i}, {j}) is {t!r}, expected 0 or 1")
                nets[k, i, j] = t == "1"
            pos += 1
    if pos != expected or len(lines) > expected:
        fail(expected + 1, f"unexpected content after {N} networks")
    for k in range(N):
        check_adjacency(nets[k], network=k)
    return NetworkPopulation(nets)


def read_population(path) -> NetworkPopulation:
    path = Path(path)
    return parse_population(path.read_text(), str(path))


# ---------------------------------------------------------- matrices / truth

def write_matrix_csv(path, m):
    m = np.asarray(m)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(m):
            w.writerow([repr(float(v)) if m.dtype.kind == "f" else int(v) for v in row])


def read_matrix_csv(path, dtype=np.float64):
    with open(path, newline="") as fh:
        return np.array([[dtype(v) for v in row] for row in csv.reader(fh)], dtype=dtype)


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None


def write_truth(path, truth):
    write_json(path, truth.to_dict())


def read_truth(path):
    """Returns ``(reps as (R, n, n) uint8, b, z)``."""
    d = read_json(path)
    try:
        n = int(d["n"])
        reps = np.zeros((len(d["representatives"]), n, n), dtype=np.uint8)
        for r, edges in enumerate(d["representatives"]):
            for i, j in edges:
                reps[r, i, j] = reps[r, j, i] = 1
        return reps, np.asarray(d["b"], dtype=np.int64), np.asarray(d["z"], dtype=np.int64)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise DataFormatError(f"{path}: malformed ground truth ({exc})") from None


# -------------------------------------------------------------------- samples

def _fmt(v):
    return repr(float(v))


def write_samples(directory, samples: PosteriorSamples, manifest: dict):
    """Write one chain's draws plus a manifest.  ``manifest`` is extended
    with format version and shape information."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    C, K, R = samples.C, samples.K, samples.n_slots
    ku, lu = np.triu_indices(K)
    with open(d / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "parameter", "cluster_index", "value"])
        for t in range(len(samples)):
            it = int(samples.iterations[t])
            for name in ("tau", "p", "q"):
                for c in range(C):
                    w.writerow([it, name, c, _fmt(getattr(samples, name)[t, c])])
            for r in range(R):
                for k in range(K):
                    w.writerow([it, f"w_{k}", r, _fmt(samples.w[t, r, k])])
                for k, l in zip(ku, lu):
                    w.writerow([it, f"theta_{k}_{l}", r, _fmt(samples.theta[t, r, k, l])])
            w.writerow([it, "log_posterior", "", _fmt(samples.log_posterior[t])])
    iu, ju = upper_indices(samples.n)
    reps = samples.reps
    with open(d / "reps.txt", "w") as fh:
        for t in range(len(samples)):
            for r in range(R):
                idx = np.flatnonzero(reps[t, r])
                toks = " ".join(f"{iu[e]}-{ju[e]}" for e in idx)
                fh.write(f"{int(samples.iterations[t])} {r}" + (f" {toks}" if toks else "") + "\n")
    write_matrix_csv(d / "z.csv", np.column_stack([samples.iterations, samples.z]))
    for r in range(R):
        write_matrix_csv(d / f"b_{r}.csv", np.column_stack([samples.iterations, samples.b[:, r]]))
    man = dict(manifest)
    man.update(format_version=FORMAT_VERSION, n=samples.n, N=int(samples.z.shape[1]), C=C, K=K,
               slots=R, outlier=bool(samples.outlier), draws=len(samples), config=samples.config)
    write_json(d / "manifest.json", man)


def read_manifest(directory) -> dict:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise DataFormatError(f"{path}: manifest not found")
    man = read_json(path)
    if man.get("format_version") != FORMAT_VERSION:
        raise DataFormatError(f"{path}: format version {man.get('format_version')!r} is not "
                              f"supported (expected {FORMAT_VERSION})")
    return man


def _read_trace(path, D, C, K, R, iterations):
    index = {int(it): t for t, it in enumerate(iterations)}
    arrays = dict(tau=np.full((D, C), np.nan), p=np.full((D, C), np.nan), q=np.full((D, C), np.nan),
                  w=np.full((D, R, K), np.nan), theta=np.full((D, R, K, K), np.nan),
                  log_posterior=np.full(D, np.nan))
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if lineno == 1:
                if row != ["iteration", "parameter", "cluster_index", "value"]:
                    raise DataFormatError(f"{path}:1: unexpected trace header {row}")
                continue
            try:
                if len(row) != 4:
                    raise ValueError(f"expected 4 fields, got {len(row)}")
                it, name, idx, val = row
                t = index[int(it)]
                val = float(val)
                if name == "log_posterior":
                    if idx != "":
                        raise ValueError("log_posterior rows have an empty cluster_index")
                    arrays["log_posterior"][t] = val
                    continue
                i = int(idx)
                if name in ("tau", "p", "q"):
                    arrays[name][t, i] = val
                elif name.startswith("w_"):
                    arrays["w"][t, i, int(name[2:])] = val
                elif name.startswith("theta_"):
                    k, l = (int(x) for x in name[6:].split("_"))
                    arrays["theta"][t, i, k, l] = arrays["theta"][t, i, l, k] = val
                else:
                    raise ValueError(f"unknown parameter {name!r}")
            except (ValueError, KeyError, IndexError) as exc:
                raise DataFormatError(f"{path}:{lineno}: corrupted trace row {row} ({exc})") from None
    for name, arr in arrays.items():
        if np.any(np.isnan(arr)):
            raise DataFormatError(f"{path}: trace is missing values for {name}")
    return arrays


def _read_int_rows(path, D, width):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            try:
                vals = [int(v) for v in row]
                if len(vals) != width:
                    raise ValueError(f"expected {width} fields, got {len(vals)}")
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: corrupted row ({exc})") from None
            rows.append(vals)
    if len(rows) != D:
        raise DataFormatError(f"{path}: expected {D} rows, found {len(rows)}")
    return np.array(rows, dtype=np.int64).reshape(D, width)


def read_samples(directory) -> tuple[PosteriorSamples, dict]:
    d = Path(directory)
    man = read_manifest(d)
    D, C, K, R, n, N = (int(man[k]) for k in ("draws", "C", "K", "slots", "n", "N"))
    z = _read_int_rows(d / "z.csv", D, N + 1)
    iterations = z[:, 0]
    arrays = _read_trace(d / "trace.csv", D, C, K, R, iterations)
    b = np.zeros((D, R, n), dtype=np.int64)
    for r in range(R):
        br = _read_int_rows(d / f"b_{r}.csv", D, n + 1)
        b[:, r] = br[:, 1:]
    P = n_pairs(n)
    pair_index = {f"{i}-{j}": e for e, (i, j) in enumerate(zip(*upper_indices(n)))}
    reps = np.zeros((D, R, P), dtype=np.uint8)
    index = {int(it): t for t, it in enumerate(iterations)}
    seen = 0
    with open(d / "reps.txt") as fh:
        for lineno, line in enumerate(fh, start=1):
            toks = line.split()
            try:
                t, r = index[int(toks[0])], int(toks[1])
                for tok in toks[2:]:
                    reps[t, r, pair_index[tok]] = 1
            except (ValueError, KeyError, IndexError) as exc:
                raise DataFormatError(f"{d / 'reps.txt'}:{lineno}: corrupted line ({exc})") from None
            seen += 1
    if seen != D * R:
        raise DataFormatError(f"{d / 'reps.txt'}: expected {D * R} lines, found {seen}")
    samples = PosteriorSamples(
        iterations=iterations, z=z[:, 1:], tau=arrays["tau"], p=arrays["p"], q=arrays["q"],
        w=arrays["w"], theta=arrays["theta"], b=b, reps_packed=np.packbits(reps, axis=-1),
        log_posterior=arrays["log_posterior"], n=n, outlier=bool(man["outlier"]),
        config=man.get("config", {}))
    return samples, man


# -------------------------------------------------------------------- summary

def write_summary(directory, report: dict):
    """``summary.json`` plus CSV tables: ``parameters.csv`` (parameter,
    cluster_index, mean, lower, upper), ``representatives.csv`` (slot, mass,
    edges), ``allocation.csv`` (N x C, headerless), ``blocks_<slot>.csv``
    (n x K, headerless) and, with ground truth, ``hamming.csv`` (truth_index,
    slot, one column per threshold) and ``clustering.csv`` (mean_entropy,
    mean_purity, perfect_fraction)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_json(d / "summary.json", report)
    with open(d / "parameters.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "cluster_index", "mean", "lower", "upper"])
        for row in report["parameters"]:
            idx = "" if row["cluster_index"] is None else row["cluster_index"]
            w.writerow([row["parameter"], idx, _fmt(row["mean"]), _fmt(row["lower"]), _fmt(row["upper"])])
    with open(d / "representatives.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slot", "mass", "edges"])
        for rep in report["representatives"]:
            w.writerow([rep["slot"], _fmt(rep["mass"]), " ".join(f"{i}-{j}" for i, j in rep["edges"])])
    write_matrix_csv(d / "allocation.csv", np.asarray(report["allocation"], dtype=np.float64))
    for r, m in enumerate(report["block_allocation"]):
        write_matrix_csv(d / f"blocks_{r}.csv", np.asarray(m, dtype=np.float64))
    if "hamming" in report:
        with open(d / "hamming.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            ths = report["hamming"][0]["thresholds"] if report["hamming"] else []
            w.writerow(["truth_index", "slot"] + [f"le_{t}" for t in ths])
            for row in report["hamming"]:
                w.writerow([row["truth_index"], row["slot"]] + [_fmt(v) for v in row["proportions"]])
    if "clustering" in report:
        cl = report["clustering"]
        with open(d / "clustering.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mean_entropy", "mean_purity", "perfect_fraction"])
            w.writerow([_fmt(cl["mean_entropy"]), _fmt(cl["mean_purity"]), _fmt(cl["perfect_fraction"])])


def ensure_writable_dir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    if not os.access(p, os.W_OK):
        raise PermissionError(f"{p}: not writable")
    return p
