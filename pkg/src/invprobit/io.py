"""CSV ingestion, posterior persistence and summary tables.

Posterior directory layout (all CSV with a header row, ``draw`` is the
0-based index of the stored draw)::

    manifest.json     config, seed, dataset digest, dimensions, stats
    labels.csv        draw, iteration, x, d, s, label
    weights.csv       draw, z, weight
    atoms.csv         draw, z, k, value
    random_effects.csv draw, class, subject, k, value     (class C or I)
    variances.csv     draw, sigma_a2, sigma_s2, sigmaC_a2, ...
    drifts.csv        draw, d, s, i, t, value     (projected drifts)
    probs.csv         draw, d, s, i, t, value

Every index column except ``draw``, ``z`` and ``k`` is 1-based.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .diagnostics import coclustering_matrix, point_partition
from .errors import DomainError, IntegrityError
from .model import Dataset
from .sampler import VARIANCE_NAMES, McmcConfig, PosteriorSamples

DATASET_HEADER = ("subject", "block", "trial", "stimulus", "response")
FORMAT_VERSION = 1


def dataset_digest(ds):
    """SHA-256 over the dimensions and the sorted trial table."""
    m = ds.as_matrix()
    m = m[np.lexsort(m.T[::-1])]
    h = hashlib.sha256()
    h.update(np.array([ds.n, ds.T, ds.L, ds.d0], dtype=np.int64).tobytes())
    h.update(np.ascontiguousarray(m, dtype=np.int64).tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# datasets


def read_dataset(path, d0=None):
    """Read a trial table with header ``subject,block,trial,stimulus,response``.

    ``d0`` is inferred as the largest stimulus/response id unless given.
    """
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DomainError(f"{path}: empty file") from None
        header = [h.strip().lower() for h in header]
        if tuple(header) != DATASET_HEADER:
            raise DomainError(f"{path}: expected header {','.join(DATASET_HEADER)}, got {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                raise DomainError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                vals = [int(c) for c in row]
            except ValueError:
                raise DomainError(f"{path}:{lineno}: non-integer field in {row}") from None
            if min(vals) < 1:
                bad = DATASET_HEADER[int(np.argmin(vals))]
                raise DomainError(f"{path}:{lineno}: {bad} must be >= 1")
            if d0 is not None and max(vals[3:]) > d0:
                raise DomainError(f"{path}:{lineno}: category id exceeds d0={d0}")
            rows.append(vals)
    if not rows:
        raise DomainError(f"{path}: no trials")
    arr = np.array(rows, dtype=np.int64)
    try:
        return Dataset.from_arrays(*arr.T, d0=d0)
    except DomainError as exc:
        msg = str(exc)
        if msg.startswith("row "):
            r = int(msg.split()[1].rstrip(":"))
            msg = f"line {r + 1}: " + msg.split(":", 1)[1].strip()
        raise DomainError(f"{path}: {msg}") from None


def write_dataset(ds, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATASET_HEADER)
        w.writerows(ds.as_matrix().tolist())


def _write_long(path, header, index_arrays, values, fmt="%.17g"):
    cols = [np.asarray(a).ravel() for a in index_arrays] + [np.asarray(values).ravel()]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        n_idx = len(index_arrays)
        for row in zip(*cols):
            fh.write(",".join([str(int(v)) for v in row[:n_idx]] + [fmt % row[n_idx]]) + "\n")


def write_field(path, arr, value_name="value", leading=()):
    """Write a ``[..., d, s, i, t]`` array in long format with 1-based ``d, s, i, t``.

    ``leading`` names any axes before ``d`` (0-based, e.g. ``draw``).
    """
    arr = np.asarray(arr)
    grids = np.indices(arr.shape)
    nl = len(leading)
    idx = [grids[j] for j in range(nl)] + [grids[j] + 1 for j in range(nl, arr.ndim)]
    _write_long(path, list(leading) + ["d", "s", "i", "t", value_name], idx, arr)


def _read_table(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(c) for c in row] for row in reader if row])
    return header, data.reshape(-1, len(header))


def write_truth(truth, path):
    """Ground truth as ``d, s, i, t, drift, prob`` plus a cluster-label file."""
    path = Path(path)
    grids = np.indices(truth.drifts.shape) + 1
    with path.open("w", newline="") as fh:
        fh.write("d,s,i,t,drift,prob\n")
        for row in zip(*(g.ravel() for g in grids), truth.drifts.ravel(), truth.probs.ravel()):
            fh.write("%d,%d,%d,%d,%.17g,%.17g\n" % row)
    d0 = truth.drifts.shape[0]
    with path.with_name(path.stem + "_clusters.csv").open("w", newline="") as fh:
        fh.write("x,d,s,cluster\n")
        for x, lab in enumerate(truth.labels):
            fh.write(f"{x + 1},{x // d0 + 1},{x % d0 + 1},{lab + 1}\n")


def read_truth(path):
    from .simulate import GroundTruth

    path = Path(path)
    _, data = _read_table(path)
    idx = data[:, :4].astype(int) - 1
    shape = tuple(idx.max(axis=0) + 1)
    drifts = np.zeros(shape)
    probs = np.zeros(shape)
    drifts[tuple(idx.T)] = data[:, 4]
    probs[tuple(idx.T)] = data[:, 5]
    cl = path.with_name(path.stem + "_clusters.csv")
    labels = np.empty(0, dtype=np.int64)
    if cl.exists():
        _, c = _read_table(cl)
        labels = c[:, 3].astype(np.int64) - 1
    return GroundTruth(drifts=drifts, probs=probs, labels=labels)


# ---------------------------------------------------------------------------
# posterior samples


def write_samples(samples, out_dir):
    """Persist all stored draws under ``out_dir`` (see module docstring)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    S, d0 = len(samples), samples.d0
    draws = np.arange(S)
    x = np.arange(d0 * d0)
    D, X = np.meshgrid(draws, x, indexing="ij")
    It = np.broadcast_to(samples.iterations[:, None], D.shape)
    with open(out / "labels.csv", "w", newline="") as fh:
        fh.write("draw,iteration,x,d,s,label\n")
        for row in zip(D.ravel(), It.ravel(), X.ravel(), samples.labels.ravel()):
            dr, it, xx, lab = (int(v) for v in row)
            fh.write(f"{dr},{it},{xx + 1},{xx // d0 + 1},{xx % d0 + 1},{lab + 1}\n")
    g = np.indices(samples.weights.shape)
    _write_long(out / "weights.csv", ["draw", "z", "weight"], [g[0], g[1]], samples.weights)
    g = np.indices(samples.atoms.shape)
    _write_long(out / "atoms.csv", ["draw", "z", "k", "value"], list(g), samples.atoms)
    with open(out / "random_effects.csv", "w", newline="") as fh:
        fh.write("draw,class,subject,k,value\n")
        for cls, arr in (("C", samples.betaC), ("I", samples.betaI)):
            g = np.indices(arr.shape)
            for dr, i, k, v in zip(g[0].ravel(), g[1].ravel(), g[2].ravel(), arr.ravel()):
                fh.write(f"{dr},{cls},{i + 1},{k},{v:.17g}\n")
    with open(out / "variances.csv", "w", newline="") as fh:
        fh.write("draw," + ",".join(VARIANCE_NAMES) + "\n")
        for dr, row in enumerate(samples.variances):
            fh.write(f"{dr}," + ",".join(f"{v:.17g}" for v in row) + "\n")
    write_field(out / "drifts.csv", samples.drifts, leading=("draw",))
    write_field(out / "probs.csv", samples.probs, leading=("draw",))
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": samples.config.to_dict(),
        "seed": samples.config.seed,
        "dataset_digest": samples.digest,
        "dims": {
            "n": samples.n,
            "T": samples.T,
            "d0": samples.d0,
            "K": int(samples.atoms.shape[2]),
            "z_max": int(samples.atoms.shape[1]),
            "draws": S,
        },
        "stats": samples.stats,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_samples(in_dir, dataset=None):
    """Load draws written by :func:`write_samples`.

    If ``dataset`` is given its digest must match the manifest.
    """
    src = Path(in_dir)
    try:
        manifest = json.loads((src / "manifest.json").read_text())
    except FileNotFoundError:
        raise IntegrityError(f"{src}: no manifest.json") from None
    if dataset is not None and dataset_digest(dataset) != manifest["dataset_digest"]:
        raise IntegrityError("dataset digest does not match the manifest")
    dims = manifest["dims"]
    S, n, T, d0, K, z_max = (dims[k] for k in ("draws", "n", "T", "d0", "K", "z_max"))
    cfg = McmcConfig(**manifest["config"])

    _, lab = _read_table(src / "labels.csv")
    iterations = lab[:, 1].reshape(S, d0 * d0)[:, 0].astype(np.int64)
    labels = lab[:, 5].reshape(S, d0 * d0).astype(np.int64) - 1
    _, w = _read_table(src / "weights.csv")
    _, a = _read_table(src / "atoms.csv")
    with open(src / "random_effects.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    vals = np.array([float(r[4]) for r in rows])
    betaC, betaI = vals.reshape(2, S, n, K)
    _, v = _read_table(src / "variances.csv")
    _, dr = _read_table(src / "drifts.csv")
    _, pr = _read_table(src / "probs.csv")
    shape = (S, d0, d0, n, T)
    if dr.shape[0] != int(np.prod(shape)) or pr.shape[0] != int(np.prod(shape)):
        raise IntegrityError("field files do not match the manifest dimensions")
    return PosteriorSamples(
        config=cfg,
        n=n,
        T=T,
        d0=d0,
        digest=manifest["dataset_digest"],
        iterations=iterations,
        labels=labels,
        weights=w[:, 2].reshape(S, z_max),
        atoms=a[:, 3].reshape(S, z_max, K),
        betaC=betaC,
        betaI=betaI,
        variances=v[:, 1:].reshape(S, len(VARIANCE_NAMES)),
        drifts=dr[:, 5].reshape(shape),
        probs=pr[:, 5].reshape(shape),
        stats=manifest.get("stats", {}),
    )


# ---------------------------------------------------------------------------
# summaries


def interval(draws, level=0.95, axis=0):
    """Equal-tailed credible interval of ``draws`` along ``axis``."""
    if not 0 < level < 1:
        raise DomainError("credible level must lie in (0, 1)")
    a = (1.0 - level) / 2.0
    lo, hi = np.quantile(draws, [a, 1.0 - a], axis=axis)
    return lo, hi


def summarize(samples, level=0.95):
    """Posterior means and credible intervals of drifts and probabilities.

    Returns a dict of tables (each a dict of equal-length columns) plus the
    co-clustering matrix and point partition.
    """
    if len(samples) == 0:
        raise DomainError("no stored draws")

    def table(arr, with_subject):
        mean = arr.mean(axis=0)
        lo, hi = interval(arr, level)
        g = np.indices(mean.shape) + 1
        cols = {"d": g[0].ravel(), "s": g[1].ravel()}
        if with_subject:
            cols["i"] = g[2].ravel()
        cols["t"] = g[-1].ravel()
        cols.update(mean=mean.ravel(), lower=lo.ravel(), upper=hi.ravel())
        return cols

    pop_drift = samples.drifts.mean(axis=3)
    pop_prob = samples.probs.mean(axis=3)
    cc = coclustering_matrix(samples.labels)
    part = point_partition(samples.labels)
    return {
        "drift_population": table(pop_drift, False),
        "drift_subject": table(samples.drifts, True),
        "prob_population": table(pop_prob, False),
        "prob_subject": table(samples.probs, True),
        "coclustering": cc,
        "partition": part,
        "level": level,
    }


def write_table(path, cols):
    names = list(cols)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*(cols[k] for k in names)):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v):
    if isinstance(v, (str, np.str_)):
        return str(v)
    if float(v).is_integer() and abs(v) < 2**53 and isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.10g}"


def write_summary(summary, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("drift_population", "drift_subject", "prob_population", "prob_subject"):
        write_table(out / f"{name}.csv", summary[name])
    cc = summary["coclustering"]
    x_max = cc.shape[0]
    d0 = int(round(np.sqrt(x_max)))
    xi, xj = np.indices(cc.shape)
    write_table(
        out / "coclustering.csv",
        {
            "x1": xi.ravel() + 1,
            "d1": xi.ravel() // d0 + 1,
            "s1": xi.ravel() % d0 + 1,
            "x2": xj.ravel() + 1,
            "d2": xj.ravel() // d0 + 1,
            "s2": xj.ravel() % d0 + 1,
            "prob": cc.ravel(),
        },
    )
    lab = summary["partition"].labels
    _, dense = np.unique(lab, return_inverse=True)
    x = np.arange(x_max)
    write_table(out / "partition.csv", {"x": x + 1, "d": x // d0 + 1, "s": x % d0 + 1, "cluster": dense + 1})


# ---------------------------------------------------------------------------
# key = value config files


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment, keys use ``_`` or ``-``."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"{path}:{lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise DomainError(f"{path}:{lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out
