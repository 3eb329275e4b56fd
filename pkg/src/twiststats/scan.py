"""Run configuration, resumable chunked family scans and record export."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .arith import get_curve
from .charsum import DEFAULT_CUTOFF
from .explicit import fejer
from .moments import (FamilySpec, assemble, chunk_stats, family_tasks, pc_moment,
                      poly_moment, poly_moment_with_zeros, projection_shapes)
from .parallel import pmap_iter
from .proxy import ProxyConfig, galois_profile

log = logging.getLogger(__name__)

# fields that never change numeric output
_UNHASHED = ("workers", "out_dir")


class ChunkCorruption(RuntimeError):
    pass


def _parse_value(text):
    text = text.strip()
    if text == "":
        return None
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


@dataclass
class RunConfig:
    forms: tuple = ("37a1",)
    sign: int = -1
    classes: Optional[tuple] = None  # None: all (kappa, a) realising ``sign``
    curve: Optional[str] = "37a1"  # attaches C(d; x); None to skip
    X_grid: tuple = (1e4,)
    x_rule: str = "power:0.5"
    L_rule: Optional[str] = None  # "logX", a number, or None for no zero sums
    eps: float = 0.05
    seed: int = 0
    precision: str = "double"
    out_dir: str = "twiststats-run"
    workers: int = 1

    def __post_init__(self):
        self.forms = tuple(self.forms)
        self.X_grid = tuple(float(X) for X in self.X_grid)
        if self.classes is not None:
            self.classes = tuple(tuple(int(v) for v in c) for c in self.classes)
        if self.precision != "double":
            raise ValueError("only double precision scans are supported")
        self.x_for(1e4)  # validate rule

    def x_for(self, X):
        rule = self.x_rule
        if rule == "triple-log":
            return ProxyConfig(X).x
        if rule.startswith("power:"):
            return float(X) ** float(rule.split(":", 1)[1])
        if rule.startswith("fixed:"):
            return float(rule.split(":", 1)[1])
        raise ValueError(f"unknown x rule {rule!r}")

    def L_for(self, X):
        if self.L_rule is None:
            return None
        if self.L_rule == "logX":
            return math.log(X)
        return float(self.L_rule)

    def spec(self, X):
        return FamilySpec(self.forms, self.sign, self.classes, self.curve, self.L_for(X))

    def as_dict(self):
        out = dataclasses.asdict(self)
        out["forms"] = list(self.forms)
        out["X_grid"] = list(self.X_grid)
        out["classes"] = None if self.classes is None else [list(c) for c in self.classes]
        return out

    def hash(self):
        payload = {k: v for k, v in self.as_dict().items() if k not in _UNHASHED}
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_text(self):
        """key = value lines with JSON values."""
        return "".join(f"{k} = {json.dumps(v)}\n" for k, v in sorted(self.as_dict().items()))

    @classmethod
    def from_mapping(cls, data):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_text(cls, text):
        text = text.strip()
        if text.startswith("{"):
            return cls.from_mapping(json.loads(text))
        data = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {n}: expected key = value")
            k, v = line.split("=", 1)
            data[k.strip()] = _parse_value(v)
        return cls.from_mapping(data)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_text(fh.read())

    def with_overrides(self, **kw):
        data = self.as_dict()
        data.update({k: v for k, v in kw.items() if v is not None})
        return RunConfig.from_mapping(data)


@dataclass
class ResultRecord:
    kind: str
    inputs: dict
    outputs: dict
    config_hash: str
    timestamp: float = field(default_factory=time.time)
    version: str = __version__

    def as_dict(self):
        return dataclasses.asdict(self)


# --------------------------------------------------------------------------
# chunk persistence
# --------------------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class ChunkStore:
    """npz per chunk plus an append-only manifest of checksums, written by the coordinator."""

    def __init__(self, root, config_hash):
        self.root = os.path.join(root, "chunks", config_hash)
        self.manifest = os.path.join(self.root, "manifest.jsonl")
        os.makedirs(self.root, exist_ok=True)
        self._entries = self._read_manifest()

    def _read_manifest(self):
        out = {}
        if not os.path.exists(self.manifest):
            return out
        with open(self.manifest) as fh:
            for line in fh:
                try:
                    e = json.loads(line)
                except json.JSONDecodeError:
                    continue  # torn final line from an interrupted write
                out[e["file"]] = e["sha256"]
        return out

    @staticmethod
    def name(X, lo, hi):
        return f"X{X:.6g}_{lo}_{hi}.npz"

    def load(self, X, lo, hi):
        """Stored arrays, or None when absent; raises on checksum mismatch."""
        fname = self.name(X, lo, hi)
        path = os.path.join(self.root, fname)
        if fname not in self._entries or not os.path.exists(path):
            return None
        if _sha256(path) != self._entries[fname]:
            raise ChunkCorruption(f"{fname}: checksum mismatch")
        with np.load(path) as z:
            return {k: z[k] for k in z.files}

    def save(self, X, lo, hi, arrays):
        fname = self.name(X, lo, hi)
        path = os.path.join(self.root, fname)
        tmp = path + ".tmp.npz"
        np.savez(tmp, **arrays)
        os.replace(tmp, path)
        digest = _sha256(path)
        with open(self.manifest, "a") as fh:
            fh.write(json.dumps({"file": fname, "sha256": digest}) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._entries[fname] = digest


def scan_family(config: RunConfig, X, workers=None, store: Optional[ChunkStore] = None,
                max_new_chunks=None):
    """Family data at one X, reusing stored chunks; corrupt chunks are recomputed."""
    x = config.x_for(X)
    spec = config.spec(X)
    tasks = family_tasks(spec, X, x, DEFAULT_CUTOFF, ProxyConfig(X, x=x))
    chunks = [None] * len(tasks)
    todo = []
    for i, t in enumerate(tasks):
        lo, hi = t[4], t[5]
        if store is not None:
            try:
                chunks[i] = store.load(X, lo, hi)
            except ChunkCorruption as exc:
                log.warning("%s; recomputing", exc)
        if chunks[i] is None:
            todo.append(i)
    if max_new_chunks is not None:
        todo = todo[:max_new_chunks]
    computed = len(todo)
    for i, arrays in zip(todo, pmap_iter(chunk_stats, [tasks[i] for i in todo],
                                         workers if workers is not None else config.workers)):
        if store is not None:
            store.save(X, tasks[i][4], tasks[i][5], arrays)
        chunks[i] = arrays
    if any(c is None for c in chunks):
        return None, computed
    return assemble(chunks, spec, X, x, len(spec.class_list())), computed


def _reports(config, data, chash):
    X, x = data.X, data.x
    M = data.M
    base = {"X": X, "x": x, "forms": list(config.forms)}
    yield ResultRecord("family", base, {"count": int(data.d.size),
                                        "weight": math.fsum(data.w.tolist()),
                                        "n_classes": data.n_classes}, chash)
    a = np.ones(M) / math.sqrt(M)
    for k in (1, 2, 3, 4):
        r = poly_moment(a, k, data)
        yield ResultRecord("poly_moment", {**base, "k": k, "a": a.tolist()}, r.as_dict(), chash)
    if data.z is not None:
        kernel = fejer(config.L_for(X))
        for k in (0, 1, 2):
            r = poly_moment_with_zeros(a, k, data, kernel)
            yield ResultRecord("poly_moment_zeros", {**base, "k": k, "L": kernel.L},
                               r.as_dict(), chash)
    if data.C is not None:
        sigma2 = galois_profile(get_curve(config.curve)).sigma2
        for b, c in ((1.0, 0.0), (0.0, 1.0), (1.0, -1.0)):
            r = pc_moment(b, c, 2, data, sigma2)
            yield ResultRecord("pc_moment", {**base, "b": b, "c": c, "k": 2, "sigma2": sigma2},
                               r.as_dict(), chash)
    for s in projection_shapes(data, 5, config.seed):
        yield ResultRecord("shape", {**base, "seed": config.seed, "vector": s.vector},
                           {"mean": s.mean, "variance": s.variance, "skewness": s.skewness,
                            "excess_kurtosis": s.excess_kurtosis}, chash)


def run_scan(config: RunConfig, workers=None, max_new_chunks=None, persist=True):
    """Yield records for every X in the grid; resumes from stored chunks.

    With ``max_new_chunks`` the scan stops after computing that many new
    chunks (simulated interruption) and yields nothing for incomplete X.
    """
    chash = config.hash()
    store = ChunkStore(config.out_dir, chash) if persist else None
    budget = max_new_chunks
    for X in config.X_grid:
        data, used = scan_family(config, X, workers, store, budget)
        if data is None:
            return
        if budget is not None:
            budget -= used
        yield from _reports(config, data, chash)


def write_records(records, path):
    with open(path, "a") as fh:
        for r in records:
            fh.write(json.dumps(r.as_dict(), sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        if math.isfinite(v):
            return float(f"{v:.12g}")
        return v
    if isinstance(v, np.generic):
        return _fmt(v.item())
    if isinstance(v, list):
        return [_fmt(u) for u in v]
    if isinstance(v, dict):
        return {k: _fmt(u) for k, u in v.items()}
    return v


def flatten(record):
    """One flat row: kind, config_hash, version, timestamp, then sorted in.* and out.*."""
    rec = record.as_dict() if isinstance(record, ResultRecord) else record
    row = {"kind": rec["kind"], "config_hash": rec["config_hash"],
           "version": rec.get("version", ""), "timestamp": rec.get("timestamp", "")}
    for prefix, key in (("in", "inputs"), ("out", "outputs")):
        for k in sorted(rec.get(key, {})):
            row[f"{prefix}.{k}"] = rec[key][k]
    return row


HEAD = ["kind", "config_hash", "version", "timestamp"]


def export(records, fmt, path=None):
    """Write records as csv or jsonl at 12 significant digits; returns the text."""
    rows = [_fmt(flatten(r)) for r in records]
    if fmt == "jsonl":
        text = "".join(json.dumps(r, sort_keys=False) + "\n" for r in rows)
    elif fmt == "csv":
        extra = sorted({k for r in rows for k in r} - set(HEAD))
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=HEAD + extra, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: json.dumps(v) if isinstance(v, (list, dict, type(None))) else v
                        for k, v in r.items()})
        text = buf.getvalue()
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def read_csv(text):
    """Inverse of the csv export (values parsed back to JSON types)."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        parsed = {}
        for k, v in row.items():
            if v == "":
                continue
            if k in ("kind", "config_hash", "version"):
                parsed[k] = v
            else:
                parsed[k] = _parse_value(v)
        out.append(parsed)
    return out


def export_per_d(data, path, extra=None):
    """Per-d csv (d, weight, P columns, C, zero sums, any extra columns) for plotting."""
    cols = {"d": data.d, "weight": data.w}
    for j in range(data.M):
        cols[f"P{j}"] = data.P[:, j]
    if data.C is not None:
        cols["C"] = data.C
    if data.z is not None:
        cols["zero_sum"] = data.z
    cols.update(extra or {})
    names = list(cols)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(len(data.d)):
            w.writerow([int(cols[n][i]) if n == "d" else f"{float(cols[n][i]):.12g}"
                        for n in names])
