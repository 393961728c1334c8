"""CSV and run-manifest persistence. Every file is written to a temporary name and renamed."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InputError

__all__ = ["RunRecord", "write_atomic", "write_csv", "read_csv", "sha256_file",
           "write_record", "read_record", "verify_record"]


def write_atomic(path, data: bytes | str):
    """Write ``data`` to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, rows, config_hash: str | None = None, comments=()):
    """CSV with ``#`` comment lines (config hash first), a header row and ``repr`` floats."""
    buf = io.StringIO()
    if config_hash is not None:
        buf.write(f"# config_hash={config_hash}\n")
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        if len(r) != len(columns):
            raise InputError(f"row has {len(r)} fields, header has {len(columns)}")
        w.writerow([_fmt(v) for v in r])
    return write_atomic(path, buf.getvalue())


@dataclass(frozen=True)
class CsvTable:
    columns: tuple
    data: dict
    comments: tuple

    def __len__(self):
        return len(next(iter(self.data.values()))) if self.data else 0

    def __getitem__(self, name):
        return self.data[name]


def read_csv(path) -> CsvTable:
    """Read a CSV written by :func:`write_csv`; numeric columns become float arrays."""
    comments, lines = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                comments.append(line[1:].strip())
            elif line.strip():
                lines.append(line)
    if not lines:
        raise InputError(f"{path}: no header row")
    reader = csv.reader(lines)
    columns = tuple(next(reader))
    raw = list(reader)
    data = {}
    for k, name in enumerate(columns):
        col = [r[k] for r in raw]
        try:
            data[name] = np.array([float(v) for v in col])
        except ValueError:
            data[name] = np.array(col, dtype=object)
    return CsvTable(columns, data, tuple(comments))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunRecord:
    """Provenance of one run: config hash, seed, timestamps and file checksums."""

    config_hash: str
    seed: int
    experiment: str
    started: str
    finished: str = ""
    files: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def add(self, path, root):
        rel = os.path.relpath(path, root)
        self.files.append({"path": rel, "sha256": sha256_file(path)})


def write_record(rec: RunRecord, root) -> Path:
    text = json.dumps(asdict(rec), indent=2, sort_keys=True) + "\n"
    return write_atomic(Path(root) / "run.json", text)


def read_record(path) -> RunRecord:
    with open(path, encoding="utf-8") as fh:
        return RunRecord(**json.load(fh))


def verify_record(path) -> list:
    """Paths whose checksum no longer matches the manifest (empty when intact)."""
    rec = read_record(path)
    root = Path(path).parent
    bad = []
    for f in rec.files:
        p = root / f["path"]
        if not p.exists() or sha256_file(p) != f["sha256"]:
            bad.append(f["path"])
    return bad
