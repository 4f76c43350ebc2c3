"""Result files: JSONL trajectories, CSV tables and run manifests.

Every file is written to a temporary name in its target directory and then
renamed into place, so a reader never sees a half-written file.  Floats are
written with ``repr``, the shortest decimal that round-trips exactly.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from datetime import datetime, timezone

import numpy as np

from .dynamics import TimeGrid, Trajectory
from .errors import FormatError
from .spaces import SpaceDiscretization

TRAJECTORY_FORMAT = "ldplab-trajectory"
TRAJECTORY_VERSION = 1
MANIFEST_NAME = "manifest.json"


def atomic_write_text(path, text):
    """Write UTF-8 ``text`` to ``path`` through a temporary file and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


# -- trajectories ------------------------------------------------------------------

def trajectory_text(traj, space=None):
    """JSONL text: a metadata header, then one record per time point.

    ``coefficients`` are the nodal values of the state, so reading the file
    back reproduces the states bit for bit.
    """
    space = space or traj.space
    if space is None:
        raise FormatError("trajectory has no space attached; pass one explicitly")
    states = np.asarray(traj.states, dtype=float)
    if states.ndim != 2 or states.shape[0] != traj.grid.num_steps + 1:
        raise FormatError(f"expected {traj.grid.num_steps + 1} states, got {states.shape[0]}")
    if states.shape[1] != space.num_points:
        raise FormatError(f"states have {states.shape[1]} values, space has {space.num_points}")
    header = {"format": TRAJECTORY_FORMAT, "version": TRAJECTORY_VERSION,
              "domain_kind": space.domain_kind, "num_points": space.num_points,
              "alpha": space.alpha, "horizon": traj.grid.horizon,
              "num_steps": traj.grid.num_steps, "level": traj.level}
    lines = [json.dumps(header)]
    h2 = space.h_norm(states) ** 2
    va = space.v_norm_pow(states)
    for t, y, a, b in zip(traj.grid.times, states, h2, va):
        lines.append(json.dumps({"t": float(t), "coefficients": y.tolist(),
                                 "h_norm2": float(a), "v_norm_alpha": float(b)}))
    return "\n".join(lines) + "\n"


def write_trajectory(traj, path, space=None):
    atomic_write_text(path, trajectory_text(traj, space))


def read_trajectory(path):
    """Inverse of :func:`write_trajectory`; metadata must match the records."""
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    if not lines:
        raise FormatError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:1: header is not JSON ({exc})") from None
    if not isinstance(header, dict) or header.get("format") != TRAJECTORY_FORMAT:
        raise FormatError(f"{path}:1: not an {TRAJECTORY_FORMAT} file")
    if header.get("version") != TRAJECTORY_VERSION:
        raise FormatError(f"{path}:1: unsupported version {header.get('version')!r}")
    try:
        space = SpaceDiscretization(header["domain_kind"], header["num_points"], header["alpha"])
        grid = TimeGrid(header["horizon"], header["num_steps"])
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"{path}:1: bad metadata ({exc})") from None
    rows = lines[1:]
    if len(rows) != grid.num_steps + 1:
        raise FormatError(f"{path}: header promises {grid.num_steps + 1} states, "
                          f"found {len(rows)}")
    states = np.empty((len(rows), space.num_points))
    times = grid.times
    for k, line in enumerate(rows):
        where = f"{path}:{k + 2}"
        try:
            rec = json.loads(line)
            coeffs = rec["coefficients"]
            t = rec["t"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise FormatError(f"{where}: malformed record ({exc})") from None
        if len(coeffs) != space.num_points:
            raise FormatError(f"{where}: {len(coeffs)} coefficients, header says "
                              f"N={space.num_points}")
        if t != times[k]:
            raise FormatError(f"{where}: time {t!r} does not match grid time {times[k]!r}")
        states[k] = coeffs
    diag = {"h_norm2": space.h_norm(states) ** 2, "v_norm_alpha": space.v_norm_pow(states)}
    return Trajectory(grid, states, diag, header.get("level"), space)


# -- tables ------------------------------------------------------------------------

def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return " ".join(_cell(v) for v in value)
    return str(value)


def csv_text(rows, columns):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def json_text(obj):
    """Strict JSON: non-finite floats (an infeasible rate, say) become ``null``."""
    return json.dumps(_strict(obj), indent=2, sort_keys=True, default=_json_default,
                      allow_nan=False) + "\n"


def _strict(obj):
    if isinstance(obj, dict):
        return {k: _strict(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_strict(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _strict(obj.tolist())
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    return obj


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# -- run directories ---------------------------------------------------------------

def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunWriter:
    """Output directory of one run together with its manifest.

    The manifest is written first with ``complete = false`` and rewritten with
    ``complete = true`` only after every data file is in place, so an
    interrupted run is always recognizable as incomplete.
    """

    def __init__(self, directory, config, version):
        self.directory = directory
        self.files = []
        self.manifest = {"artifact": "ldplab", "version": version, "config": config,
                         "started": _now(), "finished": None, "complete": False,
                         "status": "running", "exit_code": None, "files": [], "error": None}

    @property
    def manifest_path(self):
        return os.path.join(self.directory, MANIFEST_NAME)

    def begin(self):
        os.makedirs(self.directory, exist_ok=True)
        self._flush()
        return self

    def write_text(self, name, text):
        path = os.path.join(self.directory, name)
        atomic_write_text(path, text)
        self.files.append(name)
        return path

    def finish(self, status, exit_code, error=None):
        self.manifest.update(finished=_now(), status=status, exit_code=exit_code, error=error,
                             files=self._digests(), complete=True)
        self._flush()
        return self.manifest

    def abort(self, status, exit_code, error):
        self.manifest.update(finished=_now(), status=status, exit_code=exit_code, error=error,
                             files=self._digests(), complete=False)
        self._flush()
        return self.manifest

    def _digests(self):
        out = []
        for name in self.files:
            path = os.path.join(self.directory, name)
            out.append({"name": name, "sha256": sha256_file(path),
                        "bytes": os.path.getsize(path)})
        return out

    def _flush(self):
        atomic_write_text(self.manifest_path, json_text(self.manifest))


def verify_manifest(directory):
    """True when the manifest is complete and every digest matches the disk."""
    with open(os.path.join(directory, MANIFEST_NAME), encoding="utf-8") as fh:
        manifest = json.load(fh)
    if not manifest.get("complete"):
        return False
    for entry in manifest["files"]:
        path = os.path.join(directory, entry["name"])
        if not os.path.exists(path) or sha256_file(path) != entry["sha256"]:
            return False
    return True
