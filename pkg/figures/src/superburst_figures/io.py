"""Bundle access: manifests, run entries, CSV tables.

Everything raises BundleError with the offending path or column named, so a
broken bundle fails loudly before any image is written.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


class BundleError(RuntimeError):
    """A manifest or table cannot supply what a figure needs."""


def load_manifest(path):
    """Read a bundle manifest; returns (manifest dict, bundle directory)."""
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise BundleError(f"cannot read manifest {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise BundleError(f"manifest {path} is not valid JSON: {exc}") from None
    if not isinstance(manifest, dict) or not manifest.get("runs"):
        raise BundleError(f"manifest {path} lists no runs")
    if manifest.get("partial_output"):
        raise BundleError(
            f"manifest {path} is marked partial; re-run the bundle first")
    return manifest, path.parent


def run_entry(manifest, label, required=True):
    for entry in manifest["runs"]:
        if entry["label"] == label:
            if "error" in entry:
                raise BundleError(
                    f"run '{label}' failed upstream: {entry['error']}")
            return entry
    if not required:
        return None
    have = ", ".join(e["label"] for e in manifest["runs"])
    raise BundleError(f"manifest has no run '{label}' (runs: {have})")


class Table:
    """A CSV table with named float columns; misses name the file."""

    def __init__(self, columns, path):
        self._columns = columns
        self.path = Path(path)

    @property
    def names(self):
        return list(self._columns)

    def __contains__(self, name):
        return name in self._columns

    def col(self, name):
        try:
            return self._columns[name]
        except KeyError:
            raise BundleError(
                f"{self.path.name} has no column '{name}' "
                f"(columns: {', '.join(self._columns)})") from None


def load_table(entry, root):
    """Load the CSV behind a manifest run entry."""
    if "csv" not in entry:
        raise BundleError(f"run '{entry['label']}' has no table on disk")
    csv_path = Path(root) / entry["csv"]
    try:
        with open(csv_path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = list(reader)
    except OSError as exc:
        raise BundleError(f"cannot read table {csv_path}: {exc}") from None
    if not header or not rows:
        raise BundleError(f"table {csv_path} is empty")
    data = np.asarray(rows, dtype=float)
    return Table({name: data[:, i] for i, name in enumerate(header)}, csv_path)


def summary_value(entry, *keys):
    """Walk entry['summary'][k0][k1]... with a named error on a miss."""
    node = entry.get("summary")
    if node is None:
        raise BundleError(f"run '{entry['label']}' carries no summary")
    walked = []
    for key in keys:
        walked.append(str(key))
        try:
            node = node[key]
        except (KeyError, TypeError, IndexError):
            raise BundleError(
                f"run '{entry['label']}' summary has no "
                f"'{'.'.join(walked)}'") from None
    return node
