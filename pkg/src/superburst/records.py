"""Emission records and their CSV/JSON serialization.

One EmissionRecord holds the time series of a single evolution: total
and per-channel photon rates, optional directional rates, optional
standard errors (Monte Carlo), and optional level populations. Times are
in units of 1/Gamma0, rates in units of Gamma0.

CSV layout: one header line, then rows of floats at 17 significant
digits (value-preserving round trip). Columns: t_gamma0, R_total, one
R_<label> per channel, one R_dir_<label> per directional entry, one
pop_<label> per population entry, and a <column>_stderr twin right
after any column that carries statistics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class EmissionRecord:
    times: np.ndarray
    channel_rates: dict[str, np.ndarray]
    directional: dict[str, np.ndarray] = field(default_factory=dict)
    populations: dict[str, np.ndarray] = field(default_factory=dict)
    stderr: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("times must be a nonempty 1-d array")
        self.times = t
        for d in (self.channel_rates, self.directional, self.populations,
                  self.stderr):
            for k, v in d.items():
                v = np.asarray(v, dtype=float)
                if v.shape != t.shape:
                    raise ValueError(f"column {k!r} length does not match times")
                d[k] = v

    @property
    def total_rate(self) -> np.ndarray:
        return sum(self.channel_rates.values())

    @property
    def channels(self) -> tuple[str, ...]:
        return tuple(self.channel_rates)

    def _columns(self) -> list[tuple[str, np.ndarray]]:
        cols = [("t_gamma0", self.times), ("R_total", self.total_rate)]
        cols += [(f"R_{k}", v) for k, v in self.channel_rates.items()]
        cols += [(f"R_dir_{k}", v) for k, v in self.directional.items()]
        cols += [(f"pop_{k}", v) for k, v in self.populations.items()]
        out = []
        for name, vec in cols:
            out.append((name, vec))
            if name in self.stderr:
                out.append((name + "_stderr", self.stderr[name]))
        return out

    def write_csv(self, path) -> None:
        cols = self._columns()
        lines = [",".join(name for name, _ in cols)]
        for i in range(self.times.size):
            lines.append(",".join(_fmt(vec[i]) for _, vec in cols))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def read_csv(path) -> EmissionRecord:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    cols = {name: data[:, i] for i, name in enumerate(header)}
    times = cols.pop("t_gamma0")
    cols.pop("R_total", None)
    stderr = {}
    for name in [c for c in cols if c.endswith("_stderr")]:
        stderr[name[: -len("_stderr")]] = cols.pop(name)
    channel_rates, directional, populations = {}, {}, {}
    for name, vec in cols.items():
        if name.startswith("R_dir_"):
            directional[name[len("R_dir_"):]] = vec
        elif name.startswith("pop_"):
            populations[name[len("pop_"):]] = vec
        elif name.startswith("R_"):
            channel_rates[name[len("R_"):]] = vec
    return EmissionRecord(times, channel_rates, directional, populations, stderr)


def write_json(obj: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x)!r}")
