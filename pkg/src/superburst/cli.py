"""Experiment runner: declarative configs in, CSV/JSON artifacts out.

Configs are flat INI files ('#' comments, UTF-8). Every run writes its
time series as CSV (17 significant digits, times in 1/Gamma0) plus a
JSON summary; a bundle-level manifest records the config hash, code
version, wall time and whether output is partial. Figure presets fan
out the runs behind the paper-style figures; --quick shrinks array
sizes and trajectory counts while keeping the output schema, which is
what the rendering smoke tests consume.

Exit codes: 0 success, 2 config error, 3 solver failure, 4 failed
acceptance check (preset --check).
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import find_peak, fit_power_law, fit_share, photon_shares
from .atoms import (INITIAL_STATES, SPECIES, build_level_scheme,
                    two_level_scheme)
from .criteria import criterion_sweep
from .cumulant import evolve_cumulant
from .dicke_point import evolve_point, ladder_model, lambda_model
from .exact import master_equation_evolve, mcwf_ensemble
from .geometry import Detector, square_lattice
from .interactions import coupling_matrices
from .records import _fmt

KINDS = ("criteria-sweep", "point-model", "cumulant", "exact-benchmark",
         "scaling", "preset")
PRESET_NAMES = ("fig2", "fig3", "fig5", "fig6", "fig7", "fig9", "fig10",
                "fig11")
_DEFAULT_SEED = 1234


class ConfigError(Exception):
    """Malformed or inconsistent experiment configuration."""


# ---------------------------------------------------------------------------
# configuration model


@dataclass(frozen=True)
class AtomsConfig:
    species: str
    initial_state: str = "two_level"
    rate: float = 1.0e6          # ideal species only
    wavelength_nm: float = 1000.0

    def scheme(self):
        if self.species == "ideal":
            return two_level_scheme(self.rate, self.wavelength_nm)
        return build_level_scheme(self.species, self.initial_state)


@dataclass(frozen=True)
class ArrayConfig:
    n_x: int
    n_y: int
    spacing_nm: float

    def geometry(self):
        return square_lattice(self.n_x, self.n_y, self.spacing_nm)


@dataclass(frozen=True)
class DetectorConfig:
    theta_deg: float
    phi_deg: float = 0.0

    def detector(self) -> Detector:
        return Detector(math.radians(self.theta_deg),
                        math.radians(self.phi_deg))


@dataclass(frozen=True)
class IntegrationConfig:
    t_max_gamma0: float = 10.0
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    samples: int = 400


@dataclass(frozen=True)
class SweepConfig:
    min_nm: float
    max_nm: float
    step_nm: float = 10.0


@dataclass(frozen=True)
class PointConfig:
    model: str
    rates: tuple[float, ...]
    n_atoms: int = 0
    sizes: tuple[int, ...] = ()
    fit_n_min: int = 20


@dataclass(frozen=True)
class TrajectoriesConfig:
    count: int
    seed: int = _DEFAULT_SEED


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    atoms: AtomsConfig | None = None
    array: ArrayConfig | None = None
    detector: DetectorConfig | None = None
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    sweep: SweepConfig | None = None
    point: PointConfig | None = None
    trajectories: TrajectoriesConfig | None = None
    output: str = "."
    channel: str = "f"
    criterion: str = "directional"
    solver: str = "master-equation"
    preset_name: str = ""


_REQUIRED = {
    "criteria-sweep": ("atoms", "array", "sweep"),
    "point-model": ("point",),
    "scaling": ("point",),
    "cumulant": ("atoms", "array"),
    "exact-benchmark": ("atoms", "array"),
    "preset": (),
}


def _coerce(section, key, raw, target):
    try:
        if target is int:
            return int(raw)
        if target is float:
            return float(raw)
        if target is tuple:
            parts = [p for p in raw.replace(",", " ").split() if p]
            return tuple(float(p) if "." in p or "e" in p.lower() else int(p)
                         for p in parts)
        return raw
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def _section(parser, name, cls, casts):
    if not parser.has_section(name):
        return None
    got = {}
    valid = {f.name for f in fields(cls)}
    for key, raw in parser.items(name):
        if key not in valid:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        got[key] = _coerce(name, key, raw, casts.get(key, str))
    try:
        return cls(**got)
    except TypeError as exc:
        raise ConfigError(f"[{name}]: {exc}") from None


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(
        comment_prefixes=("#",), inline_comment_prefixes=("#",),
        interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    if not parser.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    exp = dict(parser.items("experiment"))
    kind = exp.pop("kind", None)
    if kind not in KINDS:
        raise ConfigError(f"[experiment] kind must be one of {KINDS}, "
                          f"got {kind!r}")
    extras = {}
    for key in ("channel", "criterion", "solver", "preset_name"):
        if key in exp:
            extras[key] = exp.pop(key)
    if exp:
        raise ConfigError(f"[experiment] unknown keys: {sorted(exp)}")

    atoms = _section(parser, "atoms", AtomsConfig,
                     {"rate": float, "wavelength_nm": float})
    array = _section(parser, "array", ArrayConfig,
                     {"n_x": int, "n_y": int, "spacing_nm": float})
    detector = _section(parser, "detector", DetectorConfig,
                        {"theta_deg": float, "phi_deg": float})
    integration = _section(
        parser, "integration", IntegrationConfig,
        {"t_max_gamma0": float, "rel_tol": float, "abs_tol": float,
         "samples": int}) or IntegrationConfig()
    sweep = _section(parser, "sweep", SweepConfig,
                     {"min_nm": float, "max_nm": float, "step_nm": float})
    point = _section(parser, "point", PointConfig,
                     {"rates": tuple, "n_atoms": int, "sizes": tuple,
                      "fit_n_min": int})
    traj = _section(parser, "trajectories", TrajectoriesConfig,
                    {"count": int, "seed": int})
    output = parser.get("output", "directory", fallback=".")

    cfg = ExperimentConfig(kind=kind, atoms=atoms, array=array,
                           detector=detector, integration=integration,
                           sweep=sweep, point=point, trajectories=traj,
                           output=output, **extras)
    _validate(cfg)
    return cfg


def _validate(cfg):
    for name in _REQUIRED[cfg.kind]:
        if getattr(cfg, name) is None:
            raise ConfigError(f"kind {cfg.kind!r} requires a [{name}] section")
    if cfg.atoms is not None:
        if cfg.atoms.species not in SPECIES + ("ideal",):
            raise ConfigError(f"[atoms] unknown species {cfg.atoms.species!r}")
        if cfg.atoms.species != "ideal" \
                and cfg.atoms.initial_state not in INITIAL_STATES:
            raise ConfigError(
                f"[atoms] unknown initial_state {cfg.atoms.initial_state!r}")
    if cfg.array is not None and (cfg.array.n_x < 1 or cfg.array.n_y < 1
                                  or cfg.array.spacing_nm <= 0):
        raise ConfigError("[array] needs positive n_x, n_y, spacing_nm")
    if cfg.integration.t_max_gamma0 <= 0 or cfg.integration.samples < 2:
        raise ConfigError("[integration] needs t_max_gamma0 > 0, samples >= 2")
    if cfg.sweep is not None and not (0 < cfg.sweep.min_nm < cfg.sweep.max_nm
                                      and cfg.sweep.step_nm > 0):
        raise ConfigError("[sweep] needs 0 < min_nm < max_nm and step_nm > 0")
    if cfg.point is not None:
        if cfg.point.model not in ("two_level", "lambda", "ladder"):
            raise ConfigError(f"[point] unknown model {cfg.point.model!r}")
        if any(r <= 0 for r in cfg.point.rates):
            raise ConfigError("[point] rates must be positive")
        if cfg.kind == "point-model" and cfg.point.n_atoms < 1:
            raise ConfigError("[point] point-model needs n_atoms >= 1")
        if cfg.kind == "scaling" and len(cfg.point.sizes) < 3:
            raise ConfigError("[point] scaling needs at least 3 sizes")
    if cfg.kind == "exact-benchmark":
        if cfg.solver not in ("master-equation", "mcwf"):
            raise ConfigError(f"[experiment] unknown solver {cfg.solver!r}")
        if cfg.solver == "mcwf" and cfg.trajectories is None:
            raise ConfigError("mcwf runs need a [trajectories] section")
    if cfg.criterion not in ("directional", "variance"):
        raise ConfigError(f"[experiment] unknown criterion {cfg.criterion!r}")
    if cfg.kind == "criteria-sweep" and cfg.criterion == "directional" \
            and cfg.detector is None:
        raise ConfigError("directional sweeps need a [detector] section")
    if cfg.kind == "preset" and cfg.preset_name not in PRESET_NAMES:
        raise ConfigError(f"[experiment] preset_name must be one of "
                          f"{PRESET_NAMES}")


def serialize_config(cfg: ExperimentConfig) -> str:
    """INI text that parses back to a field-identical config."""
    out = ["[experiment]", f"kind = {cfg.kind}"]
    for key in ("channel", "criterion", "solver", "preset_name"):
        val = getattr(cfg, key)
        if val != ExperimentConfig.__dataclass_fields__[key].default:
            out.append(f"{key} = {val}")
    for name in ("atoms", "array", "detector", "integration", "sweep",
                 "point", "trajectories"):
        sub = getattr(cfg, name)
        if sub is None:
            continue
        out.append("")
        out.append(f"[{name}]")
        for f in fields(sub):
            val = getattr(sub, f.name)
            if isinstance(val, tuple):
                val = ", ".join(_fmt(v) if isinstance(v, float) else str(v)
                                for v in val)
            elif isinstance(val, float):
                val = _fmt(val)
            out.append(f"{f.name} = {val}")
    out += ["", "[output]", f"directory = {cfg.output}", ""]
    return "\n".join(out)


# ---------------------------------------------------------------------------
# individual runs


def _write_table(path: Path, header: list[str], columns: list[np.ndarray]):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(_fmt(v) if isinstance(v, float)
                              or isinstance(v, np.floating) else str(v)
                              for v in row) + "\n")


def _peak_summary(record, channels):
    peaks = {}
    for ch in channels:
        t_pk, r_pk, burst = find_peak(record, ch)
        peaks[ch] = {"t_peak": t_pk, "R_peak": r_pk, "burst": burst}
    return peaks


def _run_criteria_sweep(cfg, out_dir, stem):
    scheme = cfg.atoms.scheme()
    det = cfg.detector.detector() if cfg.detector is not None else None
    curve = criterion_sweep(
        scheme, (cfg.array.n_x, cfg.array.n_y), cfg.sweep.min_nm,
        cfg.sweep.max_nm, cfg.channel,
        detector=det if cfg.criterion == "directional" else None,
        step=cfg.sweep.step_nm)
    burst = curve.values > curve.threshold
    csv_name = f"{stem}.csv"
    _write_table(out_dir / csv_name,
                 ["d_nm", "criterion", "threshold", "burst"],
                 [curve.distances, curve.values,
                  np.full_like(curve.values, curve.threshold),
                  burst.astype(int)])
    summary = {
        "criterion": cfg.criterion,
        "channel": cfg.channel,
        "boundaries_nm": [float(x) for x in curve.crossings()],
        "islands_nm": [[float(a), float(b)]
                       for a, b in curve.burst_intervals()],
        "burst_fraction": float(burst.mean()),
    }
    return summary, {"csv": csv_name}


def _point_spec(point: PointConfig, n: int):
    if point.model == "lambda":
        return lambda_model(n, *point.rates)
    if point.model == "ladder":
        return ladder_model(n, *point.rates)
    raise ConfigError(f"unsupported point model {point.model!r}")


def _lambda_shares(record):
    """Photon shares from absorbing ground populations (exact counts)."""
    pops = record.populations
    emitted = {"eg": pops["g"][-1], "eh": pops["h"][-1]}
    total = emitted["eg"] + emitted["eh"]
    return {k: float(v / total) for k, v in emitted.items()}


def _run_point(cfg, out_dir, stem):
    spec = _point_spec(cfg.point, cfg.point.n_atoms)
    t_grid = np.linspace(0.0, cfg.integration.t_max_gamma0,
                         cfg.integration.samples)
    record = evolve_point(spec, t_grid)
    csv_name = f"{stem}.csv"
    record.write_csv(out_dir / csv_name)
    summary = {
        "model": cfg.point.model,
        "n_atoms": cfg.point.n_atoms,
        "peaks": _peak_summary(record, ("total",) + record.channels),
        "photon_shares": photon_shares(record),
    }
    if cfg.point.model == "lambda":
        summary["emitted_shares"] = _lambda_shares(record)
    return summary, {"csv": csv_name}


def _scaling_grid(t_max, samples):
    """Dense early window for peak detection, coarse tail for totals."""
    split = min(2.0, 0.5 * t_max)
    dense = np.linspace(0.0, split, max(2, (4 * samples) // 5))
    tail = np.linspace(split, t_max, max(2, samples - dense.size + 1))
    return np.concatenate([dense, tail[1:]])


def _run_scaling(cfg, out_dir, stem):
    point = cfg.point
    t_grid = _scaling_grid(cfg.integration.t_max_gamma0,
                           cfg.integration.samples)
    spec0 = _point_spec(point, point.sizes[0])
    channels = spec0.channel_names
    rows = {"n_atoms": []}
    for ch in channels:
        rows[f"R_peak_{ch}"] = []
        rows[f"t_peak_{ch}"] = []
    if point.model == "lambda":
        for ch in channels:
            rows[f"share_{ch}"] = []
    for n in point.sizes:
        record = evolve_point(_point_spec(point, n), t_grid)
        rows["n_atoms"].append(n)
        for ch in channels:
            t_pk, r_pk, _ = find_peak(record, ch)
            rows[f"R_peak_{ch}"].append(r_pk)
            rows[f"t_peak_{ch}"].append(t_pk)
        if point.model == "lambda":
            for ch, share in _lambda_shares(record).items():
                rows[f"share_{ch}"].append(share)
    csv_name = f"{stem}.csv"
    header = list(rows)
    _write_table(out_dir / csv_name, header,
                 [np.asarray(rows[h]) for h in header])

    sizes = rows["n_atoms"]
    summary = {"model": point.model, "rates": list(point.rates),
               "fit_n_min": point.fit_n_min, "fits": {}}
    for ch in channels:
        fit = fit_power_law(zip(sizes, rows[f"R_peak_{ch}"]),
                            n_min=point.fit_n_min)
        summary["fits"][ch] = {"exponent": fit.exponent,
                               "prefactor": fit.prefactor,
                               "residual": fit.residual}
    if point.model == "lambda":
        bright = max(channels, key=lambda ch: rows[f"share_{ch}"][-1])
        fit = fit_share(zip(sizes, rows[f"share_{bright}"]),
                        n_min=point.fit_n_min)
        summary["share_fit"] = {"channel": bright, "A": fit.prefactor,
                                "B": fit.exponent, "residual": fit.residual}
    return summary, {"csv": csv_name}


def _coupling_set(cfg):
    return coupling_matrices(cfg.array.geometry(), cfg.atoms.scheme())


def _run_cumulant(cfg, out_dir, stem):
    cs = _coupling_set(cfg)
    det = cfg.detector.detector() if cfg.detector is not None else None
    record = evolve_cumulant(
        cs, cfg.integration.t_max_gamma0, rtol=cfg.integration.rel_tol,
        atol=cfg.integration.abs_tol, n_samples=cfg.integration.samples,
        detector=det)
    csv_name = f"{stem}.csv"
    record.write_csv(out_dir / csv_name)
    channels = ("total",) + record.channels
    if det is not None:
        channels += tuple(f"dir_{ch}" for ch in record.directional)
    summary = {
        "n_atoms": cs.n_atoms,
        "spacing_nm": cfg.array.spacing_nm,
        "peaks": _peak_summary(record, channels),
        "photon_shares": photon_shares(record),
        "final_populations": {k: float(v[-1])
                              for k, v in record.populations.items()},
        "positivity_violation_max": record.meta["positivity_violation_max"],
    }
    return summary, {"csv": csv_name}


def _run_exact(cfg, out_dir, stem):
    cs = _coupling_set(cfg)
    det = cfg.detector.detector() if cfg.detector is not None else None
    integ = cfg.integration
    if cfg.solver == "master-equation":
        record = master_equation_evolve(
            cs, integ.t_max_gamma0, rtol=integ.rel_tol, atol=integ.abs_tol,
            n_samples=integ.samples, detector=det)
    else:
        record = mcwf_ensemble(
            cs, integ.t_max_gamma0, cfg.trajectories.count,
            cfg.trajectories.seed, rtol=integ.rel_tol, atol=integ.abs_tol,
            n_samples=integ.samples, detector=det)
    csv_name = f"{stem}.csv"
    record.write_csv(out_dir / csv_name)
    summary = {
        "solver": cfg.solver,
        "n_atoms": cs.n_atoms,
        "spacing_nm": cfg.array.spacing_nm,
        "peaks": _peak_summary(record, ("total",)),
    }
    for key in ("trace_error_max", "restarts", "n_trajectories", "seed"):
        if key in record.meta:
            summary[key] = record.meta[key]
    return summary, {"csv": csv_name}


_RUNNERS = {
    "criteria-sweep": _run_criteria_sweep,
    "point-model": _run_point,
    "scaling": _run_scaling,
    "cumulant": _run_cumulant,
    "exact-benchmark": _run_exact,
}


def execute_config(cfg: ExperimentConfig, out_dir: Path, stem: str):
    out_dir.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[cfg.kind](cfg, out_dir, stem)


def _pool_worker(args):
    label, cfg_text, out_dir = args
    cfg = parse_config(cfg_text)
    summary, files = execute_config(cfg, Path(out_dir), label)
    return label, summary, files


# ---------------------------------------------------------------------------
# presets


def _pi_wavelength(species, initial_state):
    scheme = build_level_scheme(species, initial_state)
    return scheme.channel("f").wavelength


def _integration(t_max, samples, rel=1e-6, abs_=1e-9):
    return IntegrationConfig(t_max_gamma0=t_max, rel_tol=rel, abs_tol=abs_,
                             samples=samples)


def _preset_fig2(seed, quick):
    ratios = {"2to1": (2.0 / 3.0, 1.0 / 3.0),
              "1p5to1": (0.6, 0.4),
              "1to1": (0.5, 0.5)}
    sizes = tuple(range(4, 101, 4))
    runs = []
    for tag, rates in ratios.items():
        runs.append((f"scaling_{tag}", ExperimentConfig(
            kind="scaling",
            point=PointConfig("lambda", rates, sizes=sizes, fit_n_min=20),
            integration=_integration(40.0, 2400, rel=1e-8, abs_=1e-12))))
        runs.append((f"dynamics_{tag}", ExperimentConfig(
            kind="point-model",
            point=PointConfig("lambda", rates, n_atoms=40),
            integration=_integration(1.5, 1501, rel=1e-8, abs_=1e-12))))

    targets = {"2to1": (2.01, 1.56), "1p5to1": (2.00, 1.72),
               "1to1": (1.92, 1.92)}
    share_targets = {"2to1": (0.541, 0.31), "1p5to1": (0.513, 0.16)}

    def checks(results):
        out = []
        for tag, (bright, weak) in targets.items():
            fits = results[f"scaling_{tag}"]["fits"]
            got_b, got_w = fits["eg"]["exponent"], fits["eh"]["exponent"]
            out.append((f"{tag} bright exponent",
                        abs(got_b - bright) <= 0.05, f"{got_b:.3f}"))
            out.append((f"{tag} weak exponent",
                        abs(got_w - weak) <= 0.05, f"{got_w:.3f}"))
        for tag, (a_ref, b_ref) in share_targets.items():
            fit = results[f"scaling_{tag}"]["share_fit"]
            out.append((f"{tag} share A",
                        abs(fit["A"] - a_ref) <= 0.15 * a_ref,
                        f"{fit['A']:.3f}"))
            out.append((f"{tag} share B",
                        abs(fit["B"] - b_ref) <= 0.15 * b_ref,
                        f"{fit['B']:.3f}"))
        return out

    return runs, checks


def _preset_fig3(seed, quick):
    ratios = {"2to1": (1.0, 0.5), "1to1": (1.0, 1.0), "1to2": (1.0, 2.0)}
    sizes = tuple(range(4, 101, 4))
    runs = []
    for tag, rates in ratios.items():
        runs.append((f"scaling_{tag}", ExperimentConfig(
            kind="scaling",
            point=PointConfig("ladder", rates, sizes=sizes, fit_n_min=20),
            integration=_integration(20.0, 2400, rel=1e-8, abs_=1e-12))))
        runs.append((f"dynamics_{tag}", ExperimentConfig(
            kind="point-model",
            point=PointConfig("ladder", rates, n_atoms=40),
            integration=_integration(8.0, 3201, rel=1e-8, abs_=1e-12))))

    def checks(results):
        out = []
        for tag in ratios:
            exp = results[f"scaling_{tag}"]["fits"]["ef"]["exponent"]
            out.append((f"{tag} first-burst exponent",
                        abs(exp - 2.00) <= 0.05, f"{exp:.3f}"))
            peaks = results[f"dynamics_{tag}"]["peaks"]
            two = peaks["ef"]["burst"] and peaks["fg"]["burst"] \
                and peaks["fg"]["t_peak"] > peaks["ef"]["t_peak"]
            out.append((f"{tag} two bursts at N=40", two,
                        f"ef {peaks['ef']['t_peak']:.2f}, "
                        f"fg {peaks['fg']['t_peak']:.2f}"))
        return out

    return runs, checks


_FIG5_TARGETS = {  # boundary nm, island members nm
    "Yb174": (600.0, (700.0, 1400.0)),
    "Sr88": (1000.0, (1300.0, 2600.0)),
}


def _preset_fig5(seed, quick):
    side = 6 if quick else 12
    runs = []
    for species in SPECIES:
        lam = _pi_wavelength(species, "D1_m0")
        runs.append((f"sweep_{species}", ExperimentConfig(
            kind="criteria-sweep",
            atoms=AtomsConfig(species, "D1_m0"),
            array=ArrayConfig(12, 12, 100.0),
            detector=DetectorConfig(90.0, 0.0),
            sweep=SweepConfig(50.0, 3000.0, 5.0))))
        for frac in (0.5, 0.75, 1.0):
            runs.append((f"dynamics_{species}_{frac:g}", ExperimentConfig(
                kind="cumulant",
                atoms=AtomsConfig(species, "D1_m0"),
                array=ArrayConfig(side, side, frac * lam),
                detector=DetectorConfig(90.0, 0.0),
                integration=_integration(5.0, 1200))))

    def checks(results):
        out = []
        for species, (edge, members) in _FIG5_TARGETS.items():
            summ = results[f"sweep_{species}"]
            bounds = summ["boundaries_nm"]
            ok = bounds and abs(bounds[0] - edge) <= 20.0
            out.append((f"{species} first boundary",
                        bool(ok), f"{bounds[:1]}"))
            for d in members:
                hit = any(lo <= d <= hi for lo, hi in summ["islands_nm"])
                out.append((f"{species} island at {d:.0f} nm", hit,
                            f"{summ['islands_nm']}"))
        return out

    return runs, checks


def _preset_fig6(seed, quick):
    cases = {"Sr88": "D3_m0", "Yb174": "D1_m0"}
    sides = range(2, 6) if quick else range(2, 13)
    fit_n_min = 4 if quick else 25
    runs = []
    for species, state in cases.items():
        lam = _pi_wavelength(species, state)
        for side in sides:
            runs.append((f"{species}_side{side}", ExperimentConfig(
                kind="cumulant",
                atoms=AtomsConfig(species, state),
                array=ArrayConfig(side, side, 0.2 * lam),
                integration=_integration(10.0, max(400, 60 * side * side
                                                   // 10)))))

    targets = {"Sr88": (0.481, 0.091), "Yb174": (0.400, 0.093)}

    def checks(results):
        out = []
        for species in cases:
            pairs = []
            for side in sides:
                summ = results[f"{species}_side{side}"]
                pairs.append((side * side, summ["photon_shares"]["f"]))
            fit = fit_share(pairs, n_min=fit_n_min)
            a_ref, b_ref = targets[species]
            out.append((f"{species} share A",
                        abs(fit.prefactor - a_ref) <= 0.15 * a_ref or quick,
                        f"{fit.prefactor:.3f}"))
            out.append((f"{species} share B",
                        abs(fit.exponent - b_ref) <= 0.15 * b_ref or quick,
                        f"{fit.exponent:.3f}"))
            if not quick:
                big = results[f"{species}_side12"]["photon_shares"]["f"]
                floor = 0.68 if species == "Sr88" else 0.60
                out.append((f"{species} 12x12 dominant share >= {floor}",
                            big >= floor, f"{big:.3f}"))
        return out

    return runs, checks


_FIG7_TARGETS = {("Yb174", "D3_m3"): 1.38, ("Sr88", "D3_m3"): 1.47,
                 ("Yb174", "D3_m0"): 1.29, ("Sr88", "D3_m0"): 1.37}


def _preset_fig7(seed, quick):
    sides = range(5, 8) if quick else range(5, 13)
    runs = []
    for (species, state) in _FIG7_TARGETS:
        for side in sides:
            runs.append((f"{species}_{state}_side{side}", ExperimentConfig(
                kind="cumulant",
                atoms=AtomsConfig(species, state),
                array=ArrayConfig(side, side, 244.0),
                integration=_integration(5.0, max(600, 12 * side * side)))))

    def checks(results):
        out = []
        for (species, state), target in _FIG7_TARGETS.items():
            pairs = []
            for side in sides:
                summ = results[f"{species}_{state}_side{side}"]
                pairs.append((side * side,
                              summ["peaks"]["total"]["R_peak"]))
            fit = fit_power_law(pairs, n_min=25)
            out.append((f"{species} {state} exponent",
                        abs(fit.exponent - target) <= 0.08 or quick,
                        f"{fit.exponent:.3f}"))
        return out

    return runs, checks


def _preset_fig9(seed, quick):
    spacings = {"0.1": 100.0, "0.2": 200.0}
    runs = []
    for tag, d_nm in spacings.items():
        for side, solver in ((3, "master-equation"),) \
                + (() if quick else ((4, "mcwf"),)):
            label = f"exact_{side}x{side}_d{tag}"
            runs.append((label, ExperimentConfig(
                kind="exact-benchmark",
                atoms=AtomsConfig("ideal"),
                array=ArrayConfig(side, side, d_nm),
                integration=_integration(
                    5.0, 501,
                    rel=1e-8 if solver == "master-equation" else 1e-6,
                    abs_=1e-12 if solver == "master-equation" else 1e-9),
                trajectories=TrajectoriesConfig(2000, seed),
                solver=solver)))
            runs.append((f"cumulant_{side}x{side}_d{tag}", ExperimentConfig(
                kind="cumulant",
                atoms=AtomsConfig("ideal"),
                array=ArrayConfig(side, side, d_nm),
                integration=_integration(5.0, 501, rel=1e-8, abs_=1e-10))))

    def checks(results):
        out = []
        for tag, bounds in (("0.1", (0.07, 0.11)), ("0.2", (None, 0.03))):
            exact = results[f"exact_3x3_d{tag}"]["peaks"]["total"]["R_peak"]
            approx = results[f"cumulant_3x3_d{tag}"]["peaks"]["total"]["R_peak"]
            over = approx / exact - 1.0
            lo, hi = bounds
            ok = over <= hi and (lo is None or over >= lo)
            out.append((f"3x3 d={tag} overestimate", ok, f"{over:+.3%}"))
        return out

    return runs, checks


def _preset_fig10(seed, quick):
    lam = _pi_wavelength("Yb174", "D3_m3")
    side = 8 if quick else 12
    runs = []
    for frac in (0.1, 0.15, 0.2, 0.3, 0.4, 0.5):
        runs.append((f"d{frac:g}", ExperimentConfig(
            kind="cumulant",
            atoms=AtomsConfig("Yb174", "D3_m3"),
            array=ArrayConfig(side, side, frac * lam),
            integration=_integration(5.0, 2000))))

    def checks(results):
        out = []
        for label, summ in results.items():
            peak = summ["peaks"]["total"]
            out.append((f"{label} finite peak",
                        np.isfinite(peak["R_peak"]) and peak["R_peak"] > 0,
                        f"{peak['R_peak']:.2f}"))
        return out

    return runs, checks


def _preset_fig11(seed, quick):
    placements = {
        "along_x": (90.0, 0.0),
        "phi45": (90.0, 45.0),
        "theta45": (45.0, 0.0),
    }
    runs = []
    for tag, (theta, phi) in placements.items():
        runs.append((f"sweep_{tag}", ExperimentConfig(
            kind="criteria-sweep",
            atoms=AtomsConfig("Yb174", "D1_m0"),
            array=ArrayConfig(12, 12, 100.0),
            detector=DetectorConfig(theta, phi),
            sweep=SweepConfig(50.0, 3000.0, 5.0))))
    runs.append(("sweep_all_light", ExperimentConfig(
        kind="criteria-sweep",
        atoms=AtomsConfig("Yb174", "D1_m0"),
        array=ArrayConfig(12, 12, 100.0),
        sweep=SweepConfig(50.0, 3000.0, 5.0),
        criterion="variance")))

    def checks(results):
        out = []
        for label, summ in results.items():
            out.append((f"{label} computed", "burst_fraction" in summ,
                        f"{summ.get('burst_fraction')}"))
        return out

    return runs, checks


_PRESETS = {
    "fig2": _preset_fig2, "fig3": _preset_fig3, "fig5": _preset_fig5,
    "fig6": _preset_fig6, "fig7": _preset_fig7, "fig9": _preset_fig9,
    "fig10": _preset_fig10, "fig11": _preset_fig11,
}


def build_preset(name: str, seed: int = _DEFAULT_SEED, quick: bool = False):
    """The (label, config) runs and the check function for one preset."""
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of "
                          f"{PRESET_NAMES}")
    return _PRESETS[name](seed, quick)


# ---------------------------------------------------------------------------
# orchestration


def _resolve_out(explicit, default_name):
    if explicit:
        return Path(explicit)
    root = os.environ.get("SUPERBURST_OUT")
    if root:
        return Path(root) / default_name
    return Path(default_name)


def _execute_bundle(runs, out_dir, threads):
    """Run every config, in order; returns results and failures."""
    out_dir.mkdir(parents=True, exist_ok=True)
    results, files, failures = {}, {}, {}
    jobs = [(label, serialize_config(cfg), str(out_dir))
            for label, cfg in runs]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = {label: pool.submit(_pool_worker, job)
                       for (label, *_), job in zip(runs, jobs)}
            for label, fut in futures.items():
                try:
                    _, summary, run_files = fut.result()
                    results[label] = summary
                    files[label] = run_files
                except Exception as exc:  # noqa: BLE001
                    failures[label] = f"{type(exc).__name__}: {exc}"
    else:
        for job in jobs:
            label = job[0]
            try:
                _, summary, run_files = _pool_worker(job)
                results[label] = summary
                files[label] = run_files
            except Exception as exc:  # noqa: BLE001
                failures[label] = f"{type(exc).__name__}: {exc}"
    return results, files, failures


def _write_bundle(out_dir, name, runs, results, files, failures, seed,
                  quick, started, summary_extra=None):
    cfg_dir = out_dir / "configs"
    cfg_dir.mkdir(exist_ok=True)
    digest = hashlib.sha256()
    run_entries = []
    for label, cfg in runs:
        text = serialize_config(cfg)
        digest.update(f"{label}\n{text}".encode())
        (cfg_dir / f"{label}.ini").write_text(text, encoding="utf-8")
        entry = {"label": label, "kind": cfg.kind,
                 "config": f"configs/{label}.ini"}
        if label in files:
            entry.update(files[label])
            entry["summary"] = results[label]
        if label in failures:
            entry["error"] = failures[label]
        run_entries.append(entry)
    summary = {"runs": {label: results[label] for label in results}}
    if summary_extra:
        summary.update(summary_extra)
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True, default=_json_safe),
        encoding="utf-8")
    manifest = {
        "name": name,
        "version": __version__,
        "config_hash": digest.hexdigest(),
        "seed": seed,
        "quick": quick,
        "walltime_s": time.monotonic() - started,
        "partial_output": bool(failures),
        "runs": run_entries,
        "summary": "summary.json",
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, default=_json_safe),
        encoding="utf-8")
    return manifest


def _json_safe(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def run_preset(name, out=None, threads=1, seed=_DEFAULT_SEED, quick=False,
               check=False):
    started = time.monotonic()
    runs, check_fn = build_preset(name, seed=seed, quick=quick)
    out_dir = _resolve_out(out, name)
    results, files, failures = _execute_bundle(runs, out_dir, threads)
    summary_extra = {}
    checks = []
    if not failures:
        try:
            checks = check_fn(results)
        except Exception as exc:  # noqa: BLE001
            checks = [("check evaluation", False,
                       f"{type(exc).__name__}: {exc}")]
        summary_extra["checks"] = [
            {"name": nm, "passed": bool(ok), "detail": detail}
            for nm, ok, detail in checks]
    _write_bundle(out_dir, name, runs, results, files, failures, seed, quick,
                  started, summary_extra)
    if failures:
        for label, msg in failures.items():
            print(f"run {label} failed: {msg}", file=sys.stderr)
        return 3
    if check and not all(ok for _, ok, _ in checks):
        for nm, ok, detail in checks:
            status = "ok" if ok else "FAIL"
            print(f"check {status}: {nm} ({detail})", file=sys.stderr)
        return 4
    print(f"{name}: {len(runs)} runs -> {out_dir}")
    return 0


def run_config_file(path):
    started = time.monotonic()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = parse_config(text)
    if cfg.kind == "preset":
        return run_preset(cfg.preset_name,
                          out=None if cfg.output == "." else cfg.output)
    out_root = os.environ.get("SUPERBURST_OUT")
    out_dir = Path(cfg.output)
    if out_root and not out_dir.is_absolute():
        out_dir = Path(out_root) / out_dir
    stem = Path(path).stem
    runs = [(stem, cfg)]
    results, files, failures = _execute_bundle(runs, out_dir, 1)
    _write_bundle(out_dir, stem, runs, results, files, failures,
                  seed=cfg.trajectories.seed if cfg.trajectories else 0,
                  quick=False, started=started)
    if failures:
        for label, msg in failures.items():
            print(f"run {label} failed: {msg}", file=sys.stderr)
        return 3
    print(f"{stem}: outputs in {out_dir}")
    return 0


def inspect_manifest(path):
    try:
        manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from None
    print(f"bundle:   {manifest.get('name')}")
    print(f"version:  {manifest.get('version')}")
    print(f"hash:     {manifest.get('config_hash')}")
    print(f"walltime: {manifest.get('walltime_s', 0.0):.1f} s")
    print(f"partial:  {manifest.get('partial_output')}")
    for entry in manifest.get("runs", []):
        status = "error" if "error" in entry else "ok"
        print(f"  [{status}] {entry['label']} ({entry['kind']}) "
              f"-> {entry.get('csv', '-')}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="superburst",
        description="collective-emission experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute one experiment config")
    p_run.add_argument("config")
    p_pre = sub.add_parser("preset", help="execute a figure preset bundle")
    p_pre.add_argument("name", choices=PRESET_NAMES)
    p_pre.add_argument("--out", default=None)
    p_pre.add_argument("--threads", type=int, default=1)
    p_pre.add_argument("--seed", type=int, default=_DEFAULT_SEED)
    p_pre.add_argument("--quick", action="store_true",
                       help="smaller arrays / fewer trajectories, same schema")
    p_pre.add_argument("--check", action="store_true",
                       help="exit 4 unless the preset's targets are met")
    p_ins = sub.add_parser("inspect", help="describe a manifest")
    p_ins.add_argument("manifest")
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return run_config_file(args.config)
        if args.command == "preset":
            return run_preset(args.name, out=args.out, threads=args.threads,
                              seed=args.seed, quick=args.quick,
                              check=args.check)
        return inspect_manifest(args.manifest)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
