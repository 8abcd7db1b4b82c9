"""Preset figure builders.

Each builder takes (manifest, bundle_root) and returns a matplotlib Figure;
nothing touches the output path until the whole figure exists, so a broken
bundle never leaves a partial image behind.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import BundleError, load_manifest, load_table, run_entry, summary_value

_COLORS = ("C0", "C1", "C2", "C3")


def _mask_intervals(x, mask):
    """Contiguous True stretches of mask as (x_lo, x_hi) pairs."""
    out = []
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = x[i]
        elif not flag and start is not None:
            out.append((start, x[i - 1]))
            start = None
    if start is not None:
        out.append((start, x[-1]))
    return out


def _loglog_guide(ax, n, peaks, color, label):
    """Scatter peaks against N and draw the least-squares power law."""
    slope, intercept = np.polyfit(np.log(n), np.log(peaks), 1)
    ax.plot(n, peaks, "o", ms=3.5, color=color)
    ax.plot(n, np.exp(intercept) * n ** slope, "-", lw=1.0, color=color,
            label=f"{label}: $N^{{{slope:.2f}}}$")
    return slope


# --- branching point model: dynamics and peak scaling ----------------------

def _render_fig2(manifest, root):
    ratios = ("2to1", "1p5to1", "1to1")
    fig, (ax_dyn, ax_peak) = plt.subplots(1, 2, figsize=(9.2, 3.8))
    for tag, color in zip(ratios, _COLORS):
        dyn = load_table(run_entry(manifest, f"dynamics_{tag}"), root)
        t = dyn.col("t_gamma0")
        ax_dyn.plot(t, dyn.col("R_eg"), color=color, label=f"{tag} bright")
        ax_dyn.plot(t, dyn.col("R_eh"), color=color, ls="--", lw=1.0)

        entry = run_entry(manifest, f"scaling_{tag}")
        tab = load_table(entry, root)
        n = tab.col("n_atoms")
        for ch, marker in (("eg", "o"), ("eh", "s")):
            exponent = summary_value(entry, "fits", ch, "exponent")
            prefactor = summary_value(entry, "fits", ch, "prefactor")
            ax_peak.plot(n, tab.col(f"R_peak_{ch}"), marker, ms=3,
                         color=color, ls="")
            ax_peak.plot(n, prefactor * n ** exponent, "-" if ch == "eg" else "--",
                         lw=1.0, color=color,
                         label=f"{tag} {ch}: $N^{{{exponent:.2f}}}$")
    ax_dyn.set_xlabel(r"$t\,\Gamma_0$")
    ax_dyn.set_ylabel(r"$R_\mu / \Gamma_0$")
    ax_dyn.set_title("branching dynamics, N = 40")
    ax_dyn.legend(fontsize=7, frameon=False)
    ax_peak.set_xscale("log")
    ax_peak.set_yscale("log")
    ax_peak.set_xlabel("N")
    ax_peak.set_ylabel(r"$R_\mu^{peak} / \Gamma_0$")
    ax_peak.set_title("peak scaling per channel")
    ax_peak.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    return fig


# --- burst boundary versus lattice constant, with dynamics cuts ------------

def _render_fig5(manifest, root):
    species_rows = ("Yb174", "Sr88")
    fig, axes = plt.subplots(2, 2, figsize=(9.2, 6.6))
    for row, species in enumerate(species_rows):
        ax = axes[row, 0]
        tab = load_table(run_entry(manifest, f"sweep_{species}"), root)
        d_um = tab.col("d_nm") / 1000.0
        ax.plot(d_um, tab.col("criterion"), color="C0", lw=1.2)
        ax.plot(d_um, tab.col("threshold"), color="k", lw=0.8, ls=":")
        for lo, hi in _mask_intervals(d_um, tab.col("burst") > 0.5):
            ax.axvspan(lo, hi, color="C0", alpha=0.15, lw=0)
        ax.set_xlabel(r"lattice constant ($\mu$m)")
        ax.set_ylabel("burst criterion")
        ax.set_title(f"{species}, shaded where a burst is predicted")

        ax_dyn = axes[row, 1]
        prefix = f"dynamics_{species}_"
        cuts = [e for e in manifest["runs"] if e["label"].startswith(prefix)]
        if not cuts:
            raise BundleError(f"manifest has no '{prefix}*' dynamics runs")
        for entry, color in zip(cuts, _COLORS):
            if "error" in entry:
                raise BundleError(f"run '{entry['label']}' failed upstream: "
                                  f"{entry['error']}")
            dyn = load_table(entry, root)
            channel = "R_dir_f" if "R_dir_f" in dyn else "R_total"
            ax_dyn.plot(dyn.col("t_gamma0"), dyn.col(channel), color=color,
                        lw=1.1, label=entry["label"][len(prefix):])
        ax_dyn.set_xlabel(r"$t\,\Gamma_0$")
        ax_dyn.set_ylabel(r"$R / \Gamma_0$")
        ax_dyn.set_title("emission at selected spacings ($\\times\\lambda_0$)")
        ax_dyn.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    return fig


# --- subwavelength multilevel arrays: dynamics and peak scaling ------------

def _fig7_groups(manifest):
    groups = {}
    for entry in manifest["runs"]:
        label = entry["label"]
        if "_side" not in label:
            continue
        head, side = label.rsplit("_side", 1)
        species, state = head.split("_", 1)
        groups.setdefault((species, state), []).append((int(side), entry))
    if not groups:
        raise BundleError("manifest has no '*_side*' array runs")
    return {key: sorted(vals) for key, vals in groups.items()}


def _render_fig7(manifest, root):
    groups = _fig7_groups(manifest)
    fig, (ax_dyn, ax_peak) = plt.subplots(1, 2, figsize=(9.2, 3.8))
    for (key, sides), color in zip(sorted(groups.items()), _COLORS):
        species, state = key
        tag = f"{species} {state.replace('_', ' ')}"
        side_max, entry_max = sides[-1]
        dyn = load_table(entry_max, root)
        n_max = side_max ** 2
        ax_dyn.plot(dyn.col("t_gamma0"), dyn.col("R_total") / n_max,
                    color=color, lw=1.1, label=f"{tag}, N={n_max}")

        n = np.array([side ** 2 for side, _ in sides], dtype=float)
        peaks = np.array([summary_value(e, "peaks", "total", "R_peak")
                          for _, e in sides])
        _loglog_guide(ax_peak, n, peaks, color, tag)
    ax_dyn.set_xlabel(r"$t\,\Gamma_0$")
    ax_dyn.set_ylabel(r"$R_{tot} / (N\Gamma_0)$")
    ax_dyn.set_title("largest array per case, d = 244 nm")
    ax_dyn.legend(fontsize=7, frameon=False)
    ax_peak.set_xscale("log")
    ax_peak.set_yscale("log")
    ax_peak.set_xlabel("N")
    ax_peak.set_ylabel(r"$R_{tot}^{peak} / \Gamma_0$")
    ax_peak.set_title("peak scaling")
    ax_peak.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    return fig


# --- cumulant closure against exact benchmarks ------------------------------

def _render_fig9(manifest, root):
    tags = ("0.1", "0.2")
    fig, axes = plt.subplots(1, 2, figsize=(9.2, 3.8), sharey=False)
    for ax, tag in zip(axes, tags):
        for side, ls in ((3, "-"), (4, "--")):
            exact = run_entry(manifest, f"exact_{side}x{side}_d{tag}",
                              required=side == 3)
            approx = run_entry(manifest, f"cumulant_{side}x{side}_d{tag}",
                               required=side == 3)
            if exact is None or approx is None:
                continue
            tab_e = load_table(exact, root)
            tab_c = load_table(approx, root)
            ax.plot(tab_e.col("t_gamma0"), tab_e.col("R_total"), ls=ls,
                    color="k", lw=1.2, label=f"{side}x{side} exact")
            ax.plot(tab_c.col("t_gamma0"), tab_c.col("R_total"), ls=ls,
                    color="C3", lw=1.0, label=f"{side}x{side} cumulant")
            if side == 3:
                peak_e = summary_value(exact, "peaks", "total", "R_peak")
                peak_c = summary_value(approx, "peaks", "total", "R_peak")
                over = peak_c / peak_e - 1.0
                ax.annotate(f"peak {over:+.1%}", xy=(0.55, 0.9),
                            xycoords="axes fraction", fontsize=8)
        ax.set_xlabel(r"$t\,\Gamma_0$")
        ax.set_ylabel(r"$R_{tot} / \Gamma_0$")
        ax.set_title(f"d = {tag} wavelengths")
        ax.legend(fontsize=7, frameon=False)
    fig.tight_layout()
    return fig


RENDERERS = {
    "fig2": _render_fig2,
    "fig5": _render_fig5,
    "fig7": _render_fig7,
    "fig9": _render_fig9,
}


def render_preset(preset, manifest_path, out_path):
    """Render one preset bundle to an image file; returns the output path."""
    try:
        builder = RENDERERS[preset]
    except KeyError:
        raise BundleError(
            f"no renderer for preset '{preset}' "
            f"(available: {', '.join(sorted(RENDERERS))})") from None
    manifest, root = load_manifest(manifest_path)
    if manifest.get("name") != preset:
        raise BundleError(
            f"manifest describes bundle '{manifest.get('name')}', "
            f"not '{preset}'")
    fig = builder(manifest, root)
    out = Path(out_path)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.savefig(out, dpi=150)
    finally:
        plt.close(fig)
    return out
