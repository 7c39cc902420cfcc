"""Experiment stages: phantom, simulate, reconstruct, metrics, plot-flux.

Each stage resolves everything it needs from the configuration alone (data
are regenerated from the recorded seed rather than read back), so rerunning
any stage from its manifest reproduces the numeric outputs byte for byte.
Figures (PNG) are rendered alongside the exact text/binary outputs.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, Experiment
from .diffusion import AcarVogelTV, flux, flux_derivative
from .fileio import (
    read_image_meta,
    read_matrix_csv,
    read_pgm16,
    toml_dumps,
    write_image_meta,
    write_matrix_csv,
    write_metrics_files,
    write_pgm16,
    write_sinogram_bin,
    write_sinogram_csv,
    write_trace_csv,
)
from .figures import save_flux_figure, save_image_png, save_trace_figure
from .grids import Image
from .metrics import metrics_block
from .optimize import IterationTrace, solve_anid, solve_nid, solve_tv
from .phantom import add_noise, shepp_logan_phantom
from .radon import build_projection_matrix, fbp_reconstruct, forward_project


def write_manifest(exp: Experiment, out: Path) -> Path:
    data = dict(exp.raw)
    data["provenance"] = {
        "nidtomo": __version__,
        "numpy": np.__version__,
        "scipy": __import__("scipy").__version__,
    }
    path = out / "manifest.toml"
    path.write_text(toml_dumps(data))
    return path


def _prepare_out(exp: Experiment) -> Path:
    out = exp.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_image_set(out: Path, stem: str, img: Image) -> None:
    vmin, vmax = write_pgm16(out / f"{stem}.pgm", img.values)
    write_image_meta(
        out / f"{stem}_meta.txt",
        {"format": "pgm16", "n": img.grid.n, "vmin": vmin, "vmax": vmax},
    )
    save_image_png(out / f"{stem}.png", img.values)
    write_matrix_csv(out / f"{stem}.csv", img.values)


def run_phantom(exp: Experiment) -> Path:
    out = _prepare_out(exp)
    img = shepp_logan_phantom(exp.grid(), exp.phantom_variant())
    _write_image_set(out, "phantom", img)
    write_manifest(exp, out)
    return out


def _simulate_sinograms(exp: Experiment, matrix=None):
    grid = exp.grid()
    geom = exp.geometry()
    if matrix is None:
        matrix = build_projection_matrix(grid, geom)
    truth = shepp_logan_phantom(grid, exp.phantom_variant())
    clean = forward_project(matrix, truth)
    noisy = add_noise(clean, exp.noise())
    return matrix, truth, clean, noisy


def run_simulate(exp: Experiment) -> Path:
    out = _prepare_out(exp)
    _, _, clean, noisy = _simulate_sinograms(exp)
    for stem, sino in (("sinogram_clean", clean), ("sinogram_noisy", noisy)):
        write_sinogram_csv(out / f"{stem}.csv", sino)
        write_sinogram_bin(out / f"{stem}.bin", sino)
        save_image_png(out / f"{stem}.png", sino.values)
    write_manifest(exp, out)
    return out


def reconstruct_image(exp: Experiment, matrix=None):
    """Run the configured method; returns (reconstruction, trace, truth)."""
    matrix, truth, clean, noisy = _simulate_sinograms(exp, matrix)
    grid = exp.grid()
    method = exp.method
    f0 = Image.zeros(grid)
    if method == "fbp":
        rec = fbp_reconstruct(noisy, grid, cutoff=exp.fbp_cutoff(), matrix=matrix)
        trace = IterationTrace(stop_reason="direct")
    elif method == "tv":
        rec, trace = solve_tv(noisy, matrix, exp.tv_config(), exp.linesearch(), exp.stop(), f0)
    elif method in ("nid1", "nid2", "nid3"):
        rec, trace = solve_nid(
            noisy, matrix, exp.nid_config(method), exp.linesearch(), exp.stop(), f0
        )
    else:  # anid1 / anid2 / anid3
        base = method.replace("anid", "nid")
        ls = exp.linesearch()
        rec, trace = solve_anid(
            noisy, matrix, exp.nid_config(base), exp.tv_config(), exp.schedule(), ls, exp.stop(), f0
        )
    return rec, trace, truth


def run_reconstruct(exp: Experiment) -> Path:
    out = _prepare_out(exp)
    try:
        rec, trace, truth = reconstruct_image(exp)
    except Exception as err:
        partial = getattr(err, "trace", None)
        if partial is not None:
            write_trace_csv(out / "trace.csv", partial)
        raise
    _write_image_set(out, "reconstruction", rec)
    write_trace_csv(out / "trace.csv", trace)
    if len(trace):
        save_trace_figure(out / "convergence.png", trace)
    write_metrics_files(out / "metrics.txt", out / "metrics.csv", metrics_block(truth, rec))
    write_manifest(exp, out)
    return out


def run_metrics(exp: Experiment) -> Path:
    out = _prepare_out(exp)
    csv_path = out / "reconstruction.csv"
    if csv_path.exists():
        values = read_matrix_csv(csv_path)
    else:
        meta = read_image_meta(out / "reconstruction_meta.txt")
        values = read_pgm16(
            out / "reconstruction.pgm", float(meta["vmin"]), float(meta["vmax"])
        )
    rec = Image(exp.grid(), values)
    truth = shepp_logan_phantom(exp.grid(), exp.phantom_variant())
    write_metrics_files(out / "metrics.txt", out / "metrics.csv", metrics_block(truth, rec))
    return out


def run_plot_flux(exp: Experiment) -> Path:
    out = _prepare_out(exp)
    blk = exp.raw["flux_plot"]
    families = {}
    for name in blk["families"]:
        if name == "tv":
            families["tv"] = AcarVogelTV(float(exp.raw["tv"]["eps"]))
        elif name in ("nid1", "nid2", "nid3"):
            families[name] = exp.nid_family(name)
        else:
            raise ConfigError(f"flux_plot.families: unknown family {name!r}")
    s_max = float(blk["s_max"])
    if s_max <= 0:
        s_max = 2.0 * float(exp.derived_thresholds(exp.raw["nid1"]["threshold_scale"]).max())
    s = np.linspace(0.0, s_max, int(blk["samples"]))

    header = ["s"]
    columns = [s]
    curves = {}
    for name, fam in families.items():
        psi = np.asarray(flux(fam, s), dtype=float)
        dpsi = np.asarray(flux_derivative(fam, s), dtype=float)
        header += [f"{name}_flux", f"{name}_flux_derivative"]
        columns += [psi, dpsi]
        if blk["normalize"]:
            pn = np.abs(psi).max() or 1.0
            dn = np.abs(dpsi).max() or 1.0
            curves[name] = (psi / pn, dpsi / dn)
        else:
            curves[name] = (psi, dpsi)

    table = np.column_stack(columns)
    lines = [",".join(header)]
    lines += [",".join(repr(float(x)) for x in row) for row in table]
    (out / "flux_curves.csv").write_text("\n".join(lines) + "\n")
    save_flux_figure(out / "flux.png", s, curves, bool(blk["normalize"]))
    write_manifest(exp, out)
    return out
