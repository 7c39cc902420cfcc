import pytest

from nidtomo.cli import (
    EXIT_CONFIG,
    EXIT_DIMENSION,
    EXIT_IO,
    EXIT_LINESEARCH,
    EXIT_OK,
    main,
)

TINY = [
    "--override", "grid.n=24",
    "--override", "sinogram.p=12",
    "--override", "sinogram.q=13",
    "--override", "stop.max_iters=8",
]


def run_cli(command, out, *extra):
    return main([command, "--out", str(out), *TINY, *extra])


def read_bytes_map(folder, names):
    return {name: (folder / name).read_bytes() for name in names}


def test_phantom_outputs(tmp_path):
    out = tmp_path / "ph"
    assert run_cli("phantom", out) == EXIT_OK
    for name in ("phantom.pgm", "phantom.png", "phantom.csv", "phantom_meta.txt", "manifest.toml"):
        assert (out / name).exists()


def test_phantom_rerun_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli("phantom", a) == EXIT_OK
    assert run_cli("phantom", b) == EXIT_OK
    for name in ("phantom.pgm", "phantom.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_simulate_outputs_and_seed(tmp_path):
    out = tmp_path / "sim"
    assert run_cli("simulate", out) == EXIT_OK
    names = ["sinogram_clean.csv", "sinogram_clean.bin", "sinogram_noisy.csv", "sinogram_noisy.bin"]
    first = read_bytes_map(out, names)
    out2 = tmp_path / "sim2"
    assert run_cli("simulate", out2, "--seed", "999") == EXIT_OK
    second = read_bytes_map(out2, names)
    assert first["sinogram_clean.csv"] == second["sinogram_clean.csv"]
    assert first["sinogram_noisy.csv"] != second["sinogram_noisy.csv"]


@pytest.mark.parametrize("method", ["fbp", "tv", "nid1", "nid2", "nid3", "anid1"])
def test_reconstruct_all_methods(tmp_path, method):
    out = tmp_path / method
    code = run_cli("reconstruct", out, "--override", f"run.method='{method}'")
    assert code == EXIT_OK
    assert (out / "reconstruction.pgm").exists()
    assert (out / "trace.csv").exists()
    assert (out / "metrics.csv").exists()
    trace = (out / "trace.csv").read_text().splitlines()
    assert trace[0] == "n,value,grad_norm,t_n,tau_n,omega,zeta,cond41_slack"
    if method == "fbp":
        assert len(trace) == 1  # direct method, no iterations
    if method.startswith("anid"):
        assert trace[1].split(",")[7] != ""  # slack column populated


def test_manifest_rerun_reproduces_outputs(tmp_path):
    a = tmp_path / "a"
    assert run_cli("reconstruct", a, "--override", "run.method='nid1'") == EXIT_OK
    b = tmp_path / "b"
    assert main(["reconstruct", "--config", str(a / "manifest.toml"), "--out", str(b)]) == EXIT_OK
    for name in ("reconstruction.csv", "reconstruction.pgm", "trace.csv", "metrics.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_metrics_command_reads_reconstruction(tmp_path):
    out = tmp_path / "rec"
    assert run_cli("reconstruct", out, "--override", "run.method='fbp'") == EXIT_OK
    metrics_before = (out / "metrics.csv").read_text()
    assert run_cli("metrics", out) == EXIT_OK
    assert (out / "metrics.csv").read_text() == metrics_before


def test_plot_flux_outputs(tmp_path):
    out = tmp_path / "flux"
    assert run_cli("plot-flux", out) == EXIT_OK
    csv = (out / "flux_curves.csv").read_text().splitlines()
    header = csv[0].split(",")
    assert header[0] == "s"
    assert "tv_flux" in header and "nid3_flux_derivative" in header
    assert (out / "flux.png").exists()


def test_exit_code_config_error(tmp_path):
    assert run_cli("reconstruct", tmp_path, "--override", "run.method='bogus'") == EXIT_CONFIG
    assert main(["reconstruct", "--config", str(tmp_path / "missing.toml")]) == EXIT_CONFIG
    assert run_cli(
        "reconstruct", tmp_path, "--override", "run.method='tv'",
        "--override", "linesearch.mu=0.9",
    ) == EXIT_CONFIG


def test_exit_code_io_error(tmp_path):
    # metrics without a prior reconstruction in the output directory
    assert run_cli("metrics", tmp_path / "empty") == EXIT_IO


def test_exit_code_dimension_error(tmp_path):
    out = tmp_path / "dim"
    assert run_cli("reconstruct", out, "--override", "run.method='fbp'") == EXIT_OK
    # corrupt the stored reconstruction so it no longer matches the grid
    (out / "reconstruction.csv").write_text("1.0,2.0\n3.0,4.0\n")
    assert run_cli("metrics", out) == EXIT_DIMENSION


def test_exit_code_linesearch_failure(tmp_path):
    out = tmp_path / "ls"
    code = run_cli(
        "reconstruct", out,
        "--override", "run.method='tv'",
        "--override", "linesearch.mode='armijo'",
        "--override", "linesearch.tau0=1e12",
        "--override", "linesearch.max_backtracks=1",
    )
    assert code == EXIT_LINESEARCH
    assert (out / "trace.csv").exists()  # partial trace persisted


def test_override_parsing(tmp_path):
    out = tmp_path / "ovr"
    code = main([
        "phantom", "--out", str(out),
        "--override", "grid.n=16",
        "--override", "grid.phantom=classic",  # bare string accepted
    ])
    assert code == EXIT_OK
    meta = (out / "phantom_meta.txt").read_text()
    assert "n: 16" in meta
