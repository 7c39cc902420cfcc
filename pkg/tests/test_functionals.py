import numpy as np
import pytest
import scipy.sparse as sp

from nidtomo.diffusion import (
    AcarVogelTV,
    PeronaMalikExponential,
    PeronaMalikRational,
    RationalMixture,
    ShiftedRationalSum,
    build_nid3,
)
from nidtomo.functionals import (
    AnidProblem,
    AnidSchedule,
    NidConfig,
    NidProblem,
    NidTerm,
    TvConfig,
    TvProblem,
    anid_gradient,
    anid_value,
    nid_gradient,
    nid_value,
    tv_gradient,
    tv_value,
)
from nidtomo.grids import GridSpec, Image, inner
from nidtomo.radon import (
    ProjectionMatrix,
    Sinogram,
    SinogramGeometry,
    build_projection_matrix,
    sino_inner,
)


@pytest.fixture(scope="module")
def setup16():
    rng = np.random.default_rng(3)
    grid = GridSpec(16)
    geom = SinogramGeometry(12, 13)
    A = build_projection_matrix(grid, geom)
    g = Sinogram(geom, rng.standard_normal((12, 13)))
    return grid, geom, A, g


def make_families():
    pm2 = PeronaMalikExponential(1.0)
    s = np.arange(0.0, 30.0, 1e-3)
    return {
        "pm1": PeronaMalikRational(1.0),
        "pm2": PeronaMalikExponential(1.5),
        "av": AcarVogelTV(0.01),
        "nid1": RationalMixture([(1.0, 0.5), (2.0, 2.0)]),
        "nid2": ShiftedRationalSum([(1.0, 1.0), (0.8, 4.0)]),
        "nid3": build_nid3(np.column_stack([s, pm2.flux_derivative(s)])),
    }


def fd_directional(value, grad_ip, f, u, delta=1e-6):
    plus = value(Image(f.grid, f.values + delta * u.values))
    minus = value(Image(f.grid, f.values - delta * u.values))
    return (plus - minus) / (2.0 * delta), grad_ip(u)


def test_nid_value_trivial_zero(setup16):
    grid, geom, A, g = setup16
    cfg = NidConfig([NidTerm(0.1, 1.5 * grid.h, PeronaMalikRational(1.0))], alpha=0.5)
    assert nid_value(Image.zeros(grid), Sinogram.zeros(geom), A, cfg) == 0.0


def test_nid_value_data_term_only(setup16):
    grid, geom, A, g = setup16
    cfg = NidConfig([NidTerm(0.1, 1.5 * grid.h, PeronaMalikRational(1.0))], alpha=0.5)
    assert nid_value(Image.zeros(grid), g, A, cfg) == pytest.approx(
        0.5 * sino_inner(g, g), rel=1e-14
    )


def test_nid_value_independent_reimplementation():
    # straightforward loop-based second implementation: explicit kernel,
    # explicit padding and correlation, explicit stencils and sums
    rng = np.random.default_rng(8)
    n = 8
    grid = GridSpec(n)
    h = grid.h
    geom = SinogramGeometry(6, 7)
    A = build_projection_matrix(grid, geom)
    g = Sinogram(geom, rng.standard_normal((6, 7)))
    f = Image(grid, rng.standard_normal((n, n)))

    gamma, sigma, lam, alpha = 0.07, 1.2 * h, 0.9, 0.3
    cfg = NidConfig([NidTerm(gamma, sigma, PeronaMalikRational(lam))], alpha=alpha)
    got = nid_value(f, g, A, cfg)

    # data term
    res = A.matrix @ f.values.ravel() - g.values.ravel()
    expected = 0.5 * geom.cell_weight * np.sum(res ** 2)
    # gaussian kernel, truncated and renormalized
    r = int(np.ceil(4.0 * sigma / h))
    offs = np.arange(-r, r + 1) * h
    k1 = np.exp(-(offs ** 2) / (2 * sigma ** 2))
    k1 /= k1.sum()
    k2d = np.outer(k1, k1)
    # symmetric-pad convolution by explicit loops
    fp = np.pad(f.values, r, mode="symmetric")
    smooth = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            smooth[i, j] = np.sum(fp[i : i + 2 * r + 1, j : j + 2 * r + 1] * k2d)
    # forward-difference gradient with zero far boundary
    mag2 = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            d1 = (smooth[i, j + 1] - smooth[i, j]) / h if j < n - 1 else 0.0
            d2 = (smooth[i - 1, j] - smooth[i, j]) / h if i > 0 else 0.0
            mag2[i, j] = d1 * d1 + d2 * d2
    expected += gamma * h * h * np.sum(lam ** 2 * np.log1p(mag2 / lam ** 2))
    expected += 0.5 * alpha * h * h * np.sum(f.values ** 2)
    assert got == pytest.approx(expected, rel=1e-12)


def test_nid_gradient_trivial_zero(setup16):
    grid, geom, A, g = setup16
    cfg = NidConfig([NidTerm(0.1, 1.5 * grid.h, PeronaMalikRational(1.0))], alpha=0.5)
    out = nid_gradient(Image.zeros(grid), Sinogram.zeros(geom), A, cfg)
    assert np.all(out.values == 0.0)


def test_nid_gradient_alpha_term_only():
    # zero operator and zero weights leave only the quadratic term
    rng = np.random.default_rng(1)
    grid = GridSpec(8)
    geom = SinogramGeometry(4, 5)
    A = ProjectionMatrix(grid, geom, sp.csr_matrix((20, 64)))
    cfg = NidConfig([NidTerm(0.0, 1.5 * grid.h, PeronaMalikRational(1.0))], alpha=0.7)
    f = Image(grid, rng.standard_normal((8, 8)))
    out = nid_gradient(f, Sinogram.zeros(geom), A, cfg)
    assert np.allclose(out.values, 0.7 * f.values, atol=1e-15)


@pytest.mark.parametrize("tag", ["pm1", "pm2", "av", "nid1", "nid2", "nid3"])
def test_nid_gradient_finite_differences(setup16, tag):
    grid, geom, A, g = setup16
    fam = make_families()[tag]
    cfg = NidConfig([NidTerm(0.05, 1.5 * grid.h, fam)], alpha=0.1)
    prob = NidProblem(A, g, cfg)
    rng = np.random.default_rng(hash(tag) % 2 ** 32)
    for _ in range(5):
        f = Image(grid, rng.standard_normal((16, 16)))
        u = Image(grid, rng.standard_normal((16, 16)))
        fd, ip = fd_directional(prob.value, lambda uu: inner(prob.gradient(f), uu), f, u)
        assert abs(fd - ip) <= 1e-5 * max(1.0, abs(ip))


def test_tv_value_constant_integrand(setup16):
    grid, geom, A, g = setup16
    cfg = TvConfig(beta=0.05, eps=0.01)
    got = tv_value(Image.zeros(grid), Sinogram.zeros(geom), A, cfg)
    assert got == pytest.approx(4.0 * 0.05 * np.sqrt(0.01), rel=1e-14)


def test_tv_gradient_finite_differences(setup16):
    grid, geom, A, g = setup16
    prob = TvProblem(A, g, TvConfig(beta=0.05, eps=0.01, alpha=0.1))
    rng = np.random.default_rng(77)
    for _ in range(5):
        f = Image(grid, rng.standard_normal((16, 16)))
        u = Image(grid, rng.standard_normal((16, 16)))
        fd, ip = fd_directional(prob.value, lambda uu: inner(prob.gradient(f), uu), f, u)
        assert abs(fd - ip) <= 1e-5 * max(1.0, abs(ip))


def test_tv_gradient_constant_image_reduces_to_alpha(setup16):
    grid, geom, A, g = setup16
    cfg = TvConfig(beta=0.05, eps=0.01, alpha=0.25)
    f = Image.full(grid, 1.3)
    gf = Sinogram(geom, (A.matrix @ f.values.ravel()).reshape(geom.p, geom.q))
    out = tv_gradient(f, gf, A, cfg)
    assert np.allclose(out.values, 0.25 * f.values, atol=1e-12)


class FixedSchedule:
    warmup = 0

    def __init__(self, om, ze):
        self._om, self._ze = om, ze

    def omega(self, n):
        return self._om

    def zeta(self, n):
        return self._ze


def test_anid_endpoints_bitwise(setup16):
    grid, geom, A, g = setup16
    rng = np.random.default_rng(5)
    f = Image(grid, rng.standard_normal((16, 16)))
    nid_cfg = NidConfig([NidTerm(0.05, 1.5 * grid.h, PeronaMalikRational(1.0))], alpha=0.1)
    tv_cfg = TvConfig(beta=0.05, eps=0.01, alpha=0.1)

    at_tv = AnidProblem(A, g, nid_cfg, tv_cfg, FixedSchedule(1.0, 2.0))
    tvp = TvProblem(A, g, tv_cfg)
    assert at_tv.value(f, 0) == tvp.value(f)
    assert np.array_equal(at_tv.gradient(f, 0).values, tvp.gradient(f).values)

    at_nid = AnidProblem(A, g, nid_cfg, tv_cfg, FixedSchedule(0.0, 1.0))
    nidp = NidProblem(A, g, nid_cfg)
    assert at_nid.value(f, 0) == nidp.value(f)
    assert np.array_equal(at_nid.gradient(f, 0).values, nidp.gradient(f).values)


def test_anid_blend_linearity(setup16):
    grid, geom, A, g = setup16
    rng = np.random.default_rng(6)
    nid_cfg = NidConfig([NidTerm(0.05, 1.5 * grid.h, PeronaMalikRational(1.0))], alpha=0.1)
    tv_cfg = TvConfig(beta=0.05, eps=0.01, alpha=0.1)
    sched = FixedSchedule(0.3, 1.7)
    for _ in range(5):
        f = Image(grid, rng.standard_normal((16, 16)))
        blended = anid_value(f, 4, g, A, nid_cfg, tv_cfg, sched)
        scaled = Image(grid, 1.7 * f.values)
        byhand = 0.7 * nid_value(scaled, g, A, nid_cfg) + 0.3 * tv_value(f, g, A, tv_cfg)
        assert blended == pytest.approx(byhand, rel=1e-12)


def test_anid_gradient_finite_differences(setup16):
    grid, geom, A, g = setup16
    nid_cfg = NidConfig([NidTerm(0.05, 1.5 * grid.h, PeronaMalikRational(1.0))], alpha=0.1)
    tv_cfg = TvConfig(beta=0.05, eps=0.01, alpha=0.1)
    sched = FixedSchedule(0.5, 2.0)
    prob = AnidProblem(A, g, nid_cfg, tv_cfg, sched)
    rng = np.random.default_rng(13)
    for _ in range(5):
        f = Image(grid, rng.standard_normal((16, 16)))
        u = Image(grid, rng.standard_normal((16, 16)))
        fd, ip = fd_directional(
            lambda ff: prob.value(ff, 2), lambda uu: inner(prob.gradient(f, 2), uu), f, u
        )
        assert abs(fd - ip) <= 1e-5 * max(1.0, abs(ip))


def test_anid_gradient_surface_function(setup16):
    grid, geom, A, g = setup16
    rng = np.random.default_rng(14)
    f = Image(grid, rng.standard_normal((16, 16)))
    nid_cfg = NidConfig([NidTerm(0.05, 1.5 * grid.h, PeronaMalikRational(1.0))], alpha=0.1)
    tv_cfg = TvConfig(beta=0.05, eps=0.01, alpha=0.1)
    sched = AnidSchedule(midpoint=10, steepness=0.5, zeta0=1.5)
    grad = anid_gradient(f, 3, g, A, nid_cfg, tv_cfg, sched)
    assert grad.values.shape == (16, 16)


def test_schedule_monotone_and_bounded():
    sched = AnidSchedule(midpoint=300, steepness=0.02, zeta0=2.0)
    ns = np.arange(0, 2000)
    om = np.array([sched.omega(n) for n in ns])
    ze = np.array([sched.zeta(n) for n in ns])
    assert np.all(om >= 0) and np.all(om <= 1)
    assert np.all(np.diff(om) <= 0)
    assert np.all(np.diff(ze) <= 0)
    assert ze[0] == pytest.approx(2.0)
    assert ze[-1] == pytest.approx(1.0, abs=1e-6)
    assert np.all(ze > 0)


def test_nid_value_coercive_scaling(setup16):
    grid, geom, A, g = setup16
    rng = np.random.default_rng(15)
    f = Image(grid, rng.standard_normal((16, 16)))
    cfg = NidConfig([NidTerm(0.05, 1.5 * grid.h, PeronaMalikRational(1.0))], alpha=0.4)
    base = 0.5 * cfg.alpha * inner(f, f)
    for c in (2.0, 5.0, 20.0):
        scaled = Image(grid, c * f.values)
        assert nid_value(scaled, g, A, cfg) >= base * c ** 2 * 0.999


def test_config_validation():
    fam = PeronaMalikRational(1.0)
    with pytest.raises(ValueError):
        NidConfig([], alpha=1.0)
    with pytest.raises(ValueError):
        NidConfig([NidTerm(1.0, 0.1, fam)], alpha=0.0)
    with pytest.raises(ValueError):
        NidTerm(-1.0, 0.1, fam)
    with pytest.raises(ValueError):
        NidTerm(1.0, 0.0, fam)
    with pytest.raises(ValueError):
        TvConfig(beta=0.0, eps=0.01)
    with pytest.raises(ValueError):
        AnidSchedule(steepness=0.0)
