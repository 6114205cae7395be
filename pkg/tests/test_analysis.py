import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spdelab import analysis as an
from spdelab import solver as sv
from spdelab.kernels import DomainError, KernelId
from spdelab.noise import GridSpec

SPECTRAL = sv.SchemeConfig.spectral()
DIR = KernelId.dirichlet()

GRID = GridSpec(32, 256, 0.125)
MODEL = sv.default_model(DIR, T=GRID.T)


# -- regions -------------------------------------------------------------------

def test_region_validation():
    with pytest.raises(ValueError):
        an.Region(kind="open")
    with pytest.raises(ValueError):
        an.Region.sdelta(0.5)
    with pytest.raises(ValueError):
        an.Region.ldelta(0.0)
    with pytest.raises(ValueError):
        an.Region.compact(0.2, 0.1, 0.0, 1.0)
    with pytest.raises(ValueError):
        an.Region.compact(0.0, 0.1, 0.4, 1.2)


def test_region_bounds():
    assert an.Region.full().bounds(0.5) == (0.0, 0.5, 0.0, 1.0)
    assert an.Region.sdelta(0.1).bounds(0.5) == (0.1, 0.5, 0.1, 0.9)
    assert an.Region.ldelta(0.1).bounds(0.5) == (0.1, 0.5, 0.0, 1.0)
    assert an.Region.compact(0.1, 0.9, 0.25, 0.75).bounds(0.5) == \
        (0.1, 0.5, 0.25, 0.75)


def test_empty_region_raises():
    g = GridSpec(8, 16, 1.0)
    # a window strictly between two time levels holds no grid node
    r = an.Region.compact(0.2 * g.dt, 0.8 * g.dt, 0.0, 1.0)
    with pytest.raises(an.EmptyRegionError):
        an._region_indices(r, g)
    r = an.Region.compact(0.0, 1.0, 0.4 * g.dx, 0.6 * g.dx)
    with pytest.raises(an.EmptyRegionError):
        an._region_indices(r, g)


# -- path suprema ---------------------------------------------------------------

def test_sup_ties_collect_argmax_set():
    g = GridSpec(4, 4, 1.0)
    values = np.zeros((5, 5))
    values[2, 1] = 3.0
    values[4, 3] = 3.0
    values[3, 2] = 3.0 - 1e-12
    sup = an._sup_from_values(values, g, an.Region.full(), tau_tie=1e-9)
    assert sup.sup_value == 3.0
    assert set(sup.argmax_indices) == {(2, 1), (4, 3), (3, 2)}
    strict = an._sup_from_values(values, g, an.Region.full(), tau_tie=1e-15)
    assert set(strict.argmax_indices) == {(2, 1), (4, 3)}


def test_path_sup_matches_region_window():
    nz_grid = GridSpec(16, 32, 0.25)
    m = sv.default_model(DIR, T=nz_grid.T)
    from spdelab.noise import sample
    path = sv.simulate_path(m, nz_grid, SPECTRAL, sample(3, 0, nz_grid))
    sup = an.path_sup(path, an.Region.full())
    assert sup.sup_value == path.values.max()
    j, i = sup.argmax_indices[0]
    assert path.values[j, i] == sup.sup_value
    assert sup.argmax_set[0] == (j * nz_grid.dt, i / nz_grid.Nx)


@settings(max_examples=20, deadline=None)
@given(j0=st.integers(0, 32), j1=st.integers(0, 32),
       i0=st.integers(0, 16), i1=st.integers(0, 16))
def test_sup_monotone_under_region_inclusion(j0, j1, i0, i1):
    g = GridSpec(16, 32, 0.25)
    rng = np.random.default_rng(7)
    values = rng.standard_normal((33, 17))
    j0, j1 = sorted((j0, j1))
    i0, i1 = sorted((i0, i1))
    r = an.Region.compact(j0 * g.dt, j1 * g.dt, i0 * g.dx, i1 * g.dx)
    inner = an._sup_from_values(values, g, r)
    outer = an._sup_from_values(values, g, an.Region.full())
    assert inner.sup_value <= outer.sup_value


# -- ensemble engine -------------------------------------------------------------

def _path_index(p, values, cells, inc):
    return p


def test_ensemble_map_orders_by_path_index():
    out = an.ensemble_map(MODEL, GRID, SPECTRAL, 40, 7, _path_index, workers=2)
    assert out == list(range(40))
    with pytest.raises(ValueError):
        an.ensemble_map(MODEL, GRID, SPECTRAL, 0, 7, _path_index)


def test_ensemble_sup_independent_of_pool_size():
    a = an.ensemble_sup(MODEL, GRID, SPECTRAL, 40, 7, an.Region.full(),
                        workers=1)
    b = an.ensemble_sup(MODEL, GRID, SPECTRAL, 40, 7, an.Region.full(),
                        workers=2)
    assert [s.sup_value for s in a] == [s.sup_value for s in b]
    assert [s.argmax_indices for s in a] == [s.argmax_indices for s in b]


# -- density estimates ------------------------------------------------------------

def test_kde_matches_standard_normal():
    rng = np.random.default_rng(1)
    d = an.kde(rng.standard_normal(20000))
    grid = np.asarray(d.grid)
    dens = np.asarray(d.density)
    assert abs(dens[np.argmin(np.abs(grid))] - 1 / np.sqrt(2 * np.pi)) < 0.02
    assert 0.999 <= d.integral <= 1.001


def test_kde_scale_equivariance():
    rng = np.random.default_rng(2)
    s = rng.standard_normal(5000)
    d1 = an.kde(s)
    d2 = an.kde(2.0 * s)
    assert d2.bandwidth == pytest.approx(2.0 * d1.bandwidth, rel=1e-9)
    assert max(d2.density) == pytest.approx(0.5 * max(d1.density), rel=1e-9)


def test_kde_input_validation():
    with pytest.raises(ValueError):
        an.kde(np.arange(50.0))
    with pytest.raises(ValueError):
        an.kde(np.full(200, 3.0))


def test_atom_scan_masses():
    rng = np.random.default_rng(3)
    rows = an.atom_scan(rng.random(100000), [0.02, 0.01])
    assert abs(rows[1]["max_mass"] - 0.01) < 0.005
    assert 1.7 < rows[0]["max_mass"] / rows[1]["max_mass"] < 2.3
    atom = an.atom_scan(np.full(1000, 2.5), [0.01])
    assert atom[0]["max_mass"] == 1.0
    assert atom[0]["window_start"] == 2.5
    with pytest.raises(ValueError):
        an.atom_scan(np.arange(999.0), [0.01])


def test_atom_scan_exact_on_uniform_lattice():
    # dyadic lattice so the window arithmetic is exact in binary
    s = np.arange(2048.0) / 2048.0
    row = an.atom_scan(s, [0.25])[0]
    # half-open window [a, a + 0.25) catches exactly 512 lattice points
    assert row["max_mass"] == 512 / 2048


# -- regularity exponents ----------------------------------------------------------

def test_default_lags_table():
    assert an.default_lags(4097) == [16, 32, 64, 128, 256]
    assert an.default_lags(257) == [2, 4, 8, 16]
    assert an.default_lags(65) == [1, 2, 4, 8]
    assert an.default_lags(9) == [1, 2, 4]
    with pytest.raises(an.UndefinedExponentError):
        an.default_lags(8)


def test_holder_exponent_random_walk_near_half():
    rng = np.random.default_rng(0)
    rep = an.holder_exponent(np.cumsum(rng.standard_normal(4097)))
    assert rep.slope == pytest.approx(0.5, abs=0.1)
    assert not rep.flagged


def test_holder_exponent_smooth_series_near_one():
    rep = an.holder_exponent(np.sin(2 * np.pi * np.linspace(0, 1, 4097)))
    assert rep.slope == pytest.approx(1.0, abs=0.05)
    assert rep.r2 > 0.99


def test_holder_exponent_spacing_shifts_intercept_not_slope():
    rng = np.random.default_rng(4)
    s = np.cumsum(rng.standard_normal(4097))
    r1 = an.holder_exponent(s, spacing=1.0)
    r2 = an.holder_exponent(s, spacing=1e-3)
    assert r1.slope == pytest.approx(r2.slope, abs=1e-12)


def test_holder_exponent_degenerate_series():
    with pytest.raises(an.UndefinedExponentError):
        an.holder_exponent(np.full(4097, 1.0))
    with pytest.raises(an.UndefinedExponentError):
        an.holder_exponent(np.arange(40.0), lags=[32])


def test_field_holder_slopes_small_grid():
    g = GridSpec(64, 512, 0.25)
    m = sv.default_model(DIR, T=g.T)
    rt = an.holder_ensemble(m, g, SPECTRAL, 8, 3, "time")
    rx = an.holder_ensemble(m, g, SPECTRAL, 8, 3, "space")
    assert rt.axis == "time" and rx.axis == "space"
    assert rt.slope == pytest.approx(0.25, abs=0.07)
    assert rx.slope == pytest.approx(0.5, abs=0.1)
    with pytest.raises(ValueError):
        an.holder_ensemble(m, g, SPECTRAL, 8, 3, "frequency")


def test_malliavin_holder_slopes_small_grid():
    rt = an.holder_exponent_malliavin(MODEL, GRID, SPECTRAL, 4, 3, "time",
                                      stride=16)
    rx = an.holder_exponent_malliavin(MODEL, GRID, SPECTRAL, 4, 3, "space")
    assert rt.axis == "malliavin-time" and rx.axis == "malliavin-space"
    assert 0.1 < rt.slope < 0.4
    assert 0.35 < rx.slope < 0.65
    with pytest.raises(ValueError):
        an.holder_exponent_malliavin(MODEL, GRID, SPECTRAL, 4, 3, "corner")


# -- lower-bound scaling ------------------------------------------------------------

def test_r1_scaling_second_order_slope_half():
    for kernel, x in ((DIR, 0.5), (KernelId.neumann(), 0.25)):
        rep = an.r1_scaling(kernel, 0.5, x)
        assert rep.slope == pytest.approx(0.5, abs=0.01)
        assert rep.r2 > 0.999


def test_r1_scaling_fourth_order_slope():
    rep = an.r1_scaling(KernelId.fourth(1.0), 0.5, 0.5)
    assert rep.slope == pytest.approx(0.75, abs=0.03)


def test_r1_scaling_quadrature_doubling_stable():
    a = an.r1_scaling(DIR, 0.5, 0.5, n_quad=64)
    b = an.r1_scaling(DIR, 0.5, 0.5, n_quad=128)
    rel = max(abs(x - y) / x for x, y in zip(a.values, b.values))
    assert rel < 1e-12


def test_r1_scaling_domain_errors():
    with pytest.raises(DomainError):
        an.r1_scaling(DIR, 0.5, 0.0)
    with pytest.raises(DomainError):
        an.r1_scaling(DIR, 0.5, 0.5, eps=[0.4, 0.6])
    with pytest.raises(DomainError):
        an.r1_scaling(DIR, 0.5, 0.5, eps=[0.0, 0.1])


# -- probability reports --------------------------------------------------------------

def test_wilson_interval_values():
    lo, hi = an.wilson_interval(8, 10)
    assert lo == pytest.approx(0.49015684672072346)
    assert hi == pytest.approx(0.9433190520193067)
    assert an.wilson_interval(0, 50)[0] == 0.0
    assert an.wilson_interval(50, 50)[1] == pytest.approx(1.0)


def test_smallball_linear_gamma_is_deterministic_step():
    g = GridSpec(32, 128, 0.125)
    lin = sv.linear_model(DIR, T=g.T)
    ref = sv.linear_mode_variance(DIR, 64 * g.dt, 0.5, g.Nx)
    rep = an.smallball_gamma(lin, g, SPECTRAL, (64, 16), 64,
                             [0.9 * ref, 1.1 * ref], seed=1)
    assert [r["probability"] for r in rep.rows] == [0.0, 1.0]
    assert rep.quantiles[0] == pytest.approx(rep.quantiles[-1], rel=1e-12)
    assert rep.quantiles[2] == pytest.approx(ref, rel=1e-12)


def test_smallball_tail_monotone_and_bounded():
    ys = [1e-4, 1e-3, 1e-2, 1e-1]
    rep = an.smallball_gamma(MODEL, GRID, SPECTRAL, (128, 16), 64, ys, seed=1)
    probs = [r["probability"] for r in rep.rows]
    assert probs == sorted(probs)
    for r in rep.rows:
        assert r["wilson_lo"] <= r["probability"] <= r["wilson_hi"]


def test_smallball_target_validation():
    with pytest.raises(DomainError):
        an.smallball_gamma(MODEL, GRID, SPECTRAL, (0, 16), 64, [0.1])
    with pytest.raises(DomainError):
        an.smallball_gamma(MODEL, GRID, SPECTRAL, (64, 0), 64, [0.1])


def test_escape_deterministic_path_never_exceeds_peak():
    # dissipative flow from the eigenmode peak decays monotonically, so no
    # probe and no supremum can beat the initial maximum
    g = GridSpec(32, 128, 0.125)
    det = sv.deterministic_model(DIR, sv.InitialConditionSpec.eigenmode(1),
                                 T=g.T)
    rep = an.escape_probability(det, g, SPECTRAL, 16,
                                [g.dt, 4 * g.dt, 16 * g.dt], "fixed-star",
                                seed=2)
    assert rep.reference == 1.0
    assert all(r["fraction"] == 0.0 for r in rep.rows)
    assert rep.sup_fraction == 0.0


def test_escape_moving_point_positive_fractions():
    rep = an.escape_probability(MODEL, GRID, SPECTRAL, 64,
                                [4 * GRID.dt, 16 * GRID.dt], "moving-point",
                                seed=2)
    lo = 1.0 / (4.0 * MODEL.u0.alpha)
    assert rep.theta == pytest.approx(0.5 * (lo + 0.5))
    assert rep.reference == 0.0
    for r in rep.rows:
        assert 0.0 < r["fraction"] <= 1.0


def test_escape_validation():
    with pytest.raises(ValueError):
        an.escape_probability(MODEL, GRID, SPECTRAL, 8, [GRID.dt], "drift")
    with pytest.raises(DomainError):
        an.escape_probability(MODEL, GRID, SPECTRAL, 8, [0.0], "fixed-star")
    with pytest.raises(DomainError):
        an.escape_probability(MODEL, GRID, SPECTRAL, 8, [GRID.dt],
                              "moving-point", theta=0.6)


# -- argmax nondegeneracy ----------------------------------------------------------

def test_argmax_gamma_positive_away_from_time_zero():
    rep = an.argmax_gamma(MODEL, GRID, SPECTRAL, 32, 5, an.Region.sdelta(0.1))
    assert rep.quantiles["min"] > 0.0
    assert rep.mean_argmax_count >= 1.0
    assert len(rep.min_gammas) == 32


def test_argmax_gamma_zero_when_argmax_at_time_zero():
    g = GridSpec(32, 128, 0.125)
    det = sv.deterministic_model(DIR, sv.InitialConditionSpec.eigenmode(1),
                                 T=g.T)
    rep = an.argmax_gamma(det, g, SPECTRAL, 1, 5, an.Region.full())
    assert rep.min_gammas == (0.0,)


def test_sup_refinement_ks_rows():
    rows = an.sup_refinement_ks(
        MODEL, [GridSpec(32, 128, 0.125), GridSpec(48, 288, 0.125)], 64, 9,
        an.Region.full())
    assert len(rows) == 1
    assert rows[0]["grid_a"] != rows[0]["grid_b"]
    assert 0.0 <= rows[0]["ks_statistic"] <= 1.0
    assert 0.0 <= rows[0]["p_value"] <= 1.0
