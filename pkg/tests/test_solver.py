import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spdelab import coefficients as cf
from spdelab import solver as sv
from spdelab.kernels import DomainError, KernelId
from spdelab.noise import GridSpec, sample

SPECTRAL = sv.SchemeConfig.spectral()
IMEX = sv.SchemeConfig.imex()


# -- initial conditions -------------------------------------------------------

def test_u0_validation():
    with pytest.raises(ValueError):
        sv.InitialConditionSpec(kind="zero", alpha=0.5)
    with pytest.raises(ValueError):
        sv.InitialConditionSpec(kind="zero", x_star=1.5)
    with pytest.raises(ValueError):
        sv.InitialConditionSpec(kind="zero", C0=-1.0)
    with pytest.raises(ValueError):
        sv.InitialConditionSpec(kind="wavelet")


def test_sample_u0_certificates_pass():
    g = GridSpec(64, 128, 0.25)
    for spec in (sv.InitialConditionSpec.zero(),
                 sv.InitialConditionSpec.eigenmode(1, "sin"),
                 sv.InitialConditionSpec.eigenmode(2, "cos"),
                 sv.InitialConditionSpec.cos_squared()):
        vals = sv.sample_u0(spec, g)
        assert vals.shape == (g.Nx + 1,)
        assert np.allclose(vals, spec.evaluate(g.nodes()))


def test_sample_u0_rejects_certificate_violation():
    # a sharp drop right at x_star falls faster than any C0 |y-x|^2 cone
    knots = np.linspace(0.0, 1.0, 33)
    vals = 1.0 - 8.0 * np.abs(knots - 0.5)
    spec = sv.InitialConditionSpec.tabulated(vals, x_star=0.5, alpha=2.0,
                                             C0=1.0, r0=0.1)
    with pytest.raises(sv.InvalidInitialConditionError):
        sv.sample_u0(spec, GridSpec(64, 128, 0.25))


def test_eigenmode_sin_boundary_values_exact():
    spec = sv.InitialConditionSpec.eigenmode(3, "sin")
    v = spec.evaluate(np.array([0.0, 1.0]))
    assert v[0] == 0.0 and v[1] == 0.0


# -- model specification ------------------------------------------------------

def test_modelspec_rejects_wrong_lipschitz():
    with pytest.raises(ValueError):
        sv.ModelSpec(kernel=KernelId.dirichlet(), b=cf.make("sin"),
                     sigma=cf.default_sigma(), lip_b=0.5, lip_sigma=0.25,
                     C_sigma=1.5, u0=sv.InitialConditionSpec.zero(), T=1.0)


def test_modelspec_rejects_nonelliptic_sigma():
    with pytest.raises(ValueError):
        sv.ModelSpec(kernel=KernelId.dirichlet(), b=cf.make("zero"),
                     sigma=cf.make("sin"), lip_b=0.0, lip_sigma=1.0,
                     C_sigma=1.5, u0=sv.InitialConditionSpec.zero(), T=1.0)


def test_deterministic_model_skips_ellipticity():
    m = sv.deterministic_model(KernelId.neumann(),
                               sv.InitialConditionSpec.cos_squared(), T=0.5)
    assert m.C_sigma is None and m.sigma.kind == "zero"


def test_fingerprint_stable_and_distinct():
    a = sv.default_model(KernelId.dirichlet(), T=1.0)
    b = sv.default_model(KernelId.dirichlet(), T=1.0)
    c = sv.default_model(KernelId.neumann(), T=1.0)
    assert a.fingerprint() == b.fingerprint()
    assert a.fingerprint() != c.fingerprint()


def test_default_grids():
    g2 = sv.default_grid(KernelId.dirichlet())
    g4 = sv.default_grid(KernelId.fourth(rho=1.0))
    assert (g2.Nx, g2.Nt, g2.T) == (64, 4096, 1.0)
    assert (g4.Nx, g4.Nt, g4.T) == (64, 4096, 0.5)


# -- deterministic propagation ------------------------------------------------

@pytest.mark.parametrize("kernel,family", [
    (KernelId.dirichlet(), "sin"),
    (KernelId.neumann(), "cos"),
    (KernelId.fourth(rho=1.0), "cos"),
])
def test_eigenmode_decay_exact_spectral(kernel, family):
    k = 2
    T = 0.5 if kernel.kind == "fourth" else 1.0
    g = GridSpec(64, 256, T)
    m = sv.deterministic_model(kernel,
                               sv.InitialConditionSpec.eigenmode(k, family),
                               T=T)
    path = sv.simulate_path(m, g, SPECTRAL, sample(0, 0, g))
    x = g.nodes()
    mode = np.sin(k * np.pi * x) if family == "sin" else np.cos(k * np.pi * x)
    exact = np.exp(-kernel.rates(k) * g.times())[:, None] * mode[None, :]
    assert np.max(np.abs(path.values - exact)) < 1e-12


def test_eigenmode_decay_imex_converges():
    kernel = KernelId.dirichlet()
    errs = []
    for Nt in (128, 512):
        g = GridSpec(64, Nt, 0.25)
        m = sv.deterministic_model(
            kernel, sv.InitialConditionSpec.eigenmode(1, "sin"), T=0.25)
        path = sv.simulate_path(m, g, IMEX, sample(0, 0, g))
        exact = (np.exp(-kernel.rates(1) * g.times())[:, None]
                 * np.sin(np.pi * g.nodes())[None, :])
        errs.append(np.max(np.abs(path.values - exact)))
    assert errs[1] < errs[0]
    assert errs[1] < 2e-2


def test_dirichlet_boundary_rows_exactly_zero():
    g = GridSpec(32, 128, 0.25)
    m = sv.default_model(KernelId.dirichlet(), T=0.25)
    for scheme in (SPECTRAL, IMEX):
        path = sv.simulate_path(m, g, scheme, sample(3, 1, g))
        assert np.all(path.values[:, 0] == 0.0)
        assert np.all(path.values[:, -1] == 0.0)


def test_neumann_deterministic_mass_conserved():
    g = GridSpec(32, 256, 0.5)
    m = sv.deterministic_model(KernelId.neumann(),
                               sv.InitialConditionSpec.cos_squared(), T=0.5)
    path = sv.simulate_path(m, g, SPECTRAL, sample(0, 0, g))
    means = path.cells.mean(axis=1)
    assert np.max(np.abs(means - means[0])) < 1e-13


def test_initial_row_is_sampled_u0():
    g = GridSpec(48, 96, 0.25)
    m = sv.default_model(KernelId.neumann(), T=0.25)
    path = sv.simulate_path(m, g, SPECTRAL, sample(9, 2, g))
    assert np.array_equal(path.values[0], sv.sample_u0(m.u0, g))


# -- stochastic checks ----------------------------------------------------------

def test_linear_exact_covariance_against_series():
    t, x, y = 0.1, 0.5, 0.3
    for kernel in (KernelId.dirichlet(), KernelId.neumann()):
        k = np.arange(1, 20001)
        lam = kernel.rates(k)
        if kernel.kind == "dirichlet":
            phx = np.sqrt(2) * np.sin(k * np.pi * x)
            phy = np.sqrt(2) * np.sin(k * np.pi * y)
            const = 0.0
        else:
            phx = np.sqrt(2) * np.cos(k * np.pi * x)
            phy = np.sqrt(2) * np.cos(k * np.pi * y)
            const = t
        series = const + np.sum((1 - np.exp(-2 * lam * t)) / (2 * lam)
                                * phx * phy)
        got = sv.linear_exact_covariance(kernel, t, x, y)
        assert got == pytest.approx(series, abs=1e-8)


def test_linear_mode_variance_approaches_exact():
    kernel = KernelId.dirichlet()
    exact = sv.linear_exact_variance(kernel, 0.1, 0.5)
    v64 = sv.linear_mode_variance(kernel, 0.1, 0.5, 64)
    v256 = sv.linear_mode_variance(kernel, 0.1, 0.5, 256)
    assert v64 < v256 < exact
    assert exact - v256 < exact - v64
    # spectral tail of the mode sum: sum_{odd k > Nx} 1/(k pi)^2 ~ 1/(2 Nx pi^2)
    assert abs(v256 - exact) / exact < 2e-3


def test_linear_exact_variance_domain():
    with pytest.raises(DomainError):
        sv.linear_exact_variance(KernelId.dirichlet(), 0.0, 0.5)
    with pytest.raises(DomainError):
        sv.linear_exact_variance(KernelId.dirichlet(), 0.1, 1.5)


def test_linear_monte_carlo_matches_law():
    kernel = KernelId.dirichlet()
    g = GridSpec(64, 512, 0.1)
    m = sv.linear_model(kernel, T=0.1)
    vals = []
    for p in range(0, 400, 32):
        idx = list(range(p, min(p + 32, 400)))
        inc = np.stack([sample(17, q, g).increments for q in idx])
        values, _ = sv._run_block(m, g, SPECTRAL, inc, idx)
        vals.extend(values[:, -1, 32].tolist())
    vals = np.asarray(vals)
    var = vals.var(ddof=1)
    law = sv.linear_mode_variance(kernel, 0.1, 0.5, 64)
    se = law * np.sqrt(2.0 / (len(vals) - 1))
    assert abs(var - law) < 3 * se


def test_scheme_cross_check_pathwise():
    g = GridSpec(64, 2048, 0.125)
    m = sv.default_model(KernelId.dirichlet(), T=0.125)
    noise = sample(4, 0, g)
    a = sv.simulate_path(m, g, SPECTRAL, noise)
    b = sv.simulate_path(m, g, IMEX, noise)
    scale = np.max(np.abs(a.values))
    assert np.max(np.abs(a.values - b.values)) < 0.15 * scale


def test_diverged_path_reports_step_and_index():
    g = GridSpec(16, 32, 0.5)
    m = sv.default_model(KernelId.dirichlet(), T=0.5)
    inc = np.stack([sample(0, p, g).increments for p in (0, 1)])
    inc[1, 3, 5] = np.inf
    with pytest.raises(sv.DivergedPathError) as err:
        sv._run_block(m, g, SPECTRAL, inc, [0, 1])
    assert err.value.path_index == 1
    # the poisoned increment is consumed at step 3, so state row 4 blows up
    assert err.value.step == 4
    assert "path 1" in str(err.value)


def test_simulate_path_grid_mismatch():
    m = sv.default_model(KernelId.dirichlet(), T=0.5)
    noise = sample(0, 0, GridSpec(16, 32, 0.5))
    with pytest.raises(sv.GridMismatchError):
        sv.simulate_path(m, GridSpec(32, 32, 0.5), SPECTRAL, noise)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(0, 50))
def test_path_values_finite_and_reproducible(seed, p):
    g = GridSpec(16, 64, 0.25)
    m = sv.default_model(KernelId.neumann(), T=0.25)
    a = sv.simulate_path(m, g, SPECTRAL, sample(seed, p, g))
    b = sv.simulate_path(m, g, SPECTRAL, sample(seed, p, g))
    assert np.all(np.isfinite(a.values))
    assert np.array_equal(a.values, b.values)


def test_convergence_probe_linear_columns():
    kernel = KernelId.dirichlet()
    m = sv.linear_model(kernel, T=0.1)
    grids = [GridSpec(32, 256, 0.1), GridSpec(64, 512, 0.1)]
    rows = sv.convergence_probe(m, grids, N=96, seed=1)
    assert len(rows) == 4
    for row in rows:
        assert {"grid", "t", "x", "mean", "variance",
                "law_variance", "exact_variance"} <= set(row)
        assert row["law_variance"] < row["exact_variance"]
