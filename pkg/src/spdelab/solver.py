"""Time-steppers for the three boundary regimes.

The primary scheme advances the field in the eigenbasis of the linear part
(sine modes for Dirichlet, cosine modes otherwise): the semigroup factor is
exact per step, the per-mode noise gain is chosen so the linear-case law is
matched exactly, and drift/noise enter explicitly at the pre-step state.  A
theta=1 finite-difference scheme is kept alongside purely to cross-check.

State lives on the Nx staggered cell centers (i+1/2)/Nx, where the discrete
sine/cosine transforms are orthogonal and noise cells align one-to-one; the
stored path additionally carries node values synthesized from the same
coefficients, so Dirichlet boundary rows are exactly zero.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.fft import dct, dst, idct, idst
from scipy.linalg import solve_banded

from . import coefficients
from .kernels import (DIRICHLET, FOURTH, FOURTH_POLY_K, NEUMANN, DEFAULT_TRUNC,
                      DomainError, KernelId, SeriesTruncation, _phi, _q_green,
                      resolve_modes)
from .noise import GridSpec, NoiseGrid, sample as sample_noise

SPECTRAL = "spectral-exponential-euler"
IMEX = "finite-difference-imex"


class GridMismatchError(ValueError):
    pass


class InvalidInitialConditionError(ValueError):
    pass


class DivergedPathError(RuntimeError):
    def __init__(self, step, path_index=0):
        super().__init__(
            f"path {path_index} diverged (non-finite values) at step {step}")
        self.step = step
        self.path_index = path_index


def _cos_sq(x):
    return np.cos(np.pi * np.asarray(x, float)) ** 2


@dataclass(frozen=True)
class InitialConditionSpec:
    """Initial profile plus a local one-sided Hoelder certificate at x_star.

    The certificate u0(x_star) - u0(y) <= C0 |y - x_star|^alpha for
    |y - x_star| <= r0 is validated on a fine lattice by sample_u0.
    """

    kind: str  # zero | eigenmode | tabulated | callable
    k: int = 1
    family: str = "sin"  # eigenmode flavour: sin | cos
    values: tuple = ()
    fn: object = None
    x_star: float = 0.5
    alpha: float = 1.0
    C0: float = 0.0
    r0: float = 0.5

    def __post_init__(self):
        if self.kind not in ("zero", "eigenmode", "tabulated", "callable"):
            raise ValueError(f"unknown initial-condition kind {self.kind!r}")
        if not 0.0 <= self.x_star <= 1.0:
            raise ValueError("x_star must lie in [0,1]")
        if self.alpha <= 0.5:
            raise ValueError("certificate order alpha must exceed 1/2")
        if self.C0 < 0 or self.r0 <= 0:
            raise ValueError("certificate needs C0 >= 0 and r0 > 0")

    @classmethod
    def zero(cls):
        return cls(kind="zero", x_star=0.5, alpha=1.0, C0=0.0)

    @classmethod
    def eigenmode(cls, k=1, family="sin"):
        if family not in ("sin", "cos"):
            raise ValueError("eigenmode family must be 'sin' or 'cos'")
        c0 = 0.5 * (k * np.pi) ** 2 * 1.05  # Taylor bound plus margin
        xs = 1.0 / (2 * k) if family == "sin" else 0.0
        return cls(kind="eigenmode", k=k, family=family, x_star=xs,
                   alpha=2.0, C0=c0, r0=min(0.5, 1.0 / (2 * k)))

    @classmethod
    def cos_squared(cls):
        return cls(kind="callable", fn=_cos_sq, x_star=0.0, alpha=2.0,
                   C0=np.pi ** 2 * 1.05, r0=0.5)

    @classmethod
    def tabulated(cls, values, x_star, alpha, C0, r0):
        return cls(kind="tabulated", values=tuple(float(v) for v in values),
                   x_star=x_star, alpha=alpha, C0=C0, r0=r0)

    @classmethod
    def from_callable(cls, fn, x_star, alpha, C0, r0):
        return cls(kind="callable", fn=fn, x_star=x_star, alpha=alpha,
                   C0=C0, r0=r0)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "eigenmode":
            if self.family == "sin":
                out = np.sin(self.k * np.pi * x)
                # the boundary zeros are exact, not sin(k*pi) roundoff
                return np.where((x == 0.0) | (x == 1.0), 0.0, out)
            return np.cos(self.k * np.pi * x)
        if self.kind == "tabulated":
            vals = np.asarray(self.values, dtype=float)
            return np.interp(x, np.linspace(0.0, 1.0, len(vals)), vals)
        return np.asarray(self.fn(x), dtype=float)

    def describe(self):
        d = {"kind": self.kind, "x_star": self.x_star, "alpha": self.alpha,
             "C0": self.C0, "r0": self.r0}
        if self.kind == "eigenmode":
            d["k"] = self.k
            d["family"] = self.family
        elif self.kind == "tabulated":
            d["values"] = list(self.values)
        elif self.kind == "callable":
            d["fn"] = getattr(self.fn, "__name__", repr(self.fn))
        return d


def sample_u0(spec, grid):
    """Sample u0 on the Nx+1 nodes and validate the Hoelder certificate."""
    nodes = grid.nodes()
    vals = spec.evaluate(nodes)
    fine = np.linspace(max(0.0, spec.x_star - spec.r0),
                       min(1.0, spec.x_star + spec.r0), 4 * grid.Nx + 1)
    ustar = float(spec.evaluate(np.array([spec.x_star]))[0])
    drop = ustar - spec.evaluate(fine)
    cap = spec.C0 * np.abs(fine - spec.x_star) ** spec.alpha
    tol = 1e-9 * (1.0 + abs(ustar))
    bad = np.nonzero(drop > cap + tol)[0]
    if bad.size:
        y = fine[bad[0]]
        raise InvalidInitialConditionError(
            f"certificate u0(x*)-u0(y) <= C0|y-x*|^alpha fails at y={y:.6g}: "
            f"drop {drop[bad[0]]:.6g} > bound {cap[bad[0]]:.6g}")
    return vals


@dataclass(frozen=True)
class ModelSpec:
    """Equation data: regime, coefficients with derivatives, initial profile.

    sigma is probed on a value lattice against the declared ellipticity
    constant; set C_sigma=None for degenerate test models (sigma == 0).
    """

    kernel: KernelId
    b: object
    sigma: object
    lip_b: float
    lip_sigma: float
    C_sigma: object
    u0: InitialConditionSpec
    T: float

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("horizon T must be positive")
        probe = np.linspace(-8.0, 8.0, 2001)
        if self.C_sigma is not None:
            if self.C_sigma <= 1.0:
                raise ValueError("ellipticity constant must exceed 1")
            s = np.asarray(self.sigma(probe), dtype=float)
            if not (np.all(s >= 1.0 / self.C_sigma - 1e-12)
                    and np.all(s <= self.C_sigma + 1e-12)):
                raise ValueError(
                    "sigma violates 1/C <= sigma <= C on the probe lattice")
        for f, lip, name in ((self.b, self.lip_b, "b"),
                             (self.sigma, self.lip_sigma, "sigma")):
            if np.max(np.abs(np.asarray(f.d(probe), float))) > lip + 1e-9:
                raise ValueError(f"derivative of {name} exceeds declared "
                                 f"Lipschitz constant {lip}")

    def describe(self):
        def coeff(f):
            if hasattr(f, "describe"):
                return f.describe()
            return {"kind": getattr(f, "__name__", repr(f))}
        return {"kernel": self.kernel.label(), "b": coeff(self.b),
                "sigma": coeff(self.sigma), "lip_b": self.lip_b,
                "lip_sigma": self.lip_sigma, "C_sigma": self.C_sigma,
                "u0": self.u0.describe(), "T": self.T}

    def fingerprint(self):
        blob = json.dumps(self.describe(), sort_keys=True).encode()
        return "model_" + hashlib.sha256(blob).hexdigest()[:12]


def default_model(kernel, T=None):
    """Smooth elliptic test model: b = sin u, sigma = 1.25 + 0.25 sin u."""
    if T is None:
        T = 1.0 if kernel.second_order else 0.5
    u0 = (InitialConditionSpec.eigenmode(1, "sin")
          if kernel.kind == DIRICHLET else InitialConditionSpec.cos_squared())
    return ModelSpec(kernel=kernel, b=coefficients.default_drift(),
                     sigma=coefficients.default_sigma(), lip_b=1.0,
                     lip_sigma=0.25, C_sigma=1.5, u0=u0, T=T)


def linear_model(kernel, T=None, sigma_const=1.0):
    """b = 0, sigma = const, u0 = 0: the exactly solvable law."""
    if T is None:
        T = 1.0 if kernel.second_order else 0.5
    sig = coefficients.make("affine-sin", offset=sigma_const, amp=0.0)
    return ModelSpec(kernel=kernel, b=coefficients.make("zero"), sigma=sig,
                     lip_b=0.0, lip_sigma=0.0,
                     C_sigma=max(1.5, 2.0 * sigma_const),
                     u0=InitialConditionSpec.zero(), T=T)


def deterministic_model(kernel, u0, b=None, T=None):
    """sigma = 0: noise-free decay, used by smoke tests."""
    if T is None:
        T = 1.0 if kernel.second_order else 0.5
    return ModelSpec(kernel=kernel, b=b or coefficients.make("zero"),
                     sigma=coefficients.make("zero"),
                     lip_b=b.lipschitz if b is not None else 0.0,
                     lip_sigma=0.0, C_sigma=None, u0=u0, T=T)


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = SPECTRAL

    def __post_init__(self):
        if self.scheme not in (SPECTRAL, IMEX):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @classmethod
    def spectral(cls):
        return cls(scheme=SPECTRAL)

    @classmethod
    def imex(cls):
        return cls(scheme=IMEX)


@dataclass(frozen=True)
class FieldPath:
    """One simulated path: node values plus the staggered cell history."""

    grid: GridSpec
    values: np.ndarray  # (Nt+1, Nx+1) at nodes i/Nx
    cells: np.ndarray   # (Nt+1, Nx) at cell centers (i+1/2)/Nx
    model_fingerprint: str
    noise_fingerprint: str


def default_grid(kernel):
    if kernel.second_order:
        return GridSpec(Nx=64, Nt=4096, T=1.0)
    return GridSpec(Nx=64, Nt=4096, T=0.5)


# -- eigenbasis plumbing ----------------------------------------------------

def _frequencies(kernel, Nx):
    """Mode frequency m per transform coefficient index."""
    if kernel.kind == DIRICHLET:
        return np.arange(1, Nx + 1, dtype=float)
    return np.arange(0, Nx, dtype=float)


def _analysis(kernel, v):
    if kernel.kind == DIRICHLET:
        return dst(v, type=2, norm="ortho", axis=-1)
    return dct(v, type=2, norm="ortho", axis=-1)


def _synthesis(kernel, a):
    if kernel.kind == DIRICHLET:
        return idst(a, type=2, norm="ortho", axis=-1)
    return idct(a, type=2, norm="ortho", axis=-1)


def _node_matrix(kernel, Nx):
    """(Nx+1, Nx) map from transform coefficients to node values.

    Evaluates the same trigonometric sum the staggered transform represents at
    the nodes i/Nx; Dirichlet boundary rows are zeroed exactly.
    """
    nodes = np.linspace(0.0, 1.0, Nx + 1)
    m = _frequencies(kernel, Nx)
    if kernel.kind == DIRICHLET:
        scale = np.full(Nx, math.sqrt(2.0 / Nx))
        scale[-1] = math.sqrt(1.0 / Nx)
        B = np.sin(np.outer(nodes, m) * np.pi) * scale
        B[0, :] = 0.0
        B[-1, :] = 0.0
    else:
        scale = np.full(Nx, math.sqrt(2.0 / Nx))
        scale[0] = math.sqrt(1.0 / Nx)
        B = np.cos(np.outer(nodes, m) * np.pi) * scale
    return B


def _noise_gain(lam, dt):
    """Per-mode gain nu with nu^2 = (1 - e^{-2 lam dt}) / (2 lam dt).

    Matches the exact per-step variance of the stochastic convolution, so the
    linear-case law is reproduced without time-discretization bias; nu -> 1 as
    lam -> 0.
    """
    lam = np.asarray(lam, dtype=float)
    out = np.ones_like(lam)
    pos = lam > 0
    z = 2.0 * lam[pos] * dt
    out[pos] = np.sqrt(-np.expm1(-z) / z)
    return out


class _SpectralStepper:
    def __init__(self, model, grid):
        self.kernel = model.kernel
        m = _frequencies(model.kernel, grid.Nx)
        lam = np.where(m > 0, model.kernel.rates(np.maximum(m, 1.0)), 0.0)
        self.E = np.exp(-lam * grid.dt)
        self.nu = _noise_gain(lam, grid.dt)
        self.B = _node_matrix(model.kernel, grid.Nx)
        self.model = model
        self.dt = grid.dt
        self.inv_dx = 1.0 / grid.dx

    def step(self, V, dW):
        """Advance a (P, Nx) block one step; returns (cells, nodes)."""
        drift = V + self.dt * np.asarray(self.model.b(V), float)
        forced = np.asarray(self.model.sigma(V), float) * dW * self.inv_dx
        a = (_analysis(self.kernel, drift) * self.E
             + _analysis(self.kernel, forced) * self.nu)
        return _synthesis(self.kernel, a), a @ self.B.T


def _second_difference(kernel, Nx, dx):
    """Staggered-grid Laplacian with ghost cells reflecting the boundary."""
    L = np.zeros((Nx, Nx))
    idx = np.arange(Nx)
    L[idx, idx] = -2.0
    L[idx[:-1], idx[:-1] + 1] = 1.0
    L[idx[1:], idx[1:] - 1] = 1.0
    if kernel.kind == DIRICHLET:
        L[0, 0] -= 1.0   # ghost v_{-1} = -v_0 pins u(0) = 0
        L[-1, -1] -= 1.0
    else:
        L[0, 0] += 1.0   # ghost v_{-1} = v_0: even reflection
        L[-1, -1] += 1.0
    return L / dx ** 2


def _to_banded(A, lo, up):
    n = A.shape[0]
    ab = np.zeros((lo + up + 1, n))
    for d in range(-lo, up + 1):
        ab[up - d, max(d, 0):n + min(d, 0)] = np.diag(A, d)
    return ab


class _ImexStepper:
    """theta = 1 in the linear part: tridiagonal solve for the second-order
    regimes, pentadiagonal for the fourth-order one."""

    def __init__(self, model, grid):
        kernel = model.kernel
        L2 = _second_difference(kernel, grid.Nx, grid.dx)
        if kernel.second_order:
            A = np.eye(grid.Nx) - grid.dt * L2
            self.bands = (1, 1)
        else:
            A = (np.eye(grid.Nx) + grid.dt * (L2 @ L2)
                 - grid.dt * kernel.rho * L2)
            self.bands = (2, 2)
        self.ab = _to_banded(A, *self.bands)
        self.kernel = kernel
        self.model = model
        self.dt = grid.dt
        self.inv_dx = 1.0 / grid.dx
        self.Nx = grid.Nx

    def step(self, V, dW):
        rhs = (V + self.dt * np.asarray(self.model.b(V), float)
               + np.asarray(self.model.sigma(V), float) * dW * self.inv_dx)
        out = solve_banded(self.bands, self.ab, rhs.T).T
        return out, self._nodes(out)

    def _nodes(self, V):
        n = np.empty(V.shape[:-1] + (self.Nx + 1,))
        n[..., 1:-1] = 0.5 * (V[..., :-1] + V[..., 1:])
        if self.kernel.kind == DIRICHLET:
            n[..., 0] = 0.0
            n[..., -1] = 0.0
        else:
            n[..., 0] = V[..., 0]
            n[..., -1] = V[..., -1]
        return n


def _run_block(model, grid, scheme, increments, path_indices=None):
    """Advance a stack of paths sharing (model, grid, scheme).

    increments: (P, Nt, Nx).  Returns (values, cells) with shapes
    (P, Nt+1, Nx+1) and (P, Nt+1, Nx).
    """
    P = increments.shape[0]
    if increments.shape[1:] != (grid.Nt, grid.Nx):
        raise GridMismatchError("noise shape does not match the grid")
    u0_nodes = sample_u0(model.u0, grid)
    if model.kernel.kind == DIRICHLET and (
            abs(u0_nodes[0]) > 1e-12 or abs(u0_nodes[-1]) > 1e-12):
        raise InvalidInitialConditionError(
            "Dirichlet regime requires u0(0) = u0(1) = 0")
    stepper = (_SpectralStepper(model, grid) if scheme.scheme == SPECTRAL
               else _ImexStepper(model, grid))
    values = np.empty((P, grid.Nt + 1, grid.Nx + 1))
    cells = np.empty((P, grid.Nt + 1, grid.Nx))
    values[:, 0] = u0_nodes
    V = np.broadcast_to(model.u0.evaluate(grid.cell_centers()),
                        (P, grid.Nx)).copy()
    cells[:, 0] = V
    for j in range(grid.Nt):
        V, nodes = stepper.step(V, increments[:, j])
        if not np.isfinite(V).all():
            bad = int(np.nonzero(~np.isfinite(V).all(axis=1))[0][0])
            pidx = path_indices[bad] if path_indices is not None else bad
            raise DivergedPathError(step=j + 1, path_index=pidx)
        cells[:, j + 1] = V
        values[:, j + 1] = nodes
    return values, cells


def simulate_path(model, grid, scheme, noise):
    """Advance one path from its noise grid; pure in all arguments."""
    if noise.grid != grid:
        raise GridMismatchError("noise was sampled on a different grid")
    values, cells = _run_block(model, grid, scheme, noise.increments[None],
                               path_indices=[noise.path_index])
    return FieldPath(grid=grid, values=values[0], cells=cells[0],
                     model_fingerprint=model.fingerprint(),
                     noise_fingerprint=noise.fingerprint())


# -- exact linear law -------------------------------------------------------

def linear_exact_covariance(kernel, t, x, xp, trunc=DEFAULT_TRUNC):
    """Cov(u(t,x), u(t,xp)) for b = 0, sigma = 1, u0 = 0.

    Termwise integration gives sum_k phi_k(x) phi_k(xp) (1-e^{-2 lam t})
    / (2 lam), plus t from the constant mode; the stationary part is summed
    in closed form and the exponential correction truncated adaptively.
    """
    if t <= 0:
        raise DomainError("need t > 0")
    if not (0.0 <= x <= 1.0 and 0.0 <= xp <= 1.0):
        raise DomainError("points must lie in [0,1]")
    stat = _q_green(kernel, 0.0, x, xp)
    corr = _q_green(kernel, 2.0 * t, x, xp)
    base = t if kernel.has_constant_mode else 0.0
    return base + stat - corr


def linear_exact_variance(kernel, t, x, trunc=DEFAULT_TRUNC):
    """Var u(t,x) in the b = 0, sigma = 1, u0 = 0 model."""
    return linear_exact_covariance(kernel, t, x, x, trunc)


def linear_mode_variance(kernel, t, x, Nx):
    """Same law truncated to the Nx modes the solver carries.

    This is the exact variance of the discrete scheme's node value (the
    per-mode noise gain makes each carried mode exact), so the gap to
    linear_exact_variance isolates the spatial truncation bias.
    """
    if t <= 0:
        raise DomainError("need t > 0")
    m = _frequencies(kernel, Nx)
    ks = m[m > 0]
    lam = kernel.rates(ks)
    total = float(np.sum(_phi(kernel, ks, x) ** 2
                         * -np.expm1(-2.0 * lam * t) / (2.0 * lam)))
    if kernel.has_constant_mode:
        total += t
    return total


def convergence_probe(model, grids, N, seed, probes=None,
                      scheme=None):
    """Monte Carlo mean/variance at probe points across grid refinements."""
    if len({g.T for g in grids}) != 1:
        raise ValueError("probe grids must share the horizon T")
    scheme = scheme or SchemeConfig.spectral()
    T = grids[0].T
    probes = probes or [(T, 0.25), (T, 0.5)]
    linear = (model.b.describe()["kind"] == "zero"
              and model.u0.kind == "zero"
              and getattr(model.sigma, "lipschitz", 1.0) == 0.0)
    rows = []
    for g in grids:
        samples = {p: [] for p in probes}
        for p0 in range(0, N, 32):
            idx = list(range(p0, min(p0 + 32, N)))
            inc = np.stack([sample_noise(seed, p, g).increments for p in idx])
            values, _ = _run_block(model, g, scheme, inc, idx)
            for (tq, xq) in probes:
                jt = int(round(tq / g.dt))
                ix = int(round(xq * g.Nx))
                samples[(tq, xq)].extend(values[:, jt, ix].tolist())
        for (tq, xq) in probes:
            arr = np.asarray(samples[(tq, xq)])
            row = {"grid": g.label(), "Nx": g.Nx, "Nt": g.Nt,
                   "t": tq, "x": xq,
                   "mean": float(arr.mean()), "variance": float(arr.var())}
            if linear:
                s0 = float(model.sigma(np.zeros(1))[0])
                row["law_variance"] = s0 ** 2 * linear_mode_variance(
                    model.kernel, tq, xq, g.Nx)
                row["exact_variance"] = s0 ** 2 * linear_exact_variance(
                    model.kernel, tq, xq)
            rows.append(row)
    return rows
