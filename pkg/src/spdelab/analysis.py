"""Ensemble statistics over simulated paths.

Suprema and their argmax sets over space-time regions, kernel density and
atom-window witnesses for the law of the supremum, pathwise regularity
exponents for the field and its noise derivative, deterministic small-ball
scaling, and initial-time escape probabilities.

Ensembles are partitioned into fixed 32-path chunks keyed by path index;
workers own whole chunks and reductions fold in path order, so results do not
depend on the pool size.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass
from functools import partial

import numpy as np

from .kernels import DIRICHLET, DomainError, _gl, l2_norm_sq_y
from .malliavin import _profile_from_arrays
from .noise import sample as sample_noise
from .solver import SchemeConfig, _run_block, sample_u0

_CHUNK = 32


class EmptyRegionError(ValueError):
    pass


class UndefinedExponentError(ValueError):
    pass


# -- regions and suprema -----------------------------------------------------

@dataclass(frozen=True)
class Region:
    """Space-time window; deltas shrink away from t=0 and, for the interior
    variant, from the lateral boundary."""

    kind: str  # full | sdelta | ldelta | compact
    delta: float = 0.0
    t_lo: float = 0.0
    t_hi: float = math.inf
    x_lo: float = 0.0
    x_hi: float = 1.0

    def __post_init__(self):
        if self.kind not in ("full", "sdelta", "ldelta", "compact"):
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.kind in ("sdelta", "ldelta") and not 0 < self.delta < 0.5:
            raise ValueError("delta must lie in (0, 1/2)")

    @classmethod
    def full(cls):
        return cls(kind="full")

    @classmethod
    def sdelta(cls, delta):
        return cls(kind="sdelta", delta=delta)

    @classmethod
    def ldelta(cls, delta):
        return cls(kind="ldelta", delta=delta)

    @classmethod
    def compact(cls, t_lo, t_hi, x_lo, x_hi):
        if not (t_lo <= t_hi and 0.0 <= x_lo <= x_hi <= 1.0):
            raise ValueError("compact window is empty or outside the domain")
        return cls(kind="compact", t_lo=t_lo, t_hi=t_hi, x_lo=x_lo, x_hi=x_hi)

    def bounds(self, T):
        if self.kind == "full":
            return 0.0, T, 0.0, 1.0
        if self.kind == "sdelta":
            return self.delta, T, self.delta, 1.0 - self.delta
        if self.kind == "ldelta":
            return self.delta, T, 0.0, 1.0
        return self.t_lo, min(self.t_hi, T), self.x_lo, self.x_hi

    def describe(self):
        d = {"kind": self.kind}
        if self.kind in ("sdelta", "ldelta"):
            d["delta"] = self.delta
        elif self.kind == "compact":
            d.update(t_lo=self.t_lo, t_hi=self.t_hi,
                     x_lo=self.x_lo, x_hi=self.x_hi)
        return d


def _region_indices(region, grid):
    t_lo, t_hi, x_lo, x_hi = region.bounds(grid.T)
    times = grid.times()
    nodes = grid.nodes()
    jsel = np.nonzero((times >= t_lo - 1e-12) & (times <= t_hi + 1e-12))[0]
    isel = np.nonzero((nodes >= x_lo - 1e-12) & (nodes <= x_hi + 1e-12))[0]
    if jsel.size == 0 or isel.size == 0:
        raise EmptyRegionError(
            f"region {region.describe()} misses the grid {grid.label()}")
    return jsel, isel


@dataclass(frozen=True)
class SupSample:
    sup_value: float
    argmax_set: tuple   # ((t, x), ...) within tau_tie of the max
    argmax_indices: tuple  # ((j, i), ...) node indices
    tau_tie: float

    def to_dict(self):
        return {"sup_value": self.sup_value, "tau_tie": self.tau_tie,
                "argmax_set": [list(p) for p in self.argmax_set]}


def _sup_from_values(values, grid, region, tau_tie=None):
    jsel, isel = _region_indices(region, grid)
    window = values[np.ix_(jsel, isel)]
    sup = float(window.max())
    if tau_tie is None:
        scale = float(np.max(np.abs(window)))
        tau_tie = 1e-9 * (scale if scale > 0 else 1.0)
    jj, ii = np.nonzero(window >= sup - tau_tie)
    idx = tuple((int(jsel[a]), int(isel[b])) for a, b in zip(jj, ii))
    pts = tuple((float(j * grid.dt), float(i / grid.Nx)) for j, i in idx)
    return SupSample(sup_value=sup, argmax_set=pts, argmax_indices=idx,
                     tau_tie=tau_tie)


def path_sup(path, region, tau_tie=None):
    """Exact maximum of the stored node values over the region."""
    return _sup_from_values(path.values, path.grid, region, tau_tie)


# -- ensemble engine ----------------------------------------------------------

def _chunk_worker(task):
    model, grid, scheme, seed, idxs, fn = task
    inc = np.stack([sample_noise(seed, p, grid).increments for p in idxs])
    values, cells = _run_block(model, grid, scheme, inc, idxs)
    return [fn(p, values[n], cells[n], inc[n]) for n, p in enumerate(idxs)]


def ensemble_map(model, grid, scheme, N, seed, fn, workers=1):
    """Apply fn(path_index, values, cells, increments) over N paths.

    Paths are simulated in fixed 32-path chunks; the returned list is ordered
    by path index whatever the worker count.
    """
    if N < 1:
        raise ValueError("need N >= 1 paths")
    tasks = [(model, grid, scheme, seed, list(range(s, min(s + _CHUNK, N))), fn)
             for s in range(0, N, _CHUNK)]
    if workers <= 1 or len(tasks) == 1:
        chunks = [_chunk_worker(t) for t in tasks]
    else:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=workers) as pool:
            chunks = pool.map(_chunk_worker, tasks)
    return [rec for chunk in chunks for rec in chunk]


def _pp_sup(p, values, cells, inc, grid=None, region=None, tau_tie=None):
    return _sup_from_values(values, grid, region, tau_tie)


def ensemble_sup(model, grid, scheme, N, seed, region, tau_tie=None,
                 workers=1):
    fn = partial(_pp_sup, grid=grid, region=region, tau_tie=tau_tie)
    return ensemble_map(model, grid, scheme, N, seed, fn, workers=workers)


# -- density witnesses --------------------------------------------------------

@dataclass(frozen=True)
class DensityEstimate:
    grid: tuple
    density: tuple
    bandwidth: float
    n: int
    integral: float

    def __post_init__(self):
        if min(self.density) < 0:
            raise ValueError("density must be nonnegative")
        if not 0.999 <= self.integral <= 1.001:
            raise ValueError(
                f"density integral {self.integral:.6f} outside [0.999, 1.001]")

    def to_dict(self):
        return {"grid": list(self.grid), "density": list(self.density),
                "bandwidth": self.bandwidth, "n": self.n,
                "integral": self.integral}


def kde(samples, bandwidth=None, n_grid=512):
    """Gaussian kernel density estimate, Silverman bandwidth by default."""
    s = np.asarray(samples, dtype=float).ravel()
    if s.size < 100:
        raise ValueError("need at least 100 samples for a density estimate")
    if bandwidth is None:
        sd = float(s.std(ddof=1))
        iqr = float(np.quantile(s, 0.75) - np.quantile(s, 0.25))
        spread = min(sd, iqr / 1.34) if iqr > 0 else sd
        if spread <= 0:
            raise ValueError("samples are degenerate; no bandwidth rule applies")
        bandwidth = 0.9 * spread * s.size ** (-0.2)
    grid = np.linspace(s.min() - 5 * bandwidth, s.max() + 5 * bandwidth, n_grid)
    dens = np.zeros(n_grid)
    c = 1.0 / (s.size * bandwidth * math.sqrt(2.0 * math.pi))
    for lo in range(0, s.size, 4096):
        block = s[lo:lo + 4096]
        z = (grid[:, None] - block[None, :]) / bandwidth
        dens += c * np.exp(-0.5 * z * z).sum(axis=1)
    integral = float(np.trapezoid(dens, grid))
    return DensityEstimate(grid=tuple(grid.tolist()),
                           density=tuple(dens.tolist()),
                           bandwidth=float(bandwidth), n=int(s.size),
                           integral=integral)


def atom_scan(samples, deltas):
    """Max empirical mass of a half-open value window per width delta."""
    s = np.sort(np.asarray(samples, dtype=float).ravel())
    if s.size < 1000:
        raise ValueError("need at least 1000 samples to scan for atoms")
    rows = []
    for d in deltas:
        hi = np.searchsorted(s, s + float(d), side="left")
        counts = hi - np.arange(s.size)
        a = int(np.argmax(counts))
        rows.append({"delta": float(d),
                     "max_mass": float(counts[a] / s.size),
                     "window_start": float(s[a])})
    return rows


# -- regularity exponents -----------------------------------------------------

@dataclass(frozen=True)
class HolderReport:
    slope: float
    stderr: float
    r2: float
    lags: tuple
    spacing: float
    medians: tuple
    flagged: bool  # set when the log-log fit is poor (R^2 < 0.98)
    axis: str = ""

    def to_dict(self):
        return {"slope": self.slope, "stderr": self.stderr, "r2": self.r2,
                "lags": list(self.lags), "spacing": self.spacing,
                "medians": list(self.medians), "flagged": self.flagged,
                "axis": self.axis}


def _regress_loglog(lx, ly):
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, _, _ = np.linalg.lstsq(A, ly, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(res[0]) if res.size else float(
        np.sum((ly - A @ coef) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = max(len(lx) - 2, 1)
    denom = float(np.sum((lx - lx.mean()) ** 2))
    stderr = math.sqrt(max(ss_res, 0.0) / dof / denom) if denom > 0 else 0.0
    return slope, stderr, intercept, r2


def default_lags(length):
    """Dyadic lags, preferring 4 octaves of margin from both the grid cutoff
    and the domain scale, relaxed symmetrically until >= 4 lags fit."""
    if length < 9:
        raise UndefinedExponentError("series too short for a dyadic window")
    a_cap = int(math.floor(math.log2((length - 1) / 2)))
    a_lo = 4
    a_hi = min(int(math.floor(math.log2(length - 1))) - 4, a_cap)
    while a_hi - a_lo < 3:
        if a_lo > 0:
            a_lo -= 1
        elif a_hi < a_cap:
            a_hi += 1
        else:
            break
    return [2 ** a for a in range(a_lo, a_hi + 1)]


def _lag_medians(series, lags):
    out = []
    for lag in lags:
        d = np.abs(series[lag:] - series[:-lag])
        out.append(float(np.median(d)))
    return out


def holder_exponent(series, lags=None, spacing=1.0, axis=""):
    """Regress log median |increment| on log lag for one series."""
    s = np.asarray(series, dtype=float).ravel()
    if np.all(s == s[0]):
        raise UndefinedExponentError("constant series has no increments")
    lags = list(lags) if lags is not None else default_lags(s.size)
    if s.size < 2 * max(lags):
        raise UndefinedExponentError("series shorter than twice the max lag")
    meds = _lag_medians(s, lags)
    if min(meds) <= 0:
        raise UndefinedExponentError("degenerate increments at some lag")
    lx = np.log(np.asarray(lags, float) * spacing)
    slope, stderr, _, r2 = _regress_loglog(lx, np.log(meds))
    return HolderReport(slope=slope, stderr=stderr, r2=r2, lags=tuple(lags),
                        spacing=spacing, medians=tuple(meds),
                        flagged=r2 < 0.98, axis=axis)


def _pp_series_medians(p, values, cells, inc, axis=None, index=0, lags=()):
    series = values[:, index] if axis == "time" else values[index, :]
    return _lag_medians(series, lags)


def holder_ensemble(model, grid, scheme, N, seed, axis, fixed=None,
                    lags=None, workers=1):
    """Pooled (median of per-path medians) increment regression for the field.

    axis="time" freezes x = fixed (default 0.5); axis="space" freezes
    t = fixed (default T/2).
    """
    if axis == "time":
        fixed = 0.5 if fixed is None else fixed
        index = int(round(fixed * grid.Nx))
        length, spacing = grid.Nt + 1, grid.dt
    elif axis == "space":
        fixed = grid.T / 2 if fixed is None else fixed
        index = int(round(fixed / grid.dt))
        length, spacing = grid.Nx + 1, grid.dx
    else:
        raise ValueError("axis must be 'time' or 'space'")
    lags = list(lags) if lags is not None else default_lags(length)
    if length < 2 * max(lags):
        raise UndefinedExponentError("series shorter than twice the max lag")
    fn = partial(_pp_series_medians, axis=axis, index=index, lags=tuple(lags))
    meds = np.asarray(ensemble_map(model, grid, scheme, N, seed, fn,
                                   workers=workers))
    pooled = np.median(meds, axis=0)
    if np.min(pooled) <= 0:
        raise UndefinedExponentError("degenerate pooled increments")
    lx = np.log(np.asarray(lags, float) * spacing)
    slope, stderr, _, r2 = _regress_loglog(lx, np.log(pooled))
    return HolderReport(slope=slope, stderr=stderr, r2=r2, lags=tuple(lags),
                        spacing=spacing, medians=tuple(pooled.tolist()),
                        flagged=r2 < 0.98, axis=axis)


def _pp_malliavin_medians(p, values, cells, inc, model=None, grid=None,
                          targets=(), lags=()):
    # increments of the L2-valued field: ||D(a) - D(b)||, not |(||D(a)|| -
    # ||D(b)||)|; the latter is much smoother and scales differently
    n = len(targets)
    pairs = [(a, a + lag) for lag in lags for a in range(n - lag)]
    g, cross = _profile_from_arrays(model, grid, cells, inc, targets,
                                    pairs=pairs)
    pa = np.asarray([a for a, _ in pairs])
    pb = np.asarray([b for _, b in pairs])
    d = np.sqrt(np.maximum(g[pa] + g[pb] - 2.0 * cross, 0.0))
    meds, lo = [], 0
    for lag in lags:
        meds.append(float(np.median(d[lo:lo + n - lag])))
        lo += n - lag
    return meds


def holder_exponent_malliavin(model, grid, scheme, N, seed, axis, fixed=None,
                              stride=16, lags=None, workers=1):
    """Increment regression for t or x -> L2 norm of the derivative field.

    One staggered backward sweep per path evaluates the norm at every probe.
    """
    if axis == "time":
        fixed = 0.5 if fixed is None else fixed
        ix = int(round(fixed * grid.Nx))
        jts = list(range(0, grid.Nt + 1, stride))
        targets = tuple((jt, ix) for jt in jts)
        length, spacing = len(jts), stride * grid.dt
    elif axis == "space":
        fixed = grid.T / 2 if fixed is None else fixed
        jt = int(round(fixed / grid.dt))
        targets = tuple((jt, i) for i in range(grid.Nx + 1))
        length, spacing = grid.Nx + 1, grid.dx
    else:
        raise ValueError("axis must be 'time' or 'space'")
    lags = list(lags) if lags is not None else default_lags(length)
    if length < 2 * max(lags):
        raise UndefinedExponentError("series shorter than twice the max lag")
    fn = partial(_pp_malliavin_medians, model=model, grid=grid,
                 targets=targets, lags=tuple(lags))
    meds = np.asarray(ensemble_map(model, grid, scheme, N, seed, fn,
                                   workers=workers))
    pooled = np.median(meds, axis=0)
    if np.min(pooled) <= 0:
        raise UndefinedExponentError("degenerate pooled increments")
    lx = np.log(np.asarray(lags, float) * spacing)
    slope, stderr, _, r2 = _regress_loglog(lx, np.log(pooled))
    return HolderReport(slope=slope, stderr=stderr, r2=r2, lags=tuple(lags),
                        spacing=spacing, medians=tuple(pooled.tolist()),
                        flagged=r2 < 0.98, axis="malliavin-" + axis)


# -- deterministic small-ball scaling ------------------------------------------

@dataclass(frozen=True)
class ScalingReport:
    slope: float
    stderr: float
    r2: float
    eps: tuple
    values: tuple
    n_quad: int

    def to_dict(self):
        return {"slope": self.slope, "stderr": self.stderr, "r2": self.r2,
                "eps": list(self.eps), "values": list(self.values),
                "n_quad": self.n_quad}


def r1_scaling(kernel, t, x, eps=None, n_quad=64):
    """log-log slope of int_0^eps ||kernel_r(x,.)||^2 dr against eps.

    The integrand's r^{-1/2} (or r^{-1/4}) singularity is removed by the
    substitution r = v^2 before Gauss-Legendre quadrature.
    """
    if kernel.kind == DIRICHLET and not 0.0 < x < 1.0:
        raise DomainError("Dirichlet lower bound needs interior x")
    if eps is None:
        eps = (np.geomspace(1e-4, 1e-2, 13) if kernel.second_order
               else np.geomspace(1e-5, 1e-3, 13))
    eps = np.asarray(eps, dtype=float)
    if np.any(eps > t) or np.any(eps <= 0):
        raise DomainError("need 0 < eps <= t")
    nodes, weights = _gl(n_quad)
    vals = []
    for e in eps:
        v = 0.5 * math.sqrt(e) * (nodes + 1.0)
        w = 0.5 * math.sqrt(e) * weights
        l2 = np.array([l2_norm_sq_y(kernel, vi * vi, x) for vi in v])
        vals.append(float(np.sum(w * 2.0 * v * l2)))
    slope, stderr, _, r2 = _regress_loglog(np.log(eps), np.log(vals))
    return ScalingReport(slope=slope, stderr=stderr, r2=r2,
                         eps=tuple(eps.tolist()), values=tuple(vals),
                         n_quad=n_quad)


# -- probability reports --------------------------------------------------------

def wilson_interval(successes, n, z=1.96):
    p = successes / n
    d = 1.0 + z * z / n
    centre = p + z * z / (2 * n)
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return ((centre - half) / d, (centre + half) / d)


@dataclass(frozen=True)
class SmallBallReport:
    target: tuple
    n: int
    rows: tuple  # ({y, probability, wilson_lo, wilson_hi}, ...)
    quantiles: tuple

    def to_dict(self):
        return {"target": list(self.target), "n": self.n,
                "rows": [dict(r) for r in self.rows],
                "quantiles": list(self.quantiles)}


def _pp_gamma_at(p, values, cells, inc, model=None, grid=None, targets=()):
    return _profile_from_arrays(model, grid, cells, inc, targets)


def smallball_gamma(model, grid, scheme, target, N, ys, seed=0, workers=1):
    """Empirical lower tail P(gamma(target) <= y) with Wilson intervals."""
    jt, ix = target
    if jt <= 0:
        raise DomainError("target must have t > 0")
    if model.kernel.kind == DIRICHLET and not 0 < ix < grid.Nx:
        raise DomainError("Dirichlet target must be interior")
    fn = partial(_pp_gamma_at, model=model, grid=grid, targets=((jt, ix),))
    gams = np.asarray(ensemble_map(model, grid, scheme, N, seed, fn,
                                   workers=workers)).ravel()
    rows = []
    for y in ys:
        k = int(np.sum(gams <= y))
        lo, hi = wilson_interval(k, N)
        rows.append({"y": float(y), "probability": k / N,
                     "wilson_lo": lo, "wilson_hi": hi})
    qs = np.quantile(gams, [0.0, 0.25, 0.5, 0.75, 1.0])
    return SmallBallReport(target=(jt * grid.dt, ix / grid.Nx), n=N,
                           rows=tuple(rows), quantiles=tuple(qs.tolist()))


@dataclass(frozen=True)
class EscapeReport:
    mode: str
    n: int
    reference: float
    theta: object
    rows: tuple   # per probe: {t, point, fraction, wilson_lo, wilson_hi}
    sup_fraction: float
    sup_wilson: tuple

    def to_dict(self):
        return {"mode": self.mode, "n": self.n, "reference": self.reference,
                "theta": self.theta, "rows": [dict(r) for r in self.rows],
                "sup_fraction": self.sup_fraction,
                "sup_wilson": list(self.sup_wilson)}


def _pp_escape(p, values, cells, inc, probes=(), ref=0.0):
    vals = [values[j, i] for j, i in probes]
    return vals, float(values.max() > ref)


def escape_probability(model, grid, scheme, N, probe_times, mode, seed=0,
                       theta=None, workers=1):
    """Fraction of paths exceeding the initial maximum right after t=0.

    fixed-star probes u(t, x*) against u0(x*); moving-point probes
    u(t, t^theta) against 0 with theta inside (1/(4 alpha), 1/2).  Both also
    report how often the whole-grid supremum exceeds the reference.
    """
    if mode not in ("fixed-star", "moving-point"):
        raise ValueError("mode must be 'fixed-star' or 'moving-point'")
    probe_times = [float(t) for t in probe_times]
    if any(t <= 0 or t > grid.T for t in probe_times):
        raise DomainError("probe times must lie in (0, T]")
    if mode == "fixed-star":
        theta = None
        ix = int(round(model.u0.x_star * grid.Nx))
        ref = float(sample_u0(model.u0, grid)[ix])
        probes = [(int(round(t / grid.dt)), ix) for t in probe_times]
    else:
        lo, hi = 1.0 / (4.0 * model.u0.alpha), 0.5
        theta = 0.5 * (lo + hi) if theta is None else float(theta)
        if not lo < theta < hi:
            raise DomainError(
                f"theta must lie in ({lo:.4g}, {hi:.4g}) for alpha="
                f"{model.u0.alpha}")
        ref = 0.0
        probes = [(int(round(t / grid.dt)),
                   int(round(min(t ** theta, 1.0) * grid.Nx)))
                  for t in probe_times]
    fn = partial(_pp_escape, probes=tuple(probes), ref=ref)
    recs = ensemble_map(model, grid, scheme, N, seed, fn, workers=workers)
    vals = np.asarray([r[0] for r in recs])
    sup_hits = int(sum(r[1] for r in recs))
    rows = []
    for m, (j, i) in enumerate(probes):
        k = int(np.sum(vals[:, m] > ref))
        lo_w, hi_w = wilson_interval(k, N)
        rows.append({"t": j * grid.dt, "point": i / grid.Nx,
                     "fraction": k / N, "wilson_lo": lo_w, "wilson_hi": hi_w})
    return EscapeReport(mode=mode, n=N, reference=ref, theta=theta,
                        rows=tuple(rows), sup_fraction=sup_hits / N,
                        sup_wilson=wilson_interval(sup_hits, N))


# -- argmax nondegeneracy --------------------------------------------------------

@dataclass(frozen=True)
class ArgmaxGammaReport:
    region: dict
    n: int
    min_gammas: tuple
    quantiles: dict
    mean_argmax_count: float

    def to_dict(self):
        return {"region": self.region, "n": self.n,
                "min_gammas": list(self.min_gammas),
                "quantiles": dict(self.quantiles),
                "mean_argmax_count": self.mean_argmax_count}


def _pp_argmax_gamma(p, values, cells, inc, model=None, grid=None,
                     region=None, tau_tie=None):
    sup = _sup_from_values(values, grid, region, tau_tie)
    g = _profile_from_arrays(model, grid, cells, inc, sup.argmax_indices)
    return float(np.min(g)), len(sup.argmax_indices)


def argmax_gamma(model, grid, scheme, N, seed, region, tau_tie=None,
                 workers=1):
    """Distribution of the minimum of gamma over each path's argmax set."""
    fn = partial(_pp_argmax_gamma, model=model, grid=grid, region=region,
                 tau_tie=tau_tie)
    recs = ensemble_map(model, grid, scheme, N, seed, fn, workers=workers)
    mins = np.asarray([r[0] for r in recs])
    counts = np.asarray([r[1] for r in recs])
    qs = {"min": float(mins.min()),
          "q05": float(np.quantile(mins, 0.05)),
          "q25": float(np.quantile(mins, 0.25)),
          "median": float(np.quantile(mins, 0.50))}
    return ArgmaxGammaReport(region=region.describe(), n=N,
                             min_gammas=tuple(mins.tolist()), quantiles=qs,
                             mean_argmax_count=float(counts.mean()))


def sup_refinement_ks(model, grids, N, seed, region, workers=1,
                      scheme=None):
    """Two-sample KS distance between sup samples at successive grids.

    Noise streams are not coupled across grids, so this documents the
    distributional shift under refinement rather than pathwise convergence.
    """
    from scipy.stats import ks_2samp
    scheme = scheme or SchemeConfig.spectral()
    sups = []
    for g in grids:
        samples = ensemble_sup(model, g, scheme, N, seed, region,
                               workers=workers)
        sups.append(np.asarray([s.sup_value for s in samples]))
    out = []
    for a, b, ga, gb in zip(sups, sups[1:], grids, grids[1:]):
        stat = ks_2samp(a, b)
        out.append({"grid_a": ga.label(), "grid_b": gb.label(),
                    "ks_statistic": float(stat.statistic),
                    "p_value": float(stat.pvalue)})
    return out
