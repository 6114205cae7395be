"""Batch front-end: flat-file configs, experiment orchestration, persistence.

Each run resolves a config, executes one experiment, and writes JSON/CSV
outputs plus SVG figures and a manifest into the output directory.  Numeric
outputs are byte-reproducible for a fixed config hash; the hash excludes
execution-only keys (worker count, output location) so pool size cannot leak
into results.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from functools import partial
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import analysis, kernels, malliavin, solver  # noqa: E402
from .coefficients import default_sigma, make as make_coefficient  # noqa: E402
from .kernels import DIRICHLET, FOURTH, NEUMANN, DomainError, KernelId  # noqa: E402
from .noise import GridSpec, sample as sample_noise  # noqa: E402

ARTIFACT_VERSION = "1.0"
OUTPUT_DIR_ENV = "SPDELAB_OUTPUT_DIR"

EXPERIMENTS = ("kernels-verify", "simulate", "malliavin-check", "density",
               "holder", "smallball", "escape", "argmax-gamma", "report")


class ConfigError(ValueError):
    pass


def _cast_bool(s):
    if s.lower() in ("true", "yes", "1"):
        return True
    if s.lower() in ("false", "no", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _cast_floats(s):
    return [float(v) for v in s.split(",") if v.strip()]


def _cast_probes(s):
    out = []
    for item in s.split(","):
        if not item.strip():
            continue
        t, _, x = item.partition(":")
        out.append((float(t), float(x)))
    return out


def _cast_names(s):
    return [v.strip() for v in s.split(",") if v.strip()]


# key -> (caster, default); None default means "resolved later or absent"
_KEYS = {
    "experiment": (str, None),
    "output.dir": (str, "out"),
    "scheme": (str, solver.SPECTRAL),
    "model.regime": (str, DIRICHLET),
    "model.rho": (float, 1.0),
    "model.t": (float, None),
    "model.drift": (str, "sin"),
    "model.sigma": (str, "affine-sin"),
    "model.lip_b": (float, None),
    "model.lip_sigma": (float, None),
    "model.c_sigma": (float, None),
    "model.u0": (str, None),
    "model.u0.k": (int, 1),
    "grid.nx": (int, None),
    "grid.nt": (int, None),
    "ensemble.n": (int, 100),
    "ensemble.seed": (int, 0),
    "ensemble.workers": (int, 1),
    "kernels.bounds": (_cast_names, ["all"]),
    "kernels.alpha": (float, None),
    "kernels.beta": (float, None),
    "kernels.gamma": (float, None),
    "kernels.refine": (_cast_bool, True),
    "simulate.probes": (_cast_probes, None),
    "simulate.dump_field": (_cast_bool, False),
    "malliavin.pairs": (int, 20),
    "malliavin.tol_bump": (float, 1e-3),
    "malliavin.tol_adjoint": (float, 1e-10),
    "malliavin.h": (float, None),
    "density.deltas": (_cast_floats, [0.04, 0.02, 0.01]),
    "region.kind": (str, "sdelta"),
    "region.delta": (float, 0.1),
    "region.t_lo": (float, 0.0),
    "region.t_hi": (float, None),
    "region.x_lo": (float, 0.0),
    "region.x_hi": (float, 1.0),
    "holder.axis": (str, "time"),
    "holder.field": (str, "solution"),
    "holder.fixed": (float, None),
    "holder.stride": (int, 16),
    "holder.lo": (float, None),
    "holder.hi": (float, None),
    "smallball.target": (str, None),
    "smallball.ys": (_cast_floats, None),
    "escape.mode": (str, "fixed-star"),
    "escape.times": (_cast_floats, None),
    "escape.theta": (float, None),
    "escape.min_sup": (float, None),
    "report.dir": (str, None),
}

# coefficient parameter namespaces take free keys, validated by the registry
_PREFIXES = ("model.drift.", "model.sigma.")

# execution-only keys, excluded from the config hash and the manifest echo
_VOLATILE = ("output.dir", "ensemble.workers")


def parse_config_text(text):
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, eq, value = stripped.partition("=")
        if not eq:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        known = key in _KEYS or any(
            key.startswith(p) and key != p.rstrip(".") for p in _PREFIXES)
        if not known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        raw[key] = value
    return raw


class RunConfig:
    """Fully resolved configuration: typed values plus canonical echo."""

    def __init__(self, raw):
        self.explicit = set(raw)
        self.values = {}
        self.extras = {}
        for key, value in raw.items():
            if key in _KEYS:
                caster = _KEYS[key][0]
                try:
                    self.values[key] = caster(value)
                except ConfigError:
                    raise
                except ValueError as exc:
                    raise ConfigError(f"key {key!r}: {exc}") from exc
            else:
                try:
                    self.extras[key] = (tuple(_cast_floats(value))
                                        if "," in value else float(value))
                except ValueError as exc:
                    raise ConfigError(
                        f"key {key!r}: expected a number or number list"
                    ) from exc
        for key, (_, default) in _KEYS.items():
            self.values.setdefault(key, default)
        exp = self.values["experiment"]
        if exp is None:
            raise ConfigError("missing required key 'experiment'")
        if exp not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {exp!r}")

    def __getitem__(self, key):
        return self.values[key]

    def params(self, prefix, drop=()):
        out = {}
        for key, value in self.extras.items():
            if key.startswith(prefix):
                name = key[len(prefix):]
                if name not in drop:
                    out[name.replace("-", "_")] = value
        return out

    def echo(self):
        """Canonical 'key = value' lines of every explicitly set key."""
        items = {}
        for key, value in sorted({**self.values, **self.extras}.items()):
            if value is None or key in _VOLATILE:
                continue
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, (list, tuple)):
                text = ",".join(
                    ":".join(repr(float(u)) for u in v)
                    if isinstance(v, tuple)
                    else (v if isinstance(v, str) else repr(v))
                    for v in value)
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            items[key] = text
        return "\n".join(f"{k} = {v}" for k, v in items.items())

    def hash(self):
        return hashlib.sha256(self.echo().encode()).hexdigest()[:16]


# -- model / grid construction -------------------------------------------------

def _build_kernel(cfg):
    regime = cfg["model.regime"]
    if regime == DIRICHLET:
        return KernelId.dirichlet()
    if regime == NEUMANN:
        return KernelId.neumann()
    if regime == FOURTH:
        return KernelId.fourth(rho=cfg["model.rho"])
    raise ConfigError(f"unknown regime {regime!r}")


def _build_u0(cfg, kernel):
    name = cfg["model.u0"]
    if name is None:
        name = "eigenmode-sin" if kernel.kind == DIRICHLET else "cos-squared"
    k = cfg["model.u0.k"]
    if name == "zero":
        return solver.InitialConditionSpec.zero()
    if name == "eigenmode-sin":
        return solver.InitialConditionSpec.eigenmode(k, "sin")
    if name == "eigenmode-cos":
        return solver.InitialConditionSpec.eigenmode(k, "cos")
    if name == "cos-squared":
        return solver.InitialConditionSpec.cos_squared()
    raise ConfigError(f"unknown initial condition {name!r}")


def _build_model(cfg):
    kernel = _build_kernel(cfg)
    T = cfg["model.t"]
    if T is None:
        T = solver.default_grid(kernel).T
    try:
        b = make_coefficient(cfg["model.drift"], **cfg.params("model.drift."))
        if "model.sigma" in cfg.explicit or cfg.params("model.sigma."):
            sigma = make_coefficient(cfg["model.sigma"],
                                     **cfg.params("model.sigma."))
        else:
            sigma = default_sigma()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    lip_b = cfg["model.lip_b"]
    lip_sigma = cfg["model.lip_sigma"]
    c_sigma = cfg["model.c_sigma"]
    if lip_b is None:
        lip_b = b.lipschitz
    if lip_sigma is None:
        lip_sigma = sigma.lipschitz
    if c_sigma is None and sigma.kind != "zero":
        lo, hi = sigma.range_bounds()
        if lo > 0:
            c_sigma = max(hi, 1.0 / lo) * (1.0 + 1e-9)
    u0 = _build_u0(cfg, kernel)
    try:
        return solver.ModelSpec(kernel=kernel, b=b, sigma=sigma, lip_b=lip_b,
                                lip_sigma=lip_sigma, C_sigma=c_sigma, u0=u0,
                                T=T)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _build_grid(cfg, model):
    base = solver.default_grid(model.kernel)
    Nx = cfg["grid.nx"] if cfg["grid.nx"] is not None else base.Nx
    Nt = cfg["grid.nt"] if cfg["grid.nt"] is not None else base.Nt
    try:
        return GridSpec(Nx, Nt, model.T)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _build_scheme(cfg):
    name = cfg["scheme"]
    if name == solver.SPECTRAL:
        return solver.SchemeConfig.spectral()
    if name == solver.IMEX:
        return solver.SchemeConfig.imex()
    raise ConfigError(f"unknown scheme {name!r}")


def _build_region(cfg, model):
    kind = cfg["region.kind"]
    try:
        if kind == "full":
            return analysis.Region.full()
        if kind == "sdelta":
            return analysis.Region.sdelta(cfg["region.delta"])
        if kind == "ldelta":
            return analysis.Region.ldelta(cfg["region.delta"])
        if kind == "compact":
            t_hi = cfg["region.t_hi"]
            return analysis.Region.compact(
                cfg["region.t_lo"], model.T if t_hi is None else t_hi,
                cfg["region.x_lo"], cfg["region.x_hi"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown region kind {kind!r}")


# -- persistence ----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header_hash, columns, rows):
    lines = [f"# manifest={header_hash}", ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return [_jsonable(u) for u in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(u) for u in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(u) for k, u in v.items()}
    return v


def write_json(path, payload):
    Path(path).write_text(
        json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n")


def _save_fig(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


class Checks:
    def __init__(self):
        self.rows = []

    def add(self, check_id, passed, detail):
        self.rows.append({"id": check_id,
                          "status": "pass" if passed else "fail",
                          "detail": detail})

    @property
    def failed(self):
        return [r["id"] for r in self.rows if r["status"] == "fail"]

    def summary(self):
        return list(self.rows)


# -- experiments -----------------------------------------------------------------

def _run_kernels_verify(cfg, outdir, tag, checks):
    names = cfg["kernels.bounds"]
    if names == ["all"]:
        names = list(kernels.BOUND_IDS)
    for name in names:
        if name not in kernels.BOUND_IDS:
            raise ConfigError(f"unknown bound id {name!r}")
    params = {}
    for key, param in (("kernels.alpha", "alpha"), ("kernels.beta", "beta"),
                       ("kernels.gamma", "gamma")):
        if cfg[key] is not None:
            params[param] = cfg[key]
    rows = []
    for name in names:
        lat = kernels.default_lattice(name, **dict(params,
                                                   rho=cfg["model.rho"]))
        rep = kernels.verify_bound(name, lat,
                                   check_refinement=cfg["kernels.refine"])
        write_json(outdir / f"bound_{name}.json", {
            "bound_id": rep.bound_id, "grid": rep.grid,
            "max_ratio": rep.max_ratio, "argmax_point": rep.argmax_point,
            "slope_fit": rep.slope_fit, "refine_delta": rep.refine_delta,
            "manifest_hash": tag})
        rows.append((name, rep.max_ratio,
                     "" if rep.refine_delta is None else rep.refine_delta))
        stable = rep.refine_delta is None or rep.refine_delta < 0.01
        checks.add(name, math.isfinite(rep.max_ratio) and stable,
                   f"max_ratio={rep.max_ratio:.6g} "
                   f"refine_delta={rep.refine_delta}")
    write_csv(outdir / "bounds.csv", tag,
              ("bound_id", "max_ratio", "refine_delta"), rows)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar([r[0] for r in rows], [r[1] for r in rows])
    ax.set_yscale("log")
    ax.set_ylabel("max LHS/RHS ratio")
    ax.tick_params(axis="x", rotation=60)
    fig.tight_layout()
    _save_fig(fig, outdir / "bounds.svg")


def _pp_probe_values(p, values, cells, inc, probes=()):
    return [float(values[j, i]) for j, i in probes]


def _run_simulate(cfg, outdir, tag, checks):
    model = _build_model(cfg)
    grid = _build_grid(cfg, model)
    scheme = _build_scheme(cfg)
    N, seed = cfg["ensemble.n"], cfg["ensemble.seed"]
    probes = cfg["simulate.probes"]
    if probes is None:
        probes = [(model.T, 0.25), (model.T, 0.5)]
    idx = []
    for t, x in probes:
        if not (0 <= t <= model.T and 0 <= x <= 1):
            raise ConfigError(f"probe ({t}, {x}) outside the domain")
        idx.append((int(round(t / grid.dt)), int(round(x * grid.Nx))))
    fn = partial(_pp_probe_values, probes=tuple(idx))
    recs = np.asarray(analysis.ensemble_map(
        model, grid, scheme, N, seed, fn, workers=cfg["ensemble.workers"]))
    linear = (model.b.kind == "zero" and model.sigma.lipschitz == 0.0
              and model.u0.kind == "zero")
    rows, results = [], []
    for m, (j, i) in enumerate(idx):
        col = recs[:, m]
        mean, var = float(col.mean()), float(col.var(ddof=1)) if N > 1 else 0.0
        entry = {"t": j * grid.dt, "x": i / grid.Nx, "mean": mean,
                 "variance": var, "stderr_variance":
                     var * math.sqrt(2.0 / max(N - 1, 1))}
        if linear:
            entry["law_variance"] = solver.linear_mode_variance(
                model.kernel, j * grid.dt, i / grid.Nx, grid.Nx)
            entry["exact_variance"] = solver.linear_exact_variance(
                model.kernel, j * grid.dt, i / grid.Nx)
            z = abs(var - entry["law_variance"]) / max(entry["stderr_variance"],
                                                       1e-300)
            checks.add(f"linear-law-probe-{m}", z < 3.0,
                       f"variance={var:.6g} law={entry['law_variance']:.6g} "
                       f"z={z:.2f}")
        rows.append(tuple(entry.get(k, "") for k in
                          ("t", "x", "mean", "variance", "law_variance",
                           "exact_variance")))
        results.append(entry)
    write_csv(outdir / "probes.csv", tag,
              ("t", "x", "mean", "variance", "law_variance",
               "exact_variance"), rows)
    payload = {"probes": results, "n": N, "manifest_hash": tag}
    if model.sigma.kind == "zero" and model.b.kind == "zero" \
            and model.u0.kind == "eigenmode":
        noise = sample_noise(seed, 0, grid)
        path = solver.simulate_path(model, grid, scheme, noise)
        k = model.u0.k
        rate = model.kernel.rates(k)
        xg = grid.nodes()
        mode = (np.sin(k * np.pi * xg) if model.u0.family == "sin"
                else np.cos(k * np.pi * xg))
        exact = np.exp(-rate * grid.times())[:, None] * mode[None, :]
        err = float(np.max(np.abs(path.values - exact)))
        payload["eigenmode_max_error"] = err
        checks.add("eigenmode-decay",
                   err < (1e-6 if scheme.scheme == solver.SPECTRAL else 1e-2),
                   f"max_error={err:.3e}")
    write_json(outdir / "probes.json", payload)
    if cfg["simulate.dump_field"]:
        noise = sample_noise(seed, 0, grid)
        path = solver.simulate_path(model, grid, scheme, noise)
        cols = ["t"] + [f"x{i}" for i in range(grid.Nx + 1)]
        rows = [(float(t),) + tuple(float(v) for v in row)
                for t, row in zip(grid.times(), path.values)]
        write_csv(outdir / "field.csv", tag, cols, rows)
        fig, ax = plt.subplots(figsize=(6, 4))
        pm = ax.pcolormesh(grid.nodes(), grid.times(), path.values,
                           shading="nearest")
        fig.colorbar(pm, ax=ax, label="u(t, x)")
        ax.set_xlabel("x")
        ax.set_ylabel("t")
        fig.tight_layout()
        _save_fig(fig, outdir / "field.svg")
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = list(range(len(idx)))
    ax.errorbar(xs, [r["variance"] for r in results],
                yerr=[3 * r["stderr_variance"] for r in results],
                fmt="o", capsize=4, label="ensemble variance (3 SE)")
    if linear:
        ax.plot(xs, [r["law_variance"] for r in results], "x",
                label="discrete law")
    ax.set_xticks(xs)
    ax.set_xticklabels([f"({r['t']:.3g},{r['x']:.3g})" for r in results])
    ax.set_ylabel("variance")
    ax.legend()
    fig.tight_layout()
    _save_fig(fig, outdir / "probes.svg")


def _run_malliavin_check(cfg, outdir, tag, checks):
    model = _build_model(cfg)
    grid = _build_grid(cfg, model)
    scheme = _build_scheme(cfg)
    n_pairs, seed = cfg["malliavin.pairs"], cfg["ensemble.seed"]
    rng = np.random.default_rng(seed)
    noise = sample_noise(seed, 0, grid)
    path = solver.simulate_path(model, grid, scheme, noise)
    rows = []
    worst_bump = worst_adj = 0.0
    for n in range(n_pairs):
        jt = int(rng.integers(grid.Nt // 4, grid.Nt + 1))
        lo_i, hi_i = (1, grid.Nx) if model.kernel.kind == DIRICHLET \
            else (0, grid.Nx + 1)
        ix = int(rng.integers(lo_i, hi_i))
        j0 = int(rng.integers(0, jt))
        i0 = int(rng.integers(0, grid.Nx))
        rel_bump = malliavin.bump_check(model, grid, scheme, noise, (jt, ix),
                                        (j0, i0), h=cfg["malliavin.h"])
        fld = malliavin.derivative_field(path, noise, model, (jt, ix), scheme)
        fwd = malliavin.forward_derivative(path, noise, model, (j0, i0),
                                           (jt, ix), scheme)
        adj = fld.values[j0, i0]
        rel_adj = abs(adj - fwd) / max(abs(fwd), 1e-300)
        rows.append((jt, ix, j0, i0, rel_bump, rel_adj))
        worst_bump = max(worst_bump, rel_bump)
        worst_adj = max(worst_adj, rel_adj)
    write_csv(outdir / "pairs.csv", tag,
              ("jt", "ix", "j0", "i0", "rel_bump", "rel_adjoint"), rows)
    write_json(outdir / "malliavin.json",
               {"pairs": n_pairs, "max_rel_bump": worst_bump,
                "max_rel_adjoint": worst_adj, "manifest_hash": tag})
    checks.add("bump-oracle", worst_bump < cfg["malliavin.tol_bump"],
               f"max_rel={worst_bump:.3e} tol={cfg['malliavin.tol_bump']:g}")
    checks.add("adjoint-forward", worst_adj < cfg["malliavin.tol_adjoint"],
               f"max_rel={worst_adj:.3e} "
               f"tol={cfg['malliavin.tol_adjoint']:g}")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(range(n_pairs), [r[4] for r in rows], "o",
                label="bump central difference")
    ax.semilogy(range(n_pairs), [max(r[5], 1e-18) for r in rows], "s",
                label="forward recursion")
    ax.set_xlabel("pair")
    ax.set_ylabel("relative discrepancy")
    ax.legend()
    fig.tight_layout()
    _save_fig(fig, outdir / "pairs.svg")


def _run_density(cfg, outdir, tag, checks):
    model = _build_model(cfg)
    grid = _build_grid(cfg, model)
    scheme = _build_scheme(cfg)
    region = _build_region(cfg, model)
    N, seed = cfg["ensemble.n"], cfg["ensemble.seed"]
    if N < 1000:
        raise ConfigError("density needs ensemble.n >= 1000 (atom scan)")
    sups = analysis.ensemble_sup(model, grid, scheme, N, seed, region,
                                 workers=cfg["ensemble.workers"])
    samples = np.asarray([s.sup_value for s in sups])
    write_csv(outdir / "sups.csv", tag, ("path_index", "sup"),
              list(enumerate(samples.tolist())))
    est = analysis.kde(samples)
    write_json(outdir / "density.json",
               dict(est.to_dict(), manifest_hash=tag))
    checks.add("kde-normalization", abs(est.integral - 1.0) <= 1e-3,
               f"integral={est.integral:.6f}")
    atoms = analysis.atom_scan(samples, cfg["density.deltas"])
    write_json(outdir / "atoms.json", {"rows": atoms, "manifest_hash": tag})
    masses = [r["max_mass"] for r in atoms]
    ratios = [masses[i] / masses[i + 1] for i in range(len(masses) - 1)]
    checks.add("atom-halving", all(1.7 <= r <= 2.3 for r in ratios),
               f"ratios={['%.3f' % r for r in ratios]}")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(est.grid, est.density)
    ax.set_xlabel("sup over region")
    ax.set_ylabel("estimated density")
    fig.tight_layout()
    _save_fig(fig, outdir / "density.svg")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog([r["delta"] for r in atoms], masses, "o-")
    ax.set_xlabel("window width")
    ax.set_ylabel("max window mass")
    fig.tight_layout()
    _save_fig(fig, outdir / "atoms.svg")


def _run_holder(cfg, outdir, tag, checks):
    model = _build_model(cfg)
    grid = _build_grid(cfg, model)
    scheme = _build_scheme(cfg)
    N, seed = cfg["ensemble.n"], cfg["ensemble.seed"]
    axis, field = cfg["holder.axis"], cfg["holder.field"]
    if field == "solution":
        rep = analysis.holder_ensemble(model, grid, scheme, N, seed, axis,
                                       fixed=cfg["holder.fixed"],
                                       workers=cfg["ensemble.workers"])
    elif field == "malliavin":
        rep = analysis.holder_exponent_malliavin(
            model, grid, scheme, N, seed, axis, fixed=cfg["holder.fixed"],
            stride=cfg["holder.stride"], workers=cfg["ensemble.workers"])
    else:
        raise ConfigError(f"unknown holder field {field!r}")
    write_json(outdir / "holder.json", dict(rep.to_dict(), manifest_hash=tag))
    write_csv(outdir / "medians.csv", tag, ("lag", "separation", "median"),
              [(lag, lag * rep.spacing, med)
               for lag, med in zip(rep.lags, rep.medians)])
    lo, hi = cfg["holder.lo"], cfg["holder.hi"]
    if lo is not None and hi is not None:
        checks.add("holder-window", lo <= rep.slope <= hi,
                   f"slope={rep.slope:.4f} window=[{lo}, {hi}] "
                   f"r2={rep.r2:.4f}")
    else:
        checks.add("holder-fit", not rep.flagged,
                   f"slope={rep.slope:.4f} r2={rep.r2:.4f}")
    fig, ax = plt.subplots(figsize=(6, 4))
    seps = np.asarray(rep.lags, float) * rep.spacing
    ax.loglog(seps, rep.medians, "o", label="ensemble medians")
    fit = np.exp(rep.slope * np.log(seps)
                 + (np.log(rep.medians[0]) - rep.slope * np.log(seps[0])))
    ax.loglog(seps, fit, "--", label=f"slope {rep.slope:.3f}")
    ax.set_xlabel("separation")
    ax.set_ylabel("median |increment|")
    ax.legend()
    fig.tight_layout()
    _save_fig(fig, outdir / "holder.svg")


def _parse_target(cfg, grid, model):
    spec = cfg["smallball.target"]
    if spec is None:
        raise ConfigError("smallball.target is required (format 't:x')")
    t, _, x = spec.partition(":")
    try:
        t, x = float(t), float(x)
    except ValueError as exc:
        raise ConfigError(f"bad target {spec!r}") from exc
    if not (0 < t <= model.T and 0 <= x <= 1):
        raise ConfigError(f"target ({t}, {x}) outside the domain")
    return int(round(t / grid.dt)), int(round(x * grid.Nx))


def _run_smallball(cfg, outdir, tag, checks):
    model = _build_model(cfg)
    grid = _build_grid(cfg, model)
    scheme = _build_scheme(cfg)
    target = _parse_target(cfg, grid, model)
    ys = cfg["smallball.ys"]
    if ys is None:
        raise ConfigError("smallball.ys is required (comma list)")
    rep = analysis.smallball_gamma(model, grid, scheme, target,
                                   cfg["ensemble.n"], ys,
                                   seed=cfg["ensemble.seed"],
                                   workers=cfg["ensemble.workers"])
    write_json(outdir / "smallball.json",
               dict(rep.to_dict(), manifest_hash=tag))
    write_csv(outdir / "tails.csv", tag,
              ("y", "probability", "wilson_lo", "wilson_hi"),
              [(r["y"], r["probability"], r["wilson_lo"], r["wilson_hi"])
               for r in rep.rows])
    probs = [r["probability"] for r in rep.rows]
    checks.add("tail-monotone",
               all(a <= b for a, b in zip(probs, probs[1:])),
               f"probabilities={probs}")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ys, probs, "o-")
    ax.fill_between(ys, [r["wilson_lo"] for r in rep.rows],
                    [r["wilson_hi"] for r in rep.rows], alpha=0.3)
    ax.set_xlabel("y")
    ax.set_ylabel("P(gamma <= y)")
    fig.tight_layout()
    _save_fig(fig, outdir / "smallball.svg")


def _run_escape(cfg, outdir, tag, checks):
    model = _build_model(cfg)
    grid = _build_grid(cfg, model)
    scheme = _build_scheme(cfg)
    times = cfg["escape.times"]
    if times is None:
        times = [4 * grid.dt, 16 * grid.dt, 64 * grid.dt]
    rep = analysis.escape_probability(model, grid, scheme, cfg["ensemble.n"],
                                      times, cfg["escape.mode"],
                                      seed=cfg["ensemble.seed"],
                                      theta=cfg["escape.theta"],
                                      workers=cfg["ensemble.workers"])
    write_json(outdir / "escape.json", dict(rep.to_dict(), manifest_hash=tag))
    write_csv(outdir / "probes.csv", tag,
              ("t", "point", "fraction", "wilson_lo", "wilson_hi"),
              [(r["t"], r["point"], r["fraction"], r["wilson_lo"],
                r["wilson_hi"]) for r in rep.rows])
    min_sup = cfg["escape.min_sup"]
    if min_sup is not None:
        checks.add("sup-exceedance", rep.sup_fraction >= min_sup,
                   f"sup_fraction={rep.sup_fraction:.4f} "
                   f"threshold={min_sup:g}")
    else:
        checks.add("fractions-valid",
                   all(0 <= r["fraction"] <= 1 for r in rep.rows),
                   f"sup_fraction={rep.sup_fraction:.4f}")
    fig, ax = plt.subplots(figsize=(6, 4))
    ts = [r["t"] for r in rep.rows]
    ax.plot(ts, [r["fraction"] for r in rep.rows], "o-")
    ax.fill_between(ts, [r["wilson_lo"] for r in rep.rows],
                    [r["wilson_hi"] for r in rep.rows], alpha=0.3)
    ax.axhline(rep.sup_fraction, ls="--", color="gray",
               label=f"grid-sup exceedance {rep.sup_fraction:.3f}")
    ax.set_xlabel("probe time")
    ax.set_ylabel("exceedance fraction")
    ax.legend()
    fig.tight_layout()
    _save_fig(fig, outdir / "escape.svg")


def _run_argmax_gamma(cfg, outdir, tag, checks):
    model = _build_model(cfg)
    grid = _build_grid(cfg, model)
    scheme = _build_scheme(cfg)
    region = _build_region(cfg, model)
    rep = analysis.argmax_gamma(model, grid, scheme, cfg["ensemble.n"],
                                cfg["ensemble.seed"], region,
                                workers=cfg["ensemble.workers"])
    write_json(outdir / "argmax.json", dict(rep.to_dict(), manifest_hash=tag))
    write_csv(outdir / "gammas.csv", tag, ("path_index", "min_gamma"),
              list(enumerate(rep.min_gammas)))
    checks.add("argmax-positive", rep.quantiles["min"] > 0.0,
               f"ensemble_min={rep.quantiles['min']:.6g} "
               f"median={rep.quantiles['median']:.6g}")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(rep.min_gammas, bins=40)
    ax.axvline(rep.quantiles["min"], color="red", ls="--",
               label=f"min {rep.quantiles['min']:.4g}")
    ax.set_xlabel("min over argmax of gamma")
    ax.set_ylabel("paths")
    ax.legend()
    fig.tight_layout()
    _save_fig(fig, outdir / "argmax.svg")


def _run_report(cfg, outdir, tag, checks):
    src = cfg["report.dir"]
    src = Path(src) if src is not None else outdir
    if not src.is_dir():
        raise ConfigError(f"report directory {src} does not exist")
    rows = []
    for mpath in sorted(src.rglob("manifest.json")):
        data = json.loads(mpath.read_text())
        if data.get("experiment") == "report":
            continue  # never fold a previous summary into the next one
        run = str(mpath.parent.relative_to(src)) or "."
        for row in data.get("checks", []):
            rows.append((run, data.get("experiment", "?"), row["id"],
                         row["status"], row.get("detail", "")))
    if not rows:
        raise ConfigError(f"no manifests with checks under {src}")
    rows.sort()
    widths = [max(len(str(r[k])) for r in rows + [
        ("run", "experiment", "check", "status", "detail")])
        for k in range(4)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(
        ("run", "experiment", "check", "status"), widths)) + "  detail"]
    lines.append("-" * (sum(widths) + 14))
    for r in rows:
        lines.append("  ".join(str(v).ljust(w) for v, w in
                               zip(r[:4], widths)) + "  " + r[4])
    n_fail = sum(1 for r in rows if r[3] == "fail")
    lines.append("")
    lines.append(f"{len(rows)} checks, {n_fail} failed")
    (outdir / "report.txt").write_text("\n".join(lines) + "\n")
    write_json(outdir / "report.json", {
        "rows": [{"run": r[0], "experiment": r[1], "check": r[2],
                  "status": r[3], "detail": r[4]} for r in rows],
        "failed": n_fail, "total": len(rows), "manifest_hash": tag})
    checks.add("all-runs-pass", n_fail == 0,
               f"{n_fail} of {len(rows)} checks failed")
    fig, ax = plt.subplots(figsize=(6, 4))
    status = {"pass": sum(1 for r in rows if r[3] == "pass"), "fail": n_fail}
    ax.bar(list(status), list(status.values()), color=["tab:green",
                                                       "tab:red"])
    ax.set_ylabel("checks")
    fig.tight_layout()
    _save_fig(fig, outdir / "report.svg")


_RUNNERS = {
    "kernels-verify": _run_kernels_verify,
    "simulate": _run_simulate,
    "malliavin-check": _run_malliavin_check,
    "density": _run_density,
    "holder": _run_holder,
    "smallball": _run_smallball,
    "escape": _run_escape,
    "argmax-gamma": _run_argmax_gamma,
    "report": _run_report,
}


def run(config_path, stderr=None):
    """Execute one experiment from a flat config file; return the exit code."""
    stderr = stderr if stderr is not None else sys.stderr
    try:
        text = Path(config_path).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=stderr)
        return 2
    try:
        cfg = RunConfig(parse_config_text(text))
        outdir = Path(os.environ.get(OUTPUT_DIR_ENV) or cfg["output.dir"])
        outdir.mkdir(parents=True, exist_ok=True)
        tag = cfg.hash()
        matplotlib.rcParams["svg.hashsalt"] = tag
        checks = Checks()
        started = time.monotonic()
        grid_label = ""
        if cfg["experiment"] not in ("kernels-verify", "report"):
            grid_label = _build_grid(cfg, _build_model(cfg)).label()
        _RUNNERS[cfg["experiment"]](cfg, outdir, tag, checks)
    except (ConfigError, DomainError, analysis.EmptyRegionError,
            analysis.UndefinedExponentError) as exc:
        print(f"config error: {exc}", file=stderr)
        return 2
    manifest = {
        "artifact_version": ARTIFACT_VERSION,
        "config_hash": tag,
        "experiment": cfg["experiment"],
        "config": cfg.echo().splitlines(),
        "seed": cfg["ensemble.seed"],
        "grid": grid_label,
        "wall_time_s": round(time.monotonic() - started, 3),
        "checks": checks.summary(),
    }
    write_json(outdir / "manifest.json", manifest)
    if checks.failed:
        print(f"check failed: {', '.join(checks.failed)}", file=stderr)
        return 1
    return 0


def report(output_dir, stderr=None):
    """Consolidate manifests under output_dir into one summary table."""
    raw = {"experiment": "report", "output.dir": str(output_dir),
           "report.dir": str(output_dir)}
    cfg = RunConfig(raw)
    stderr = stderr if stderr is not None else sys.stderr
    outdir = Path(os.environ.get(OUTPUT_DIR_ENV) or cfg["output.dir"])
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        tag = cfg.hash()
        matplotlib.rcParams["svg.hashsalt"] = tag
        checks = Checks()
        started = time.monotonic()
        _run_report(cfg, outdir, tag, checks)
    except ConfigError as exc:
        print(f"config error: {exc}", file=stderr)
        return 2
    write_json(outdir / "report_manifest.json", {
        "artifact_version": ARTIFACT_VERSION, "config_hash": tag,
        "experiment": "report", "config": cfg.echo().splitlines(),
        "seed": cfg["ensemble.seed"], "grid": "",
        "wall_time_s": round(time.monotonic() - started, 3),
        "checks": checks.summary()})
    if checks.failed:
        print(f"check failed: {', '.join(checks.failed)}", file=stderr)
        return 1
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="spdelab",
        description="Simulation and verification runs for stochastic heat "
                    "and fourth-order models on [0, 1].")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute one experiment config")
    p_run.add_argument("config", help="flat key=value config file")
    p_rep = sub.add_parser("report", help="summarize manifests in a directory")
    p_rep.add_argument("directory", help="directory holding run outputs")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config)
    return report(args.directory)


if __name__ == "__main__":
    sys.exit(main())
