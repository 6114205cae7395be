"""Named scalar coefficients for drift and diffusion terms.

Each coefficient is a pointwise map v -> f(v) carrying its exact derivative,
vectorized over arrays.  Instances are plain data dispatching on ``kind``, so
they pickle cleanly across worker processes and reconstruct from manifest
entries; callbacks never cross a process or file boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("zero", "identity", "sin", "affine-sin", "tabulated")

_ALLOWED_PARAMS = {
    "zero": frozenset(),
    "identity": frozenset({"scale"}),
    "sin": frozenset({"amp", "freq"}),
    "affine-sin": frozenset({"offset", "amp"}),
    "tabulated": frozenset({"knots", "values"}),
}


class UnknownCoefficientError(ValueError):
    pass


@dataclass(frozen=True)
class Coefficient:
    """Scalar map with exact derivative; build via make()."""

    kind: str
    params: tuple = ()

    def _p(self, key, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default

    def _table(self):
        return (np.asarray(self._p("knots"), dtype=float),
                np.asarray(self._p("values"), dtype=float))

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(v)
        if self.kind == "identity":
            return self._p("scale", 1.0) * v
        if self.kind == "sin":
            return self._p("amp", 1.0) * np.sin(self._p("freq", 1.0) * v)
        if self.kind == "affine-sin":
            return self._p("offset", 0.0) + self._p("amp", 1.0) * np.sin(v)
        knots, vals = self._table()
        return np.interp(v, knots, vals)

    def d(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(v)
        if self.kind == "identity":
            return np.full_like(v, self._p("scale", 1.0))
        if self.kind == "sin":
            amp, freq = self._p("amp", 1.0), self._p("freq", 1.0)
            return amp * freq * np.cos(freq * v)
        if self.kind == "affine-sin":
            return self._p("amp", 1.0) * np.cos(v)
        knots, vals = self._table()
        slopes = np.diff(vals) / np.diff(knots)
        idx = np.clip(np.searchsorted(knots, v, side="right") - 1,
                      0, len(slopes) - 1)
        # np.interp clamps outside the table, so the derivative is 0 there
        return np.where((v < knots[0]) | (v > knots[-1]), 0.0, slopes[idx])

    @property
    def lipschitz(self):
        if self.kind == "zero":
            return 0.0
        if self.kind == "identity":
            return abs(self._p("scale", 1.0))
        if self.kind == "sin":
            return abs(self._p("amp", 1.0) * self._p("freq", 1.0))
        if self.kind == "affine-sin":
            return abs(self._p("amp", 1.0))
        knots, vals = self._table()
        return float(np.max(np.abs(np.diff(vals) / np.diff(knots))))

    def range_bounds(self):
        """(inf f, sup f) where finite, else None."""
        if self.kind == "zero":
            return (0.0, 0.0)
        if self.kind == "identity":
            return None
        if self.kind == "sin":
            a = abs(self._p("amp", 1.0))
            return (-a, a)
        if self.kind == "affine-sin":
            off, a = self._p("offset", 0.0), abs(self._p("amp", 1.0))
            return (off - a, off + a)
        _, vals = self._table()
        return (float(vals.min()), float(vals.max()))

    def describe(self):
        return {"kind": self.kind,
                "params": {k: (list(v) if isinstance(v, tuple) else v)
                           for k, v in self.params}}


def make(kind, **params):
    if kind not in KINDS:
        raise UnknownCoefficientError(
            f"unknown coefficient {kind!r}; known: {', '.join(KINDS)}")
    bad = set(params) - _ALLOWED_PARAMS[kind]
    if bad:
        raise UnknownCoefficientError(
            f"coefficient {kind!r} does not accept {sorted(bad)}")
    if kind == "tabulated":
        knots = np.asarray(params.get("knots", ()), dtype=float)
        vals = np.asarray(params.get("values", ()), dtype=float)
        if knots.ndim != 1 or knots.shape != vals.shape or knots.size < 2:
            raise ValueError("tabulated needs matching 1-d knots/values, >= 2 points")
        if not np.all(np.diff(knots) > 0):
            raise ValueError("tabulated knots must be strictly increasing")
        params = {"knots": tuple(knots.tolist()), "values": tuple(vals.tolist())}
    frozen = tuple(sorted((k, float(v) if np.isscalar(v) else v)
                          for k, v in params.items()))
    return Coefficient(kind=kind, params=frozen)


def default_drift():
    """b(u) = sin u."""
    return make("sin")


def default_sigma():
    """sigma(u) = 1.25 + 0.25 sin u; elliptic with constant 1.5."""
    return make("affine-sin", offset=1.25, amp=0.25)
