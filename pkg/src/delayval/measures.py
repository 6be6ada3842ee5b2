"""Signed measures of bounded variation on [-d, 0]: atoms plus a
piecewise-constant density.

These are the coefficient objects of the delayed income dynamics: the
drift delay measure, the per-asset volatility delay measures, and their
risk-adjusted combination.  A measure is represented exactly as a list
of point masses plus cell values of a piecewise-constant density on a
uniform grid over [-d, 0].  The representation is closed under linear
combination, and integrates atoms exactly; density terms use the
midpoint rule (O(h^2) in the cell width h).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DelayMeasure",
    "WindowMismatchError",
    "combine_risk_adjusted",
]


class WindowMismatchError(ValueError):
    """Raised when combining measures defined on different delay windows."""


def _as_density(values, cells: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size != cells:
        raise ValueError(f"density needs exactly {cells} cell values, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class DelayMeasure:
    """A signed measure on [-d, 0] with finite total variation.

    atoms   -- sequence of (location, mass) with location in [-d, 0];
               duplicates are merged and atoms kept sorted by location.
    density -- per-cell values of a piecewise-constant density on a
               uniform grid of ``cells`` cells over [-d, 0]; empty array
               means no absolutely continuous part.
    """

    delay_window: float
    atoms: tuple[tuple[float, float], ...] = ()
    density: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if not self.delay_window > 0:
            raise ValueError(f"delay window must be positive, got {self.delay_window}")
        merged: dict[float, float] = {}
        for loc, mass in self.atoms:
            loc, mass = float(loc), float(mass)
            if not (-self.delay_window <= loc <= 0.0):
                raise ValueError(f"atom location {loc} outside [-{self.delay_window}, 0]")
            merged[loc] = merged.get(loc, 0.0) + mass
        object.__setattr__(self, "atoms", tuple(sorted(merged.items())))
        dens = np.array(self.density, dtype=float, copy=True)
        if dens.ndim != 1:
            raise ValueError("density must be a 1-d array of cell values")
        if dens.size and not np.all(np.isfinite(dens)):
            raise ValueError("density cells must be finite")
        dens.setflags(write=False)
        object.__setattr__(self, "density", dens)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DelayMeasure):
            return NotImplemented
        if self.delay_window != other.delay_window or self.atoms != other.atoms:
            return False
        a, b = self.density, other.density
        if not a.size and not b.size:
            return True
        if not a.size:
            return not np.any(b)
        if not b.size:
            return not np.any(a)
        return a.size == b.size and bool(np.all(a == b))

    # -- basic structure ------------------------------------------------

    @property
    def cells(self) -> int:
        return self.density.size

    @property
    def cell_width(self) -> float:
        if not self.cells:
            raise ValueError("measure has no density part")
        return self.delay_window / self.cells

    def cell_midpoints(self) -> np.ndarray:
        h = self.cell_width
        return -self.delay_window + (np.arange(self.cells) + 0.5) * h

    @classmethod
    def zero(cls, delay_window: float) -> "DelayMeasure":
        return cls(delay_window)

    @classmethod
    def point_mass(cls, delay_window: float, loc: float, mass: float = 1.0) -> "DelayMeasure":
        return cls(delay_window, atoms=((loc, mass),))

    @classmethod
    def uniform(cls, delay_window: float, level: float, cells: int = 256) -> "DelayMeasure":
        return cls(delay_window, density=np.full(cells, float(level)))

    def total_variation(self) -> float:
        tv = sum(abs(m) for _, m in self.atoms)
        if self.cells:
            tv += float(np.sum(np.abs(self.density))) * self.cell_width
        return tv

    def total_mass(self) -> float:
        mass = sum(m for _, m in self.atoms)
        if self.cells:
            mass += float(np.sum(self.density)) * self.cell_width
        return mass

    def is_nonnegative(self) -> bool:
        """True iff every atom mass and every density cell is >= 0."""
        if any(m < 0.0 for _, m in self.atoms):
            return False
        return not self.cells or bool(np.all(self.density >= 0.0))

    def is_zero(self) -> bool:
        return not self.atoms and (not self.cells or not np.any(self.density))

    # -- linear structure ------------------------------------------------

    def scaled(self, c: float) -> "DelayMeasure":
        return DelayMeasure(
            self.delay_window,
            atoms=tuple((loc, c * m) for loc, m in self.atoms),
            density=c * self.density if self.cells else self.density,
        )

    def __add__(self, other: "DelayMeasure") -> "DelayMeasure":
        if not isinstance(other, DelayMeasure):
            return NotImplemented
        if other.delay_window != self.delay_window:
            raise WindowMismatchError(
                f"delay windows differ: {self.delay_window} vs {other.delay_window}")
        merged: dict[float, float] = {}
        for loc, m in self.atoms + other.atoms:
            merged[loc] = merged.get(loc, 0.0) + m
        atoms = tuple(sorted(merged.items()))
        if self.cells and other.cells:
            if self.cells != other.cells:
                raise WindowMismatchError(
                    f"density grids differ: {self.cells} vs {other.cells} cells")
            density = self.density + other.density
        elif self.cells:
            density = self.density
        else:
            density = other.density
        return DelayMeasure(self.delay_window, atoms=atoms, density=density)

    def __mul__(self, c: float) -> "DelayMeasure":
        return self.scaled(float(c))

    __rmul__ = __mul__

    def __neg__(self) -> "DelayMeasure":
        return self.scaled(-1.0)

    def __sub__(self, other: "DelayMeasure") -> "DelayMeasure":
        return self + other.scaled(-1.0)

    # -- integration -----------------------------------------------------

    def integrate(self, f: Callable[[float], float]) -> float:
        """Integral of f against the measure over [-d, 0].

        Atoms are evaluated exactly; the density part uses the midpoint
        rule on its own grid.
        """
        total = 0.0
        for loc, m in self.atoms:
            total += m * f(loc)
        if self.cells:
            h = self.cell_width
            mids = self.cell_midpoints()
            vals = np.array([f(t) for t in mids])
            total += h * float(np.dot(self.density, vals))
        return total

    def exp_integral(self, lam):
        """Integral of e^{lam * s} over [-d, 0] against the measure.

        lam may be a scalar or an array (evaluated pointwise).
        """
        if isinstance(lam, np.ndarray):
            total = np.zeros(lam.shape)
            for loc, m in self.atoms:
                total += m * np.exp(lam * loc)
            if self.cells:
                h = self.cell_width
                total += h * (np.exp(np.outer(lam, self.cell_midpoints())) @ self.density)
            return total
        total = 0.0
        for loc, m in self.atoms:
            total += m * math.exp(lam * loc)
        if self.cells:
            h = self.cell_width
            total += h * float(np.dot(self.density, np.exp(lam * self.cell_midpoints())))
        return total

    def partial_exp_integral(self, lam: float, s: float) -> float:
        """Exponentially discounted mass of the restriction to [-d, s]:
        integral of e^{-lam (s - tau)} m(dtau) over tau in [-d, s].

        Atoms exactly at s are included (closed upper endpoint).  A
        density cell straddling s contributes its sub-interval [lo, s]
        via the midpoint rule.
        """
        if not (-self.delay_window <= s <= 0.0):
            raise ValueError(f"s={s} outside [-{self.delay_window}, 0]")
        total = 0.0
        for loc, m in self.atoms:
            if loc <= s:
                total += m * math.exp(-lam * (s - loc))
        if self.cells:
            h = self.cell_width
            d = self.delay_window
            for j in range(self.cells):
                lo = -d + j * h
                hi = lo + h
                if hi <= s:
                    mid = lo + 0.5 * h
                    total += self.density[j] * h * math.exp(-lam * (s - mid))
                elif lo < s:
                    width = s - lo
                    mid = 0.5 * (lo + s)
                    total += self.density[j] * width * math.exp(-lam * (s - mid))
                else:
                    break
        return total

    # -- time-grid discretization -----------------------------------------

    def ring_stencil(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """Weights for evaluating the delay integral on a uniform time grid.

        Returns (lags, weights) such that, for a trajectory sampled at
        step dt, integral of X(t + tau) m(dtau) ~= sum_j w_j X(t - lags_j dt).
        Atoms at off-grid locations are split linearly between the two
        bracketing grid points; density cells contribute their midpoint
        value, again linearly interpolated.  Lags run in [0, d/dt].
        """
        n_lags = self.delay_window / dt
        L = int(round(n_lags))
        if abs(n_lags - L) > 1e-9 * max(1.0, L):
            raise ValueError(f"dt={dt} does not divide the delay window {self.delay_window}")
        dense = np.zeros(L + 1)

        def deposit(tau: float, weight: float) -> None:
            pos = -tau / dt  # lag in units of dt, in [0, L]
            k = int(math.floor(pos + 1e-9))
            frac = pos - k
            if frac < 1e-9 or k >= L:
                dense[min(k, L)] += weight
            elif frac > 1.0 - 1e-9:
                dense[k + 1] += weight
            else:
                dense[k] += weight * (1.0 - frac)
                dense[k + 1] += weight * frac

        for loc, m in self.atoms:
            deposit(loc, m)
        if self.cells:
            h = self.cell_width
            for mid, v in zip(self.cell_midpoints(), self.density):
                deposit(mid, v * h)
        lags = np.nonzero(dense)[0]
        return lags.astype(np.int64), dense[lags]

    # -- JSON fragment ----------------------------------------------------

    def to_json(self) -> dict:
        out: dict = {"atoms": [{"loc": loc, "mass": m} for loc, m in self.atoms]}
        if self.cells:
            out["density"] = {"cells": int(self.cells), "values": [float(v) for v in self.density]}
        return out

    @classmethod
    def from_json(cls, fragment: dict, delay_window: float) -> "DelayMeasure":
        atoms = tuple((a["loc"], a["mass"]) for a in fragment.get("atoms", ()))
        dens = fragment.get("density")
        if dens is None:
            density = np.zeros(0)
        else:
            density = _as_density(dens["values"], int(dens["cells"]))
        return cls(delay_window, atoms=atoms, density=density)


def combine_risk_adjusted(
    phi: DelayMeasure,
    phi_vec: Sequence[DelayMeasure],
    kappa: Sequence[float],
) -> DelayMeasure:
    """Risk-adjusted combination phi - sum_i kappa_i phi_i.

    All measures must share the delay window (and density grid, where
    both parts are present); atoms are merged by location and densities
    summed gridwise.
    """
    if len(phi_vec) != len(kappa):
        raise ValueError(f"got {len(phi_vec)} measures for {len(kappa)} risk prices")
    out = phi
    for k_i, m_i in zip(kappa, phi_vec):
        if m_i.delay_window != phi.delay_window:
            raise WindowMismatchError(
                f"delay windows differ: {phi.delay_window} vs {m_i.delay_window}")
        out = out - m_i.scaled(float(k_i))
    return out
