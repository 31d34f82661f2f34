"""Small 1D finite-volume building blocks shared by the axial solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveInput


def bernoulli(x):
    """B(x) = x / (exp(x) - 1), with B(0) = 1, evaluated without cancellation."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    out = safe / np.expm1(safe)
    return np.where(small, 1.0 - 0.5 * x, out)


def bernoulli_prime(x):
    """Derivative of :func:`bernoulli`, ``B(x) (1 - B(x) - x) / x``, with its
    Taylor series near the origin."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-3
    safe = np.where(small, 1.0, x)
    b = safe / np.expm1(safe)
    out = b * (1.0 - b - safe) / safe
    return np.where(small, -0.5 + x / 6.0 - x**3 / 180.0, out)


def harmonic_mean(a, b):
    return 2.0 * a * b / (a + b)


@dataclass(frozen=True)
class AxialGrid:
    """Nodes ``x[0] = 0 < ... < x[N] = 1`` on the normalized axis."""

    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or x.size < 3 or np.any(np.diff(x) <= 0):
            raise NonPositiveInput("axial grid must be strictly increasing with >= 3 nodes")
        if x[0] != 0.0 or x[-1] != 1.0:
            raise NonPositiveInput("axial grid must span [0, 1]")
        object.__setattr__(self, "x", x)

    @classmethod
    def uniform(cls, n_intervals=1000):
        return cls(np.linspace(0.0, 1.0, n_intervals + 1))

    @classmethod
    def graded(cls, geometry, n_intervals=1000, strength=1.0, features=(), cluster_fraction=0.3,
               cluster_width=1e-6):
        """Node density proportional to ``R(x)**-strength``, plus optional
        geometric clustering at ``features`` (points where coefficients jump).

        A share ``cluster_fraction`` of the nodes is spread over the features
        with density ``1 / (|x - x_k| + cluster_width)``, which gives cells
        growing geometrically away from each feature.
        """
        features = [float(f) for f in features if 0.0 < f < 1.0]
        pieces = [np.linspace(0.0, 1.0, 20 * n_intervals + 1)]
        offsets = np.logspace(np.log10(cluster_width) - 1, 0, 400)
        for f in features:
            pieces.append(np.clip(np.concatenate([f - offsets, [f], f + offsets]), 0.0, 1.0))
        fine = np.unique(np.concatenate(pieces))

        def normalized(d):
            integral = np.sum(0.5 * (d[1:] + d[:-1]) * np.diff(fine))
            return d / integral

        density = normalized(geometry.radius(fine) ** (-strength))
        if features:
            share = cluster_fraction / len(features)
            density = (1 - cluster_fraction) * density + sum(
                share * normalized(1.0 / (np.abs(fine - f) + cluster_width)) for f in features
            )
        cdf = np.concatenate(([0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(fine))))
        cdf /= cdf[-1]
        x = np.interp(np.linspace(0.0, 1.0, n_intervals + 1), cdf, fine)
        x[0], x[-1] = 0.0, 1.0
        return cls(x)

    @property
    def n_intervals(self) -> int:
        return self.x.size - 1

    @property
    def h(self):
        return np.diff(self.x)

    @property
    def midpoints(self):
        return 0.5 * (self.x[1:] + self.x[:-1])


def face_average(values, h):
    """Length-weighted mean of face values.

    Face fluxes of the form ``c * diff(u) / h`` carry roundoff of order
    ``eps * c * |u| / h``; weighting by ``h`` keeps tiny cells from
    dominating the average.
    """
    h = np.asarray(h, dtype=float)
    return float(np.sum(np.asarray(values) * h) / np.sum(h))


def solve_conservative(coef_faces, h, left, right):
    """Solve ``(c u')' = 0`` with Dirichlet ends on a 1D grid.

    ``coef_faces`` holds the face coefficients c_{i+1/2}.  The three-point
    flux balance of this problem is solved exactly by summing face
    resistances ``h / c``, so the discrete flux ``c_f * diff(u) / h`` is the
    same on every face.

    Returns
    -------
    u : ndarray
        Nodal solution.
    flux : float
        The common discrete flux ``c_f * (u[i+1] - u[i]) / h[i]``.
    """
    resistance = np.asarray(h, dtype=float) / np.asarray(coef_faces, dtype=float)
    total = resistance.sum()
    flux = (right - left) / total
    u = np.empty(resistance.size + 1)
    u[0] = left
    u[1:] = left + flux * np.cumsum(resistance)
    u[-1] = right
    return u, flux
