"""Phase-space views of the code states.

Wigner grids for mixtures of coherent states (a Gaussian bump per mixture
point, normalized to unit integral) and the stellar polynomial of a
truncated state whose root structure measures how far the state is from
Gaussian reach.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .codestates import CodeParams, code_amplitude
from .fock import FockVector


@dataclass(frozen=True)
class GridSpec:
    x_range: tuple[float, float]
    p_range: tuple[float, float]
    points: int = 201

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("grid needs at least 2 points per axis")
        if not (self.x_range[0] < self.x_range[1] and self.p_range[0] < self.p_range[1]):
            raise ValueError("empty grid range")

    @classmethod
    def centered(cls, halfwidth: float, points: int = 201) -> "GridSpec":
        return cls((-halfwidth, halfwidth), (-halfwidth, halfwidth), points)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        xs = np.linspace(self.x_range[0], self.x_range[1], self.points)
        ps = np.linspace(self.p_range[0], self.p_range[1], self.points)
        return xs, ps


@dataclass(frozen=True)
class WignerGrid:
    xs: np.ndarray
    ps: np.ndarray
    values: np.ndarray    # shape (len(xs), len(ps))

    def __post_init__(self):
        for name in ("xs", "ps", "values"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.values.shape != (self.xs.size, self.ps.size):
            raise ValueError("values shape does not match axes")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite grid values")

    def integral(self) -> float:
        dx = self.xs[1] - self.xs[0]
        dp = self.ps[1] - self.ps[0]
        return float(self.values.sum() * dx * dp)

    def csv_lines(self):
        yield "x,p,w"
        for i, x in enumerate(self.xs):
            for j, p in enumerate(self.ps):
                yield f"{x:.17g},{p:.17g},{self.values[i, j]:.17g}"


def wigner_mixture(points: list[tuple[float, complex]], grid: GridSpec) -> WignerGrid:
    """Wigner function of sum_j w_j |alpha_j><alpha_j| on a uniform grid.

    W(x, p) = (1/pi) sum_j w_j exp(-|alpha_j - (x + i p)|^2), which
    integrates to sum_j w_j.
    """
    if not points:
        raise ValueError("empty mixture")
    weights = np.array([w for w, _ in points], dtype=np.float64)
    if weights.min() < 0:
        raise ValueError("negative mixture weight")
    alphas = np.array([complex(a) for _, a in points])
    xs, ps = grid.axes()
    z = xs[:, None] + 1j * ps[None, :]
    vals = np.zeros(z.shape)
    for w, a in zip(weights, alphas):
        vals += w * np.exp(-np.abs(a - z) ** 2)
    return WignerGrid(xs, ps, vals / math.pi)


def code_state_points(b: int, params: CodeParams) -> list[tuple[float, complex]]:
    w = 1.0 / params.M
    return [(w, code_amplitude(m, b, params.t, params.M)) for m in range(params.M)]


def wigner_sigma(b: int, params: CodeParams, grid: GridSpec | None = None) -> WignerGrid:
    """Wigner grid of the average code state; default window [-(t+4), t+4]^2."""
    if grid is None:
        grid = GridSpec.centered(params.t + 4.0)
    return wigner_mixture(code_state_points(b, params), grid)


@dataclass(frozen=True)
class StellarPolynomial:
    """Coefficients d_n = c_n / sqrt(n!) of the state's stellar function."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if c.size == 0 or c[-1] == 0:
            raise ValueError("leading coefficient must be nonzero")

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def origin_multiplicity(self) -> int:
        return int(np.flatnonzero(self.coeffs)[0])

    def __call__(self, alpha: complex) -> complex:
        return complex(np.polynomial.polynomial.polyval(alpha, self.coeffs))


def stellar_polynomial(v: FockVector) -> StellarPolynomial:
    """Polynomial sum_n c_n alpha^n / sqrt(n!) with trailing zeros stripped."""
    c = np.asarray(v.amps)
    nz = np.flatnonzero(c)
    if nz.size == 0:
        raise ValueError("zero state has no stellar polynomial")
    n = np.arange(nz[-1] + 1)
    return StellarPolynomial(c[: nz[-1] + 1] * np.exp(-0.5 * gammaln(n + 1)))


def stellar_roots(poly: StellarPolynomial, radius: float) -> np.ndarray:
    """Roots inside |alpha| <= radius, origin multiplicity included.

    Found as companion-matrix eigenvalues of the polynomial with the
    origin factor alpha^mult divided out.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    mult = poly.origin_multiplicity()
    reduced = poly.coeffs[mult:]
    roots = np.zeros(0, dtype=complex)
    if reduced.size > 1:
        roots = np.polynomial.polynomial.polyroots(reduced)
    roots = np.concatenate([np.zeros(mult, dtype=complex), roots])
    inside = roots[np.abs(roots) <= radius]
    return inside[np.lexsort((inside.imag, inside.real, np.abs(inside)))]


def default_root_radius(v: FockVector) -> float:
    """sqrt(N) separates physical zeros from truncation artifacts."""
    return math.sqrt(max(v.cutoff, 1))


def cluster_roots(roots: np.ndarray, tol: float = 1e-6) -> list[tuple[complex, int]]:
    """Greedy clustering of near-coincident roots into (center, size) pairs."""
    remaining = list(roots)
    clusters: list[tuple[complex, int]] = []
    while remaining:
        seed = remaining.pop(0)
        members = [seed]
        rest = []
        for r in remaining:
            (members if abs(r - seed) <= tol else rest).append(r)
        remaining = rest
        clusters.append((complex(np.mean(members)), len(members)))
    return clusters


def root_report(v: FockVector, radius: float | None = None) -> dict:
    """Structured root listing for one state vector."""
    poly = stellar_polynomial(v)
    r = default_root_radius(v) if radius is None else radius
    roots = stellar_roots(poly, r)
    return {
        "degree": poly.degree,
        "radius": r,
        "origin_multiplicity": poly.origin_multiplicity(),
        "roots": [
            {"re": float(c.real), "im": float(c.imag), "multiplicity": n}
            for c, n in cluster_roots(roots)
        ],
    }
