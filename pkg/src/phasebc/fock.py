"""Truncated single-mode Fock-space numerics.

Dense complex linear algebra on span{|0>, ..., |N>}: coherent states,
displacement operators, trace norm, Helstrom discrimination, photon
counting, tensor products and partial traces.  Everything here is a pure
function of its inputs; stochastic operations take an explicit seeded
``numpy.random.Generator``, so identical seeds give identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.special import gammainc, gammaln

# Numeric tolerance defaults: double precision headroom over truncation error.
HERMITICITY_TOL = 1e-12
EIGENVALUE_FLOOR = -1e-10
TRACE_TOL = 1e-9
NORM_SLACK = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FockVector:
    """Complex amplitude vector on the truncated number basis.

    Sub-normalized vectors are allowed (truncations of normalized states);
    the squared norm may not exceed 1 beyond rounding slack.
    """

    cutoff: int
    amps: np.ndarray

    def __post_init__(self):
        if self.cutoff < 0:
            raise ValueError("cutoff must be non-negative")
        amps = np.array(self.amps, dtype=np.complex128)
        if amps.shape != (self.cutoff + 1,):
            raise ValueError(
                f"expected {self.cutoff + 1} amplitudes, got shape {amps.shape}"
            )
        if not np.all(np.isfinite(amps.view(np.float64))):
            raise ValueError("amplitudes must be finite")
        n2 = float(np.vdot(amps, amps).real)
        if n2 > 1.0 + NORM_SLACK:
            raise ValueError(f"squared norm {n2} exceeds 1")
        object.__setattr__(self, "amps", _readonly(amps))

    @property
    def dim(self) -> int:
        return self.cutoff + 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def inner(self, other: "FockVector") -> complex:
        if other.cutoff != self.cutoff:
            raise ValueError("cutoff mismatch")
        return complex(np.vdot(self.amps, other.amps))

    def outer(self) -> "FockOperator":
        return FockOperator(self.cutoff, np.outer(self.amps, self.amps.conj()))


@dataclass(frozen=True)
class FockOperator:
    """Dense complex matrix on the truncated number basis."""

    cutoff: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.cutoff < 0:
            raise ValueError("cutoff must be non-negative")
        m = np.array(self.matrix, dtype=np.complex128)
        d = self.cutoff + 1
        if m.shape != (d, d):
            raise ValueError(f"expected {d}x{d} matrix, got shape {m.shape}")
        object.__setattr__(self, "matrix", _readonly(m))

    @property
    def dim(self) -> int:
        return self.cutoff + 1

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return float(np.abs(self.matrix - self.matrix.conj().T).max()) <= tol

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))


def assert_hermitian(op: FockOperator, tol: float = HERMITICITY_TOL) -> None:
    defect = float(np.abs(op.matrix - op.matrix.conj().T).max())
    if defect > tol:
        raise ValueError(f"operator is not hermitian (defect {defect:.3e})")


def assert_density(op: FockOperator, mass: float = 1.0,
                   trace_tol: float = TRACE_TOL) -> None:
    """Check hermiticity, positivity and trace of a (sub-normalized) density."""
    assert_hermitian(op)
    eigs = np.linalg.eigvalsh(op.matrix)
    if eigs.min() < EIGENVALUE_FLOOR:
        raise ValueError(f"negative eigenvalue {eigs.min():.3e}")
    tr = float(np.trace(op.matrix).real)
    if abs(tr - mass) > trace_tol:
        raise ValueError(f"trace {tr} deviates from declared mass {mass}")


def cutoff_for_energy(energy: float, tail_tol: float) -> int:
    """Smallest N whose Poisson(energy) tail beyond N is below tail_tol."""
    if not math.isfinite(energy) or energy < 0:
        raise ValueError(f"invalid energy {energy}")
    if not 0.0 < tail_tol < 1.0:
        raise ValueError(f"tail_tol must lie in (0, 1), got {tail_tol}")
    if energy == 0.0:
        return 0
    n = 0
    # P(X > n) for Poisson(E) is the regularized lower incomplete gamma.
    while gammainc(n + 1, energy) >= tail_tol:
        n += 1
    return n


def density_cutoff(energy: float, tail_tol: float = 1e-12) -> int:
    """Truncation policy for density-matrix work: tail cutoff plus margin."""
    return cutoff_for_energy(energy, tail_tol) + math.ceil(6.0 * math.sqrt(energy)) + 10


def coherent_vector(alpha: complex, cutoff: int) -> FockVector:
    """Coherent state |alpha> truncated at the given photon number."""
    alpha = complex(alpha)
    amps = np.zeros(cutoff + 1, dtype=np.complex128)
    amps[0] = math.exp(-abs(alpha) ** 2 / 2.0)
    for n in range(1, cutoff + 1):
        amps[n] = amps[n - 1] * alpha / math.sqrt(n)
    return FockVector(cutoff, amps)


def poisson_weights(energy: float, cutoff: int) -> np.ndarray:
    """Photon number distribution e^-E E^n / n! for n = 0..cutoff."""
    if energy == 0.0:
        w = np.zeros(cutoff + 1)
        w[0] = 1.0
        return w
    n = np.arange(cutoff + 1)
    return np.exp(-energy + n * math.log(energy) - gammaln(n + 1))


def overlap_prob(alpha: complex, beta: complex) -> float:
    """|<alpha|beta>|^2 = exp(-|alpha-beta|^2) for coherent states."""
    return math.exp(-abs(complex(alpha) - complex(beta)) ** 2)


def annihilation_matrix(cutoff: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, cutoff + 1, dtype=np.float64)), k=1).astype(
        np.complex128
    )


def displacement_matrix(beta: complex, cutoff: int) -> FockOperator:
    """Displacement operator on the truncated space.

    Built as the matrix exponential of the truncated generator
    beta*a^dag - conj(beta)*a.  Exact only in the limit of large cutoff;
    accurate on the low-photon-number subspace (see the unitarity checks
    in the tests).
    """
    beta = complex(beta)
    a = annihilation_matrix(cutoff)
    gen = beta * a.conj().T - beta.conjugate() * a
    return FockOperator(cutoff, expm(gen))


def trace_norm(op: FockOperator) -> float:
    """Sum of absolute eigenvalues of a hermitian operator."""
    assert_hermitian(op)
    return float(np.abs(np.linalg.eigvalsh(op.matrix)).sum())


def helstrom_success(rho0: FockOperator, rho1: FockOperator,
                     mass: float = 1.0) -> float:
    """Optimal success probability of discriminating two equiprobable states."""
    if rho0.cutoff != rho1.cutoff:
        raise ValueError("cutoff mismatch")
    assert_density(rho0, mass=mass)
    assert_density(rho1, mass=mass)
    diff = FockOperator(rho0.cutoff, rho0.matrix - rho1.matrix)
    return 0.5 + trace_norm(diff) / 4.0


def sample_photon_count(alpha: complex, rng: np.random.Generator) -> int:
    """Photon-number measurement on |alpha>: Poisson with mean |alpha|^2."""
    return int(rng.poisson(abs(complex(alpha)) ** 2))


def tensor_vectors(vectors: list[FockVector]) -> FockVector:
    if not vectors:
        raise ValueError("empty tensor product")
    amps = vectors[0].amps
    for v in vectors[1:]:
        amps = np.kron(amps, v.amps)
    return FockVector(amps.shape[0] - 1, amps)


def tensor_operators(ops: list[FockOperator]) -> FockOperator:
    if not ops:
        raise ValueError("empty tensor product")
    m = ops[0].matrix
    for op in ops[1:]:
        m = np.kron(m, op.matrix)
    return FockOperator(m.shape[0] - 1, m)


def partial_trace(op: FockOperator, dims: tuple[int, int],
                  keep: int) -> FockOperator:
    """Reduce a bipartite operator to the kept subsystem (0 = first)."""
    d0, d1 = dims
    if d0 * d1 != op.dim:
        raise ValueError(f"dims {dims} incompatible with dimension {op.dim}")
    if keep not in (0, 1):
        raise ValueError("keep must be 0 or 1")
    m = op.matrix.reshape(d0, d1, d0, d1)
    if keep == 0:
        red = np.einsum("ikjk->ij", m)
        return FockOperator(d0 - 1, red)
    red = np.einsum("kikj->ij", m)
    return FockOperator(d1 - 1, red)
