"""Delayed-choice attack kit: purifications, switching unitary, POVMs.

A dishonest sender can hold a purification of the average code state and
postpone her bit choice.  This module builds the two purifications, the
unitary that switches between them, and the two measurement families that
steer the receiver's half onto code states, then verifies the whole
construction numerically in the truncated space.

Sector conventions.  The average code state for bit b has rank M; its
eigenvectors phi_{r,b} live on disjoint photon-number residue classes
r mod M.  The switching unitary is assembled from the b=1 eigenprojectors
(the only choice that maps the b=0 sectors onto the b=1 sectors), composed
with the half-step number-phase rotation R = exp(i pi n/M).  The second
POVM is obtained from the first by conjugation with R alone: R shifts the
measurement's phase grid by the half step that separates the two code
books, which is exactly what makes the receiver's conditional states land
on b=1 code states.  Conjugating with the full switching unitary instead
would cancel that half step and steer onto the wrong grid; the distinction
only matters for the conditional states, not for the outcome law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .codestates import CodeParams, EigenSystem, code_amplitude, eigen_sigma
from .fock import FockOperator, FockVector, coherent_vector

LAMBDA_FLOOR = 1e-14
DEFAULT_T_LIMIT = 2.0
DEFAULT_M_LIMIT = 8


class DegenerateEigenvalue(Exception):
    """An eigenvalue fell below the floor where 1/sqrt(lambda) is unusable."""


@dataclass(frozen=True)
class MayersKit:
    """Everything needed to run and verify the delayed-choice attack."""

    params: CodeParams
    eigen0: EigenSystem
    eigen1: EigenSystem
    purification0: FockVector     # (N+1)^2 amplitudes, A factor major
    purification1: FockVector
    U: FockOperator               # switching unitary on the truncated space
    povm0: tuple[FockOperator, ...]   # M projectors plus the remainder element
    povm1: tuple[FockOperator, ...]
    discarded_mass: float

    @property
    def dim(self) -> int:
        return self.params.cutoff + 1

    def purification_matrix(self, b: int) -> np.ndarray:
        vec = self.purification1 if b else self.purification0
        d = self.dim
        return vec.amps.reshape(d, d)


def _active_sectors(eigen: EigenSystem, floor: float) -> np.ndarray:
    return np.flatnonzero(eigen.values > floor)


def build_purification(b: int, params: CodeParams,
                       lambda_floor: float = LAMBDA_FLOOR,
                       drop_below_floor: bool = False) -> FockVector:
    """Rank-M purification sum_r lambda_r^{-1/2} phi_{r,b} (x) phi_{r,b}.

    Raises DegenerateEigenvalue when a sector eigenvalue is at or below the
    floor, unless drop_below_floor is set, in which case that sector is
    omitted (the vector then carries slightly less than unit norm).
    """
    eigen = eigen_sigma(b, params)
    low = eigen.values <= lambda_floor
    if low.any() and not drop_below_floor:
        r = int(np.argmax(low))
        raise DegenerateEigenvalue(
            f"lambda_{r} = {eigen.values[r]:.3e} at or below floor {lambda_floor}"
        )
    d = params.cutoff + 1
    psi = np.zeros((d, d), dtype=complex)
    for r in _active_sectors(eigen, lambda_floor):
        v = eigen.vectors[r].amps
        psi += np.outer(v, v) / math.sqrt(eigen.values[r])
    return FockVector(d * d - 1, psi.reshape(-1))


def build_U(params: CodeParams) -> FockOperator:
    """Switching unitary: b=1 eigenprojector phases after the half-step rotation.

    Maps each normalized b=0 eigenvector onto its b=1 counterpart, hence
    conjugates sigma_0 into sigma_1 and sends one purification to the other
    when applied to both factors.
    """
    eigen1 = eigen_sigma(1, params)
    d = params.cutoff + 1
    rotation = np.exp(1j * math.pi * np.arange(d) / params.M)
    U = np.zeros((d, d), dtype=complex)
    for r in _active_sectors(eigen1, LAMBDA_FLOOR):
        v = eigen1.normalized_vector(r)
        U += np.exp(-1j * math.pi * r / params.M) * np.outer(v, v.conj())
    return FockOperator(params.cutoff, U * rotation[None, :])


def half_step_rotation(params: CodeParams) -> FockOperator:
    """Diagonal number-phase rotation exp(i pi n / M)."""
    d = params.cutoff + 1
    return FockOperator(params.cutoff,
                        np.diag(np.exp(1j * math.pi * np.arange(d) / params.M)))


def build_povm(params: CodeParams) -> tuple[tuple[FockOperator, ...], tuple[FockOperator, ...]]:
    """Both measurement families, each M rank-1 projectors plus a remainder.

    The first family projects onto discrete-Fourier combinations of the
    normalized b=0 eigenvectors; the second is its conjugation by the
    half-step rotation (see the module docstring for why not the full
    switching unitary).
    """
    eigen0 = eigen_sigma(0, params)
    sectors = _active_sectors(eigen0, LAMBDA_FLOOR)
    d = params.cutoff + 1
    basis = np.stack([eigen0.normalized_vector(r) for r in sectors], axis=1)
    rot = np.exp(1j * math.pi * np.arange(d) / params.M)
    povm0, povm1 = [], []
    for m in range(params.M):
        coeff = np.exp(2j * math.pi * m * sectors / params.M) / math.sqrt(params.M)
        chi = basis @ coeff
        povm0.append(FockOperator(params.cutoff, np.outer(chi, chi.conj())))
        chi1 = rot * chi
        povm1.append(FockOperator(params.cutoff, np.outer(chi1, chi1.conj())))
    eye = np.eye(d, dtype=complex)
    for elems in (povm0, povm1):
        total = sum(e.matrix for e in elems)
        elems.append(FockOperator(params.cutoff, eye - total))
    return tuple(povm0), tuple(povm1)


@lru_cache(maxsize=8)
def build_kit(params: CodeParams, t_limit: float = DEFAULT_T_LIMIT,
              m_limit: int = DEFAULT_M_LIMIT) -> MayersKit:
    """Assemble and cache the full kit at desk scale.

    Bipartite operators cost (N+1)^4 memory, so amplitude and grid order
    are capped by default; pass larger limits explicitly to override.
    """
    if params.t > t_limit or params.M > m_limit:
        raise ValueError(
            f"kit restricted to t <= {t_limit}, M <= {m_limit} "
            f"(got t={params.t}, M={params.M}); raise the limits to override"
        )
    eigen0 = eigen_sigma(0, params)
    eigen1 = eigen_sigma(1, params)
    discarded = float(eigen0.values[eigen0.values <= LAMBDA_FLOOR].sum())
    povm0, povm1 = build_povm(params)
    return MayersKit(
        params=params,
        eigen0=eigen0,
        eigen1=eigen1,
        purification0=build_purification(0, params, drop_below_floor=True),
        purification1=build_purification(1, params, drop_below_floor=True),
        U=build_U(params),
        povm0=povm0,
        povm1=povm1,
        discarded_mass=discarded,
    )


def switch_fidelities(params: CodeParams) -> tuple[float, float]:
    """(|<Phi_1|(1 x U)|Phi_0>|, |<Phi_1|(U x U)|Phi_0>|).

    The two-sided overlap is 1 up to truncation; the one-sided overlap is
    strictly below 1 and is reported, not asserted.
    """
    kit = build_kit(params)
    psi0 = kit.purification_matrix(0)
    psi1 = kit.purification_matrix(1)
    u = kit.U.matrix
    # (1 x U)|Phi_0> has matrix psi0 @ U^T; (U x U)|Phi_0> is U @ psi0 @ U^T
    one_sided = abs(np.vdot(psi1, psi0 @ u.T))
    two_sided = abs(np.vdot(psi1, u @ psi0 @ u.T))
    return float(one_sided), float(two_sided)


def outcome_distribution(b: int, params: CodeParams) -> tuple[np.ndarray, float]:
    """Outcome law of the bit-b measurement on the bit-b purification.

    Returns the M probabilities (uniform up to truncation) and the mass on
    the remainder element.
    """
    kit = build_kit(params)
    psi = kit.purification_matrix(b)
    rho_a = psi @ psi.conj().T
    povm = kit.povm1 if b else kit.povm0
    probs = np.array([float(np.trace(rho_a @ e.matrix).real) for e in povm])
    return probs[:-1], float(probs[-1])


def conditional_bob_state(m: int, b: int, params: CodeParams) -> tuple[float, int]:
    """Receiver's conditional state after the sender's outcome m.

    Returns the best fidelity against the M bit-b code states and the
    index achieving it.  The index map m -> m' is a bijection on [M].
    """
    kit = build_kit(params)
    if not 0 <= m < params.M:
        raise ValueError(f"outcome index {m} outside [0, {params.M})")
    psi = kit.purification_matrix(b)
    povm = kit.povm1 if b else kit.povm0
    chi_proj = povm[m].matrix
    # rank-1 element: recover its vector from the dominant eigenpair
    vals, vecs = np.linalg.eigh(chi_proj)
    chi = vecs[:, -1]
    cond = psi.T @ chi.conj()
    nrm = np.linalg.norm(cond)
    if nrm == 0.0:
        raise ValueError("conditional state has zero mass")
    cond = cond / nrm
    fids = np.empty(params.M)
    for mp in range(params.M):
        code = coherent_vector(code_amplitude(mp, b, params.t, params.M), params.cutoff)
        fids[mp] = abs(np.vdot(code.amps, cond)) ** 2
    return float(fids.max()), int(fids.argmax())


def steering_table(b: int, params: CodeParams) -> dict[int, tuple[float, int]]:
    return {m: conditional_bob_state(m, b, params) for m in range(params.M)}


def verification_report(params: CodeParams) -> dict:
    """Full numeric verification document for one parameter point."""
    from .codestates import build_sigma  # local import keeps module load light

    kit = build_kit(params)
    d = kit.dim
    report: dict = {"t": params.t, "M": params.M, "cutoff": params.cutoff,
                    "discarded_mass": kit.discarded_mass}
    for b in (0, 1):
        psi = kit.purification_matrix(b)
        sigma = build_sigma(b, params).matrix
        marg_a = psi @ psi.conj().T
        marg_b = psi.T @ psi.conj()
        report[f"norm_{b}"] = float(np.linalg.norm(psi))
        report[f"marginal_a_residual_{b}"] = float(
            np.abs(np.linalg.eigvalsh(marg_a - sigma)).sum())
        report[f"marginal_b_residual_{b}"] = float(
            np.abs(np.linalg.eigvalsh(marg_b - sigma)).sum())
        povm = kit.povm1 if b else kit.povm0
        total = sum(e.matrix for e in povm)
        report[f"povm_completeness_residual_{b}"] = float(
            np.abs(total - np.eye(d)).max())
        probs, rest = outcome_distribution(b, params)
        report[f"outcome_probs_{b}"] = [float(p) for p in probs]
        report[f"outcome_remainder_{b}"] = rest
        table = steering_table(b, params)
        report[f"steering_min_fidelity_{b}"] = min(f for f, _ in table.values())
        report[f"steering_map_{b}"] = [table[m][1] for m in range(params.M)]
        report[f"steering_bijective_{b}"] = sorted(
            mp for _, mp in table.values()) == list(range(params.M))
    one_sided, two_sided = switch_fidelities(params)
    report["switch_fidelity_one_sided"] = one_sided
    report["switch_fidelity_two_sided"] = two_sided
    return report
