"""Commit/open state machines for the two parties.

Alice encodes her bit in k coherent-state phases; Bob checks a reveal by
displacing each received mode back to vacuum and photon counting, and
accepts only an all-zeros count record.  Photon counting on coherent
states is simulated exactly by per-mode Poisson draws, so no density
matrices appear on this path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codestates import code_phase


class ProtocolAbort(Exception):
    """Raised when a message violates the protocol contract."""


@dataclass(frozen=True)
class ProtocolParams:
    """Session parameters agreed between the parties.

    energy is the *received* mean photon number per mode; tau is the
    channel transmittivity the sender pre-compensates for.
    """

    energy: float
    M: int
    k: int
    epsilon: float = 1e-2
    tau: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.energy) and self.energy >= 0):
            raise ValueError(f"invalid energy {self.energy}")
        if self.M < 2:
            raise ValueError(f"modulation order must be >= 2, got {self.M}")
        if self.k < 1:
            raise ValueError(f"repetition count must be >= 1, got {self.k}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0,1), got {self.epsilon}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"transmittivity must lie in (0,1], got {self.tau}")

    @property
    def t(self) -> float:
        return math.sqrt(self.energy)


@dataclass(frozen=True)
class Commitment:
    b: int
    m: tuple[int, ...]

    def __post_init__(self):
        if self.b not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {self.b}")
        object.__setattr__(self, "m", tuple(int(x) for x in self.m))


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if self.accepted != all(c == 0 for c in counts):
            raise ValueError("verdict inconsistent with counts")


class QuantumPayload:
    """The k transmitted modes, sealed against direct inspection.

    The honest receiver interface is measurement-only: displace each mode
    by a chosen amplitude and count photons.  Raw amplitudes are reachable
    only through the module-private accessor used by the session runner
    (channel scaling, adversarial receivers in bound-validation runs).
    """

    __slots__ = ("_amps", "sealed")

    def __init__(self, amplitudes, sealed: bool = True):
        amps = np.array(amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.size == 0:
            raise ValueError("payload needs a non-empty amplitude vector")
        amps.setflags(write=False)
        self._amps = amps
        self.sealed = bool(sealed)

    def __len__(self) -> int:
        return self._amps.size

    def count_after_displacement(self, displacements,
                                 rng: np.random.Generator) -> np.ndarray:
        """Displace mode j by displacements[j], then photon count each mode."""
        disp = np.asarray(displacements, dtype=np.complex128)
        if disp.shape != self._amps.shape:
            raise ProtocolAbort(
                f"displacement record length {disp.size} != payload length {len(self)}"
            )
        residual_energy = np.abs(self._amps + disp) ** 2
        return rng.poisson(residual_energy)

    def __repr__(self) -> str:
        return f"QuantumPayload(k={len(self)}, sealed={self.sealed})"


def _raw_amplitudes(payload: QuantumPayload) -> np.ndarray:
    # Runner-side accessor; strategies must not call this on sealed payloads.
    return payload._amps


def scale_payload(payload: QuantumPayload, factor: float) -> QuantumPayload:
    """Pure-loss channel action: every amplitude scaled by sqrt(tau)."""
    return QuantumPayload(_raw_amplitudes(payload) * factor, sealed=payload.sealed)


def commit(b: int, params: ProtocolParams,
           rng: np.random.Generator) -> tuple[Commitment, QuantumPayload]:
    """Sample the phase string and prepare the pre-channel payload.

    Amplitudes carry energy E/tau so that the received energy is E after
    the sqrt(tau) channel scaling.
    """
    m = rng.integers(0, params.M, size=params.k)
    amp = math.sqrt(params.energy / params.tau)
    phases = 2.0 * math.pi * (m + b / 2.0) / params.M
    payload = QuantumPayload(amp * np.exp(1j * phases))
    return Commitment(b, tuple(int(x) for x in m)), payload


def expected_amplitudes(revealed_b: int, revealed_m, params: ProtocolParams) -> np.ndarray:
    m = np.asarray(revealed_m, dtype=np.int64)
    phases = np.array([code_phase(int(mj), revealed_b, params.M) for mj in m])
    return params.t * np.exp(1j * phases)


def bob_verify(payload: QuantumPayload, revealed: tuple[int, tuple[int, ...]],
               params: ProtocolParams, rng: np.random.Generator) -> Verdict:
    """Displace each mode back by the claimed code amplitude and count.

    Accepts only if every mode yields zero photons.
    """
    revealed_b, revealed_m = revealed
    if len(revealed_m) != len(payload):
        raise ProtocolAbort(
            f"reveal length {len(revealed_m)} != payload length {len(payload)}"
        )
    try:
        targets = expected_amplitudes(revealed_b, revealed_m, params)
    except ValueError as exc:
        raise ProtocolAbort(f"malformed reveal: {exc}") from exc
    counts = payload.count_after_displacement(-targets, rng)
    return Verdict(bool(np.all(counts == 0)), tuple(int(c) for c in counts))


def cheat_open(commitment: Commitment, target_b: int) -> tuple[int, tuple[int, ...]]:
    """Optimal dishonest reveal: claim target_b but keep the committed phases.

    Keeping m unchanged maximizes the all-zeros probability; with
    target_b == commitment.b this is just the honest open.
    """
    if target_b not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {target_b}")
    return target_b, commitment.m


def residual_energies(params: ProtocolParams, delta_m, committed_b: int,
                      revealed_b: int) -> np.ndarray:
    """Per-mode residual energy 4E sin^2(pi (dm + (b - b_hat)/2) / M)."""
    dm = np.atleast_1d(np.asarray(delta_m, dtype=np.float64))
    half = (committed_b - revealed_b) / 2.0
    s = np.sin(math.pi * (dm + half) / params.M)
    return 4.0 * params.energy * s * s


def _per_mode_energies(params: ProtocolParams, delta_m, committed_b: int,
                       revealed_b: int) -> np.ndarray:
    energies = residual_energies(params, delta_m, committed_b, revealed_b)
    if energies.size == 1:
        return np.full(params.k, float(energies[0]))
    if energies.size != params.k:
        raise ValueError(f"offset pattern length {energies.size} != k={params.k}")
    return energies


def acceptance_probability(params: ProtocolParams, delta_m, committed_b: int,
                           revealed_b: int) -> float:
    """Closed-form all-zeros probability for a fixed reveal offset pattern.

    A scalar delta_m applies to every mode.
    """
    return float(np.exp(-_per_mode_energies(params, delta_m, committed_b,
                                            revealed_b).sum()))


def mc_acceptance(params: ProtocolParams, delta_m, committed_b: int,
                  revealed_b: int, trials: int, rng: np.random.Generator) -> float:
    """Monte-Carlo acceptance frequency for a fixed reveal offset pattern.

    Draws the actual per-mode Poisson counts, exactly as bob_verify does,
    vectorized over trials.
    """
    lam = _per_mode_energies(params, delta_m, committed_b, revealed_b)
    counts = rng.poisson(np.broadcast_to(lam, (trials, params.k)))
    return float(np.all(counts == 0, axis=1).mean())


class AliceStrategy:
    """Commit-phase behavior plus the reveal rule; subclass to extend."""

    name = "abstract"

    def commitment_bit(self, params: ProtocolParams, rng: np.random.Generator) -> int:
        raise NotImplementedError

    def reveal(self, commitment: Commitment) -> tuple[int, tuple[int, ...]]:
        raise NotImplementedError


class HonestAlice(AliceStrategy):
    name = "honest"

    def __init__(self, b: int):
        if b not in (0, 1):
            raise ValueError("bit must be 0 or 1")
        self.b = b

    def commitment_bit(self, params, rng):
        return self.b

    def reveal(self, commitment):
        return commitment.b, commitment.m


class CheatOpenAlice(AliceStrategy):
    """Commits to one bit, then opens the other with the optimal reveal."""

    name = "cheat-open"

    def __init__(self, commit_b: int):
        if commit_b not in (0, 1):
            raise ValueError("bit must be 0 or 1")
        self.commit_b = commit_b

    def commitment_bit(self, params, rng):
        return self.commit_b

    def reveal(self, commitment):
        return cheat_open(commitment, 1 - commitment.b)


class RandomBitAlice(AliceStrategy):
    """Honest behavior with a per-session uniformly random bit."""

    name = "honest-random"

    def commitment_bit(self, params, rng):
        return int(rng.integers(0, 2))

    def reveal(self, commitment):
        return commitment.b, commitment.m
