"""Security bounds and parameter selection.

Closed-form bounds on both cheating probabilities, numeric trace-norm
verification of the receiver-side bound, the two-condition epsilon
security check, and the upward scan that picks the smallest workable
(M, k) for a target epsilon.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .codestates import CodeParams, build_D
from .fock import density_cutoff, poisson_weights, trace_norm


class SearchExhausted(Exception):
    """No feasible modulation order below the scan limit."""


@dataclass(frozen=True)
class TraceNormBound:
    """Endpoint bound on ||rho - sigma_0||_1 and its validity flags."""

    value: float
    valid: bool           # (2 e t^2 / M)^{M/2} < 1/2, required for the bound
    simplified: float | None  # 2^{-M/2}, applicable once M > 4 e t^2 + 1


def trace_norm_bound(t: float, M: int) -> TraceNormBound:
    """2 (2 e t^2 / M)^{M/2}, with the simplified power-of-two variant."""
    if M < 2:
        raise ValueError(f"modulation order must be >= 2, got {M}")
    if t == 0.0:
        return TraceNormBound(0.0, True, 2.0 ** (-M / 2.0))
    q = (2.0 * math.e * t * t / M) ** (M / 2.0)
    simplified = 2.0 ** (-M / 2.0) if M > 4.0 * math.e * t * t + 1.0 else None
    return TraceNormBound(2.0 * q, q < 0.5, simplified)


def numeric_trace_norm_check(t: float, M: int) -> tuple[float, float, bool]:
    """Numeric ||rho - sigma_0||_1 against the closed-form bound.

    ok is vacuously true when the bound's validity condition fails.  Warns
    if the truncation tail is too heavy for the comparison to be trusted.
    """
    cutoff = density_cutoff(t * t)
    tail = 1.0 - float(poisson_weights(t * t, cutoff).sum())
    if tail > 1e-10:
        warnings.warn(
            f"truncation tail {tail:.3e} above 1e-10 at cutoff {cutoff}",
            RuntimeWarning,
        )
    numeric = trace_norm(build_D(CodeParams(t, M, cutoff)))
    bound = trace_norm_bound(t, M)
    ok = (not bound.valid) or numeric <= bound.value + 1e-10
    return numeric, bound.value, ok


def pcb_bound(t: float, M: int, k: int) -> float:
    """Receiver cheating bound: k times the single-copy trace-norm bound."""
    if k < 1:
        raise ValueError(f"repetition count must be >= 1, got {k}")
    return k * trace_norm_bound(t, M).value


def pca_exact(energy: float, k: int, M: int) -> float:
    """Sender's optimal opening-attack success probability."""
    if M < 2:
        raise ValueError(f"modulation order must be >= 2, got {M}")
    s = math.sin(math.pi / (2.0 * M))
    return math.exp(-energy * k * 4.0 * s * s)


def pca_approx(energy: float, k: int, M: int) -> float:
    """Large-M expansion 1 - E k pi^2 / M^2 of the opening-attack probability."""
    return 1.0 - energy * k * math.pi ** 2 / (M * M)


@dataclass(frozen=True)
class SecurityCheck:
    ok: bool
    pca: float
    pcb: float
    failed: tuple[str, ...]              # subset of {"binding", "concealing"}
    sufficient_pair: tuple[bool, bool] | None  # unit-energy shortcut conditions


def epsilon_secure_check(t: float, M: int, k: int, epsilon: float) -> SecurityCheck:
    """Both cheating probabilities at or below epsilon.

    Evaluates the general pair exp(-4 t^2 k sin^2(pi/2M)) <= eps and
    2 k (2 e t^2/M)^{M/2} <= eps.  At t = 1 the coarser sufficient pair
    exp(-k/M^2) <= eps and same second condition is reported as well.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0,1), got {epsilon}")
    pca = pca_exact(t * t, k, M)
    pcb = pcb_bound(t, M, k)
    failed = []
    if pca > epsilon:
        failed.append("binding")
    if pcb > epsilon:
        failed.append("concealing")
    sufficient = None
    if t == 1.0:
        sufficient = (
            math.exp(-k / (M * M)) <= epsilon,
            pcb <= epsilon,
        )
    return SecurityCheck(not failed, pca, pcb, tuple(failed), sufficient)


def _log_k_max(epsilon: float, t: float, M: int) -> float:
    # k <= (eps/2) (M / 2 e t^2)^{M/2}, kept in log space against overflow
    return math.log(epsilon / 2.0) + (M / 2.0) * (math.log(M) - math.log(2.0 * math.e * t * t))


def _k_min(epsilon: float, t: float, M: int) -> int:
    if t == 1.0:
        # unit-energy sufficient condition k >= M^2 ln(1/eps)
        return max(1, math.ceil(M * M * math.log(1.0 / epsilon)))
    s = math.sin(math.pi / (2.0 * M))
    return max(1, math.ceil(math.log(1.0 / epsilon) / (4.0 * t * t * s * s)))


@dataclass(frozen=True)
class PlanRow:
    M: int
    k_min: int
    log10_k_max: float
    k_max: int | None     # None when too large for an exact integer
    nonempty: bool
    m_cubed_in_window: bool


def plan_row(epsilon: float, t: float, M: int) -> PlanRow:
    k_min = _k_min(epsilon, t, M)
    log_k_max = _log_k_max(epsilon, t, M)
    # exact integer only while floor(exp(.)) is below the float53 limit
    k_max = math.floor(math.exp(log_k_max)) if log_k_max < 35.0 else None
    nonempty = log_k_max >= math.log(k_min)
    m3 = M ** 3
    m3_in = nonempty and k_min <= m3 and math.log(m3) <= log_k_max
    return PlanRow(M, k_min, log_k_max / math.log(10.0), k_max, nonempty, m3_in)


@dataclass(frozen=True)
class Plan:
    epsilon: float
    t: float
    M: int
    k: int
    row: PlanRow


def find_params(epsilon: float, t: float, scan_limit: int = 512) -> Plan:
    """Smallest M with a nonempty k-window, then the smallest k inside it."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0,1), got {epsilon}")
    if not (math.isfinite(t) and t > 0):
        raise ValueError(f"amplitude must be positive, got {t}")
    for M in range(2, scan_limit + 1):
        row = plan_row(epsilon, t, M)
        if row.nonempty:
            return Plan(epsilon, t, M, row.k_min, row)
    raise SearchExhausted(
        f"no feasible modulation order up to {scan_limit} for epsilon={epsilon}, t={t}"
    )


@dataclass(frozen=True)
class SecurityReport:
    t: float
    M: int
    k: int
    epsilon: float
    pcb_bound: float
    pca_exact: float
    trace_norm_numeric: float
    trace_norm_bound: float
    bound_valid: bool
    simplified_bound: float | None
    feasible: bool

    def as_document(self) -> dict:
        return {
            "t": self.t,
            "M": self.M,
            "k": self.k,
            "epsilon": self.epsilon,
            "pcb_bound": self.pcb_bound,
            "pca_exact": self.pca_exact,
            "trace_norm_numeric": self.trace_norm_numeric,
            "trace_norm_bound": self.trace_norm_bound,
            "bound_valid": self.bound_valid,
            "simplified_bound": self.simplified_bound,
            "feasible": self.feasible,
        }


def security_report(t: float, M: int, k: int, epsilon: float) -> SecurityReport:
    numeric, bound_value, _ = numeric_trace_norm_check(t, M)
    b = trace_norm_bound(t, M)
    check = epsilon_secure_check(t, M, k, epsilon)
    return SecurityReport(
        t=t, M=M, k=k, epsilon=epsilon,
        pcb_bound=check.pcb,
        pca_exact=check.pca,
        trace_norm_numeric=numeric,
        trace_norm_bound=bound_value,
        bound_valid=b.valid,
        simplified_bound=b.simplified,
        feasible=check.ok,
    )
