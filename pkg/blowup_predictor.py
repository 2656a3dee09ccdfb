"""
Finite-time blow-up certificate.

With b = (16 beta0^2 ||v0||_inf)^2 + (8 beta0 ||v0_x||_inf)^2 and
T1 = 1 / (32 max(beta0^2, beta0^-2) ||v0||_W1inf), any point with

    n0(x0) < -sqrt(b/2) + sqrt(2b) / (1 - exp(2 sqrt(2b) T1))

forces blow-up before T2 = log((sqrt2 n0 - sqrt b)/(sqrt2 n0 + sqrt b)) / (2 sqrt(2b)) < T1,
by comparison with the scalar supersolution f' = -2 f^2 + b, f(0) = n0(x0).
"""

import logging
import math
from dataclasses import dataclass, field, asdict
from typing import List, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from common.errors import DomainError
from grid_field import Field, derivative
from helmholtz import HelmholtzParams, v_from_n

logger = logging.getLogger(__name__)

CERTIFIED = "certified_blowup"
NO_CONCLUSION = "no_conclusion"

MEASURED = "measured"
ANALYTIC = "analytic"

# exp() overflows just above 709
MAX_EXPONENT = 700.0
DIVERGENCE_LEVEL = -1e8


@dataclass
class BlowupReport:
    b: float
    t1: Optional[float]
    threshold: Optional[float]
    witnesses: List[Tuple[float, float]] = field(default_factory=list)
    t2: Optional[float] = None
    verdict: str = NO_CONCLUSION
    bounds_source: str = MEASURED
    v_sup: float = 0.0
    vx_sup: float = 0.0

    @property
    def certified(self):
        return self.verdict == CERTIFIED

    def to_dict(self):
        data = asdict(self)
        data["witness_count"] = len(self.witnesses)
        if self.witnesses:
            x0, n0_at_x0 = min(self.witnesses, key=lambda w: w[1])
            data["witness_x0"] = x0
            data["witness_n0"] = n0_at_x0
        data["witnesses"] = [f"{x:.17g}:{n:.17g}" for x, n in self.witnesses]
        return data


def b_from_bounds(v_sup: float, vx_sup: float, params: HelmholtzParams) -> float:
    beta = params.beta0
    return (16.0 * beta * beta * v_sup) ** 2 + (8.0 * beta * vx_sup) ** 2


def t1_from_bounds(v_sup: float, vx_sup: float, params: HelmholtzParams) -> Optional[float]:
    """None when the W^{1,inf} norm is zero (no certificate)."""
    norm = v_sup + vx_sup
    if norm <= 0.0:
        return None
    beta_sq = params.beta0 * params.beta0
    return 1.0 / (32.0 * max(beta_sq, 1.0 / beta_sq) * norm)


def _sup_norms(v0):
    return v0.sup_norm(), derivative(v0).sup_norm()


def compute_b(v0: Field, params: HelmholtzParams) -> float:
    return b_from_bounds(*_sup_norms(v0), params)


def compute_t1(v0: Field, params: HelmholtzParams) -> Optional[float]:
    return t1_from_bounds(*_sup_norms(v0), params)


def blowup_threshold(b: Optional[float], t1: Optional[float]) -> Optional[float]:
    """
    -sqrt(b/2) + sqrt(2b) / (1 - exp(2 sqrt(2b) T1)); None when b = 0 or T1
    is missing, -sqrt(b/2) in the T1 -> inf limit.
    """
    if b is None or b <= 0.0 or t1 is None:
        return None
    base = -math.sqrt(b / 2.0)
    if math.isinf(t1):
        return base
    exponent = 2.0 * math.sqrt(2.0 * b) * t1
    if exponent > MAX_EXPONENT:
        return base - math.sqrt(2.0 * b) * math.exp(-exponent)
    return base + math.sqrt(2.0 * b) / (-math.expm1(exponent))


def compute_t2(n0_at_x0: float, b: float) -> float:
    """
    Divergence time of f' = -2 f^2 + b from f(0) = n0_at_x0.

    Raises:
        DomainError: n0_at_x0 >= -sqrt(b/2) (the supersolution never diverges)
    """
    f0 = float(n0_at_x0)
    if b < 0:
        raise DomainError(f"b must be >= 0, got {b}")
    if b == 0.0:
        if f0 >= 0.0:
            raise DomainError(f"with b = 0 the supersolution diverges only for f0 < 0, got {f0}")
        return -1.0 / (2.0 * f0)
    if f0 >= -math.sqrt(b / 2.0):
        raise DomainError(f"n0(x0) = {f0} must lie below -sqrt(b/2) = {-math.sqrt(b / 2.0):.6g}")
    root2_f0 = math.sqrt(2.0) * f0
    root_b = math.sqrt(b)
    ratio = (root2_f0 - root_b) / (root2_f0 + root_b)
    return math.log(ratio) / (2.0 * math.sqrt(2.0 * b))


def supersolution_ode(f0: float, b: float, t: float) -> float:
    """
    Closed-form solution of f' = -2 f^2 + b, f(0) = f0.

    Raises:
        DomainError: t < 0, or t at/after the divergence time
    """
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    if b < 0:
        raise DomainError(f"b must be >= 0, got {b}")
    if b == 0.0:
        denominator = 1.0 + 2.0 * f0 * t
        if denominator <= 0.0:
            raise DomainError(f"supersolution diverged before t={t}")
        return f0 / denominator

    root2_f0 = math.sqrt(2.0) * f0
    root_b = math.sqrt(b)
    if root2_f0 + root_b == 0.0:
        return f0  # lower equilibrium -sqrt(b/2)
    c = (root2_f0 - root_b) / (root2_f0 + root_b)
    rate = 2.0 * math.sqrt(2.0 * b)
    if c >= 1.0 and t >= math.log(c) / rate:
        raise DomainError(f"t={t} is at or after the divergence time {math.log(c) / rate:.6g}")
    decay = c * math.exp(-rate * t)
    return math.sqrt(b / 2.0) * (1.0 + decay) / (1.0 - decay)


def supersolution_blowup_time(
    f0: float, b: float, t_max: Optional[float] = None, rtol: float = 1e-10
) -> Optional[float]:
    """
    Integrate f' = -2 f^2 + b with solve_ivp until f crosses -1e8.
    Returns the crossing time, or None if it is not reached by t_max.
    """
    if t_max is None:
        try:
            t_max = 2.0 * compute_t2(f0, b)
        except DomainError:
            t_max = 10.0

    def rhs(t, f):
        return -2.0 * f * f + b

    def diverged(t, f):
        return f[0] - DIVERGENCE_LEVEL

    diverged.terminal = True
    diverged.direction = -1

    solution = solve_ivp(rhs, (0.0, t_max), [float(f0)], method="RK45", events=diverged, rtol=rtol, atol=1e-12)
    if solution.t_events[0].size:
        return float(solution.t_events[0][0])
    return None


def check_condition(
    n0: Field, params: HelmholtzParams, sup_bounds: Optional[Tuple[float, float]] = None
) -> BlowupReport:
    """
    Evaluate the certificate for momentum n0.

    Args:
        n0: initial momentum Field
        params: HelmholtzParams
        sup_bounds: optional (||v0||_inf, ||v0_x||_inf) bounds to use instead
            of the grid sup-norms of v0 = P2 n0

    Returns:
        BlowupReport; witnesses are grid points strictly below the threshold,
        T2 comes from the most negative one.
    """
    if sup_bounds is None:
        v0 = v_from_n(n0, params)
        v_sup, vx_sup = _sup_norms(v0)
        source = MEASURED
    else:
        v_sup, vx_sup = (float(bound) for bound in sup_bounds)
        source = ANALYTIC

    b = b_from_bounds(v_sup, vx_sup, params)
    t1 = t1_from_bounds(v_sup, vx_sup, params)
    threshold = blowup_threshold(b, t1)
    report = BlowupReport(b=b, t1=t1, threshold=threshold, bounds_source=source, v_sup=v_sup, vx_sup=vx_sup)
    if threshold is None:
        return report

    below = np.flatnonzero(n0.values < threshold)
    if below.size == 0:
        return report

    report.witnesses = [(float(n0.grid.x[i]), float(n0.values[i])) for i in below]
    report.t2 = compute_t2(float(np.min(n0.values[below])), b)
    report.verdict = CERTIFIED
    logger.info(f"certified blow-up ({source} bounds): {below.size} witnesses, T2={report.t2:.6g} < T1={t1:.6g}")
    return report
