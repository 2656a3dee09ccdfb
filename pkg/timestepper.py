"""
Time integration of the v-form with CFL-limited steps and finite-time
blow-up detection.

Schemes:
    euler_upwind  first-order explicit Euler, v_x by kink-aware upwind difference
    rk4_spectral  classical RK4, spectral v_x, smooth exponential filter on products
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from analysis import CharacteristicTracker, h1_beta_norm_sq, mass, w1inf_norm
from common.constants import (
    DEFAULT_BLOWUP_FACTOR,
    DEFAULT_CFL_SAFETY,
    DEFAULT_DT_MIN,
    DEFAULT_HALF_WIDTH,
    DEFAULT_MAX_STEPS,
    DEFAULT_N_POINTS,
    DEFAULT_SCHEME,
    GROWTH_WINDOW,
    SCHEMES,
    SIGN_TOLERANCE,
    SPEED_EPSILON,
)
from common.errors import ConfigurationError
from dynamics import StateV, rhs_v, velocity_values
from grid_field import Field, Grid, derivative, make_grid
from helmholtz import HelmholtzParams, n_from_v
from peakon import InitialDataSpec, build_initial_data, crest_position, is_momentum_data, momentum_sign

logger = logging.getLogger(__name__)

COMPLETED = "completed"
BLOWUP_DETECTED = "blowup_detected"
UNSTABLE = "unstable"

# blow-up / instability reasons
NORM_GROWTH = "norm_growth"
NON_FINITE = "non_finite"
INTEGRAL_DIVERGENCE = "integral_divergence"
DT_FLOOR = "dt_floor"
SIGN_LOSS = "sign_loss"
MAX_STEPS = "max_steps"


@dataclass(frozen=True)
class SimConfig:
    params: HelmholtzParams
    initial_data: InitialDataSpec
    half_width: float = DEFAULT_HALF_WIDTH
    n_points: int = DEFAULT_N_POINTS
    t_end: float = 1.0
    scheme: str = DEFAULT_SCHEME
    cfl_safety: float = DEFAULT_CFL_SAFETY
    blowup_factor: float = DEFAULT_BLOWUP_FACTOR
    output_interval: Optional[float] = None
    diagnostics_every: int = 1
    dt_min: float = DEFAULT_DT_MIN
    max_steps: int = DEFAULT_MAX_STEPS
    analytic_v_sup: Optional[float] = None
    analytic_vx_sup: Optional[float] = None
    seed_positions: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if not isinstance(self.params, HelmholtzParams):
            object.__setattr__(self, "params", HelmholtzParams(self.params))
        if not self.t_end > 0:
            raise ConfigurationError(f"t_end must be > 0, got {self.t_end}")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {', '.join(SCHEMES)}, got '{self.scheme}'")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigurationError("cfl_safety must be in (0,1]")
        if not self.blowup_factor > 1:
            raise ConfigurationError(f"blowup_factor must be > 1, got {self.blowup_factor}")
        if self.output_interval is None:
            object.__setattr__(self, "output_interval", self.t_end / 10.0)
        if not self.output_interval > 0:
            raise ConfigurationError(f"output_interval must be > 0, got {self.output_interval}")
        if int(self.diagnostics_every) != self.diagnostics_every or self.diagnostics_every < 1:
            raise ConfigurationError(f"diagnostics_every must be a positive integer, got {self.diagnostics_every}")
        if not self.dt_min > 0:
            raise ConfigurationError(f"dt_min must be > 0, got {self.dt_min}")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ConfigurationError(f"max_steps must be a positive integer, got {self.max_steps}")
        for name in ("analytic_v_sup", "analytic_vx_sup"):
            value = getattr(self, name)
            if value is not None and not value >= 0:
                raise ConfigurationError(f"{name} must be >= 0, got {value}")
        # surfaces grid errors before any stepping
        make_grid(self.half_width, self.n_points)

    @property
    def grid(self) -> Grid:
        return make_grid(self.half_width, self.n_points)

    @property
    def analytic_bounds(self) -> Optional[Tuple[float, float]]:
        if self.analytic_v_sup is None or self.analytic_vx_sup is None:
            return None
        return self.analytic_v_sup, self.analytic_vx_sup


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    linf_n: float
    w1inf_v: float
    h1beta_sq: float
    min_n: float
    cfl_number: float
    crest_x: float
    mass_n: float
    linf_n_char: float = math.nan  # along the characteristics; nan when they are not tracked
    int_linf_n: float = 0.0        # time integral of max(linf_n, linf_n_char)


@dataclass(frozen=True)
class Snapshot:
    t: float
    v: Field
    n: Field


@dataclass(frozen=True)
class Verdict:
    kind: str
    t_low: Optional[float] = None
    t_high: Optional[float] = None
    reason: Optional[str] = None

    @property
    def bracket(self) -> Tuple[Optional[float], Optional[float]]:
        return self.t_low, self.t_high


@dataclass
class SimResult:
    diagnostics: List[DiagnosticsRecord] = field(default_factory=list)
    snapshots: List[Snapshot] = field(default_factory=list)
    verdict: Optional[Verdict] = None
    steps: int = 0

    @property
    def final_time(self) -> float:
        return self.diagnostics[-1].t if self.diagnostics else 0.0

    def v_snapshots(self) -> List[Tuple[float, Field]]:
        return [(snap.t, snap.v) for snap in self.snapshots]


def _speed(v: Field, params: HelmholtzParams) -> float:
    vx = derivative(v).values
    return float(np.max(np.abs(velocity_values(v.values, vx, params.beta0))))


def cfl_dt(state: StateV, safety: float, remaining: Optional[float] = None) -> float:
    """
    safety * dx / max(eps, max|4(v_x + 2 beta0 v)|), optionally capped by the
    remaining time to t_end.
    """
    dt = safety * state.grid.dx / max(SPEED_EPSILON, _speed(state.v, state.params))
    if remaining is not None:
        dt = min(dt, remaining)
    return dt


def reaction_dt(linf_n: float, safety: float) -> float:
    """Cap from the -4 n^2 term of the Lagrangian form; inf for zero momentum."""
    if linf_n <= 0 or not math.isfinite(linf_n):
        return math.inf
    return safety / (4.0 * linf_n)


def _euler_upwind(state, dt):
    rate = rhs_v(state, derivative="upwind", dealias=False)
    with np.errstate(over="ignore", invalid="ignore"):
        return state.v.with_values(state.v.values + dt * rate.values)


def _rk4_spectral(state, dt):
    v = state.v
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = rhs_v(state).values
        k2 = rhs_v(replace(state, t=state.t + 0.5 * dt, v=v.with_values(v.values + 0.5 * dt * k1))).values
        k3 = rhs_v(replace(state, t=state.t + 0.5 * dt, v=v.with_values(v.values + 0.5 * dt * k2))).values
        k4 = rhs_v(replace(state, t=state.t + dt, v=v.with_values(v.values + dt * k3))).values
        return v.with_values(v.values + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


_STEPPERS = {
    "euler_upwind": _euler_upwind,
    "rk4_spectral": _rk4_spectral,
}


def step(state: StateV, dt: float, scheme: str) -> StateV:
    """Advance by dt; the returned state's Field is flagged blown_up on non-finite values."""
    if scheme not in _STEPPERS:
        raise ConfigurationError(f"scheme must be one of {', '.join(SCHEMES)}, got '{scheme}'")
    if not dt > 0:
        raise ConfigurationError(f"dt must be > 0, got {dt}")
    return StateV(state.t + dt, _STEPPERS[scheme](state, dt), state.params)


def diagnostics_for(
    t: float,
    v: Field,
    params: HelmholtzParams,
    cfl_number: float = 0.0,
    linf_n_char: float = math.nan,
    int_linf_n: float = 0.0,
) -> DiagnosticsRecord:
    n = n_from_v(v, params)
    return DiagnosticsRecord(
        t=float(t),
        linf_n=n.sup_norm(),
        w1inf_v=w1inf_norm(v),
        h1beta_sq=h1_beta_norm_sq(v, params),
        min_n=float(np.min(n.values)),
        cfl_number=float(cfl_number),
        crest_x=crest_position(v),
        mass_n=mass(n),
        linf_n_char=float(linf_n_char),
        int_linf_n=float(int_linf_n),
    )


def _blowup_measure(linf_n, tracker):
    if tracker is None:
        return linf_n
    return max(linf_n, tracker.sup_norm())


def _growing(history):
    values = list(history)
    if len(values) < 2:
        return False
    return all(later > earlier for earlier, later in zip(values, values[1:]))


def run(config: SimConfig) -> SimResult:
    """
    Integrate from t=0 to config.t_end.

    Each step uses the CFL dt, capped by the reaction limit and clipped so
    output times are hit exactly. Momentum data are also carried along the
    characteristics of every grid node (CharacteristicTracker), and the
    blow-up measure is max(||n||_inf on the grid, along the characteristics),
    whose time integral is recorded as int_linf_n.

    Stops early with blowup_detected when a characteristic's momentum (and
    with it the integral of ||n||_inf) diverges inside a step, when the
    blow-up measure reaches blowup_factor times its initial value, or when
    values go non-finite / dt hits dt_min while ||n||_inf is growing.
    Non-finite values without growth, sign-definite data losing their sign,
    or running out of max_steps end as unstable.
    """
    grid = config.grid
    params = config.params
    v0, n0 = build_initial_data(grid, config.initial_data, params)
    tracker = CharacteristicTracker.start(v0, n0, params) if is_momentum_data(config.initial_data) else None
    sign = momentum_sign(config.initial_data, n0)

    logger.info(
        f"run {config.initial_data.describe()} beta0={params.beta0} L={grid.half_width} "
        f"N={grid.n_points} scheme={config.scheme} t_end={config.t_end} "
        f"characteristics={'on' if tracker is not None else 'off'} sign={sign}"
    )

    result = SimResult()
    state = StateV(0.0, v0, params)
    n = n_from_v(v0, params)
    linf_n_char = tracker.sup_norm() if tracker is not None else math.nan
    record = diagnostics_for(0.0, v0, params, linf_n_char=linf_n_char)
    result.diagnostics.append(record)
    result.snapshots.append(Snapshot(0.0, v0, n))

    peak = _blowup_measure(record.linf_n, tracker)
    growth_limit = config.blowup_factor * peak if peak > 0 else math.inf
    int_linf_n = 0.0
    history = deque([record.linf_n], maxlen=GROWTH_WINDOW + 1)
    time_eps = 1e-12 * max(1.0, config.t_end)
    next_output = min(config.output_interval, config.t_end)

    def finish(kind, t_low=None, t_high=None, reason=None):
        result.verdict = Verdict(kind, t_low, t_high, reason)
        level = logging.INFO if kind == COMPLETED else logging.WARNING
        logger.log(level, f"verdict {kind} reason={reason} bracket=({t_low}, {t_high}) steps={result.steps}")
        return result

    while state.t < config.t_end - time_eps:
        if result.steps >= config.max_steps:
            return finish(UNSTABLE, state.t, state.t, MAX_STEPS)

        speed = _speed(state.v, params)
        dt = min(
            config.cfl_safety * grid.dx / max(SPEED_EPSILON, speed),
            reaction_dt(history[-1], config.cfl_safety),
        )
        if dt < config.dt_min:
            kind = BLOWUP_DETECTED if _growing(history) else UNSTABLE
            return finish(kind, state.t, state.t + config.dt_min, DT_FLOOR)

        hits_output = dt >= next_output - state.t - time_eps
        if hits_output:
            dt = next_output - state.t

        t_previous = state.t
        new_state = step(state, dt, config.scheme)
        if hits_output:
            new_state = replace(new_state, t=next_output)

        if new_state.blown_up:
            kind = BLOWUP_DETECTED if _growing(history) else UNSTABLE
            return finish(kind, t_previous, new_state.t, NON_FINITE)

        state = new_state
        result.steps += 1
        n = n_from_v(state.v, params)
        linf_n = n.sup_norm()
        history.append(linf_n)
        cfl_number = dt * speed / grid.dx

        if tracker is not None and not tracker.advance(state.v, dt):
            result.diagnostics.append(
                diagnostics_for(state.t, state.v, params, cfl_number, linf_n_char=math.inf, int_linf_n=math.inf)
            )
            result.snapshots.append(Snapshot(state.t, state.v, n))
            return finish(BLOWUP_DETECTED, t_previous, state.t, INTEGRAL_DIVERGENCE)

        latest = _blowup_measure(linf_n, tracker)
        int_linf_n += 0.5 * dt * (peak + latest)
        peak = latest
        blown = peak >= growth_limit
        sign_lost = sign != 0 and float(np.min(sign * state.v.values)) < -SIGN_TOLERANCE * state.v.sup_norm()

        if hits_output or blown or sign_lost or result.steps % config.diagnostics_every == 0:
            result.diagnostics.append(diagnostics_for(
                state.t, state.v, params, cfl_number,
                linf_n_char=tracker.sup_norm() if tracker is not None else math.nan,
                int_linf_n=int_linf_n,
            ))

        if blown:
            result.snapshots.append(Snapshot(state.t, state.v, n))
            return finish(BLOWUP_DETECTED, t_previous, state.t, NORM_GROWTH)

        if sign_lost:
            result.snapshots.append(Snapshot(state.t, state.v, n))
            return finish(UNSTABLE, t_previous, state.t, SIGN_LOSS)

        if hits_output:
            result.snapshots.append(Snapshot(state.t, state.v, n))
            logger.debug(f"snapshot t={state.t:.6g} ||n||={linf_n:.6g} int||n||={int_linf_n:.6g} steps={result.steps}")
            next_output = min(next_output + config.output_interval, config.t_end)

    return finish(COMPLETED)
