"""
Exact solutions and canonical initial data: the compactly supported bump,
the single-peakon traveling wave, the static multi-peakon ansatz, crest
tracking, the named generator registry used by run configurations, and the
momentum sign of a datum.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Tuple

import numpy as np

from common.errors import ConfigurationError, ParameterError
from common.utils import format_call
from grid_field import Field, Grid, sample
from helmholtz import HelmholtzParams, n_from_v, v_from_n

logger = logging.getLogger(__name__)


def bump(x, center=0.0, scale=1.0, amplitude=1.0):
    """
    amplitude * exp(-1 / (1 - y^2)) with y = scale * (x - center), zero for |y| >= 1.
    Works on scalars and numpy arrays.
    """
    if scale <= 0:
        raise ParameterError(f"bump scale must be > 0, got {scale}")
    y = scale * (np.asarray(x, dtype=float) - center)
    inside = np.abs(y) < 1.0
    out = np.zeros_like(y)
    out[inside] = amplitude * np.exp(-1.0 / (1.0 - y[inside] ** 2))
    if out.ndim == 0:
        return float(out)
    return out


def scaled_bump_n0(amplitude: float, scale: float) -> Callable:
    """x -> amplitude * f(scale * x); with amplitude=-20e, scale=20 the value at 0 is -20."""
    return lambda x: bump(x, center=0.0, scale=scale, amplitude=amplitude)


@dataclass(frozen=True)
class PeakonSpec:
    a1: float
    a2: float
    beta0: float

    def __post_init__(self):
        if not np.isfinite(self.beta0) or self.beta0 == 0:
            raise ParameterError(f"beta0 must be a finite nonzero real, got {self.beta0}")

    def crest(self, t: float) -> float:
        return self.a2 - 8.0 * self.beta0 * self.a1 * t


def exact_peakon(spec: PeakonSpec, t: float) -> Callable:
    """
    Traveling wave a1 * exp(-2|beta0| |x - c(t)|), c(t) = a2 - 8 beta0 a1 t.
    For beta0 < 0 this is the mirror image of the beta0 > 0 wave.
    """
    decay = 2.0 * abs(spec.beta0)
    crest = spec.crest(t)
    return lambda x: spec.a1 * np.exp(-decay * np.abs(np.asarray(x, dtype=float) - crest))


def peakon_superposition(weights: List[float], positions: List[float], beta0: float) -> Callable:
    """Frozen-time sum of peakon profiles sharing beta0."""
    if len(weights) != len(positions):
        raise ConfigurationError(
            f"superposition needs as many weights as positions ({len(weights)} vs {len(positions)})"
        )
    profiles = [exact_peakon(PeakonSpec(w, p, beta0), 0.0) for w, p in zip(weights, positions)]

    def superposition(x):
        total = np.zeros_like(np.asarray(x, dtype=float))
        for profile in profiles:
            total = total + profile(x)
        return total

    return superposition


def crest_position(v: Field) -> float:
    """
    Position of max|v|, refined by a 3-point parabola through |v|.
    Ties go to the smallest x.
    """
    grid = v.grid
    magnitude = np.abs(v.values)
    i = int(np.argmax(magnitude))
    left = magnitude[(i - 1) % grid.n_points]
    centre = magnitude[i]
    right = magnitude[(i + 1) % grid.n_points]

    curvature = left - 2.0 * centre + right
    offset = 0.0
    if curvature != 0.0:
        offset = float(np.clip(0.5 * (left - right) / curvature, -0.5, 0.5))

    position = grid.x[i] + offset * grid.dx
    # wrap into [-L, L)
    return float((position + grid.half_width) % grid.length - grid.half_width)


@dataclass(frozen=True)
class InitialDataSpec:
    name: str
    args: Dict[str, Any] = field(default_factory=dict)

    def describe(self) -> str:
        return format_call(self.name, self.args)


def _momentum_bump(params, center=0.0, scale=1.0, amplitude=1.0):
    return lambda x: bump(x, center=center, scale=scale, amplitude=amplitude)


def _momentum_scaled_bump(params, amplitude=1.0, scale=1.0):
    return scaled_bump_n0(amplitude, scale)


def _velocity_peakon(params, a1=1.0, a2=0.0):
    return exact_peakon(PeakonSpec(a1, a2, params.beta0), 0.0)


def _velocity_superposition(params, weights=(), positions=()):
    return peakon_superposition(list(weights), list(positions), params.beta0)


def _velocity_constant(params, value=0.0):
    return lambda x: np.full_like(np.asarray(x, dtype=float), value)


# name -> (kind, factory); momentum generators are inverted with v_from_n
GENERATORS = {
    "bump": ("n", _momentum_bump),
    "scaled_bump_n0": ("n", _momentum_scaled_bump),
    "peakon": ("v", _velocity_peakon),
    "superposition": ("v", _velocity_superposition),
    "constant": ("v", _velocity_constant),
}


def _resolve_kind(spec):
    if spec.name not in GENERATORS:
        raise ConfigurationError(
            f"unknown initial data generator '{spec.name}' (known: {', '.join(sorted(GENERATORS))})"
        )
    return GENERATORS[spec.name][0]


def _resolve(spec, params):
    kind = _resolve_kind(spec)
    factory = GENERATORS[spec.name][1]
    try:
        return kind, factory(params, **spec.args)
    except TypeError as e:
        raise ConfigurationError(f"bad arguments for initial data '{spec.describe()}': {e}")


def build_initial_data(grid: Grid, spec: InitialDataSpec, params: HelmholtzParams) -> Tuple[Field, Field]:
    """
    Returns (v0, n0) Fields. Momentum generators are sampled as n0 and
    inverted; velocity generators are sampled as v0 and n0 = 4 beta0^2 v0 - v0_xx.
    """
    kind, profile = _resolve(spec, params)
    if kind == "n":
        n0 = sample(grid, profile)
        v0 = v_from_n(n0, params)
    else:
        v0 = sample(grid, profile)
        n0 = n_from_v(v0, params)
    logger.debug(f"initial data {spec.describe()}: ||v0||={v0.sup_norm():.6g} ||n0||={n0.sup_norm():.6g}")
    return v0, n0


def is_momentum_data(spec: InitialDataSpec) -> bool:
    """True when the generator samples n0 pointwise (so n0 carries no differentiation error)."""
    return _resolve_kind(spec) == "n"


def momentum_sign(spec: InitialDataSpec, n0: Field) -> int:
    """
    +1 or -1 when the datum's momentum has that sign everywhere (the sign
    then persists in time, for n and for v = P2 n), else 0.

    Momentum data are judged on their samples. Peakon data carry a point
    mass of sign a1 and superpositions one per weight, so their sign is read
    from the weights rather than from a sampled n0 with Gibbs lobes.
    """
    kind = _resolve_kind(spec)
    if kind == "n":
        values = n0.values
        if np.all(values >= 0.0) and np.any(values > 0.0):
            return 1
        if np.all(values <= 0.0) and np.any(values < 0.0):
            return -1
        return 0
    if spec.name == "peakon":
        weights = [spec.args.get("a1", 1.0)]
    elif spec.name == "superposition":
        weights = list(spec.args.get("weights", ()))
    else:
        weights = [spec.args.get("value", 0.0)]
    signs = {int(np.sign(w)) for w in weights}
    return signs.pop() if len(signs) == 1 else 0
