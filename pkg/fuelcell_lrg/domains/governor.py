"""Lyapunov-based reference governor for the reference model.

The governor keeps the reference-model state inside the sublevel set
{V(z_m - z_bar) <= Gamma(x_tilde_d)} of the quadratic Lyapunov function
V(w) = w^T P w, where z_bar = (x_tilde_d, 0) is the equilibrium for the held
reference and Gamma is the largest level that does not reach the faces
|x_m| = x_bar - eps. Each sample it moves the held reference towards the
command by the largest admissible fraction kappa.
"""

import logging
import math
from typing import Any, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import minimize_scalar

from .refmodel import RefModelState


logger = logging.getLogger(__name__)

KAPPA_GRID_POINTS = 64
KAPPA_TOLERANCE = 1e-10


class GovernorConfig(BaseModel):
    """Constraint, buffer and search tunables of the governor."""

    model_config = ConfigDict(frozen=True)

    x_bar: float = Field(gt=0, description="constraint |x| <= x_bar, degC")
    eps0: float = Field(gt=0, description="static buffer, degC")
    k_eps: float = Field(0.0, ge=0, description="buffer gain on e^2, 1/degC")
    Delta: float = Field(1.0, gt=0, description="kappa may go down to -Delta")
    x_bar_d: float = Field(gt=0, description="saturation limit, degC; defaults to x_bar - eps0")
    T_s: float = Field(0.1, gt=0, description="governor sample period, s")

    @model_validator(mode="before")
    @classmethod
    def _default_saturation_limit(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("x_bar_d") is None:
            data = dict(data)
            try:
                x_bar, eps0 = float(data["x_bar"]), float(data["eps0"])
            except (KeyError, TypeError, ValueError):
                data.pop("x_bar_d", None)
                return data
            if not eps0 < x_bar:
                raise ValueError(
                    f"eps0 ({eps0}) must be smaller than x_bar ({x_bar}) "
                    "so the tightened constraint set is not empty"
                )
            data["x_bar_d"] = x_bar - eps0
        return data

    @model_validator(mode="after")
    def _buffer_leaves_room(self) -> "GovernorConfig":
        if not self.eps0 < self.x_bar:
            raise ValueError(
                f"eps0 ({self.eps0}) must be smaller than x_bar ({self.x_bar}) "
                "so the tightened constraint set is not empty"
            )
        if self.x_bar_d > self.x_bar - self.eps0 + 1e-12:
            raise ValueError(
                f"x_bar_d ({self.x_bar_d}) must not exceed x_bar - eps0 "
                f"({self.x_bar - self.eps0})"
            )
        return self


class GovernorState(NamedTuple):
    x_tilde_d_prev: float
    kappa_last: Optional[float] = None
    infeasible_flag: bool = False


class KappaSolution(NamedTuple):
    kappa: Optional[float]  # None when no admissible kappa exists
    x_tilde_d: float
    infeasible: bool


class GovernorStep(NamedTuple):
    kappa: Optional[float]
    x_tilde_d: float
    x_tilde_d_sat: float
    eps: float
    V: float
    Gamma: float
    infeasible: bool


def buffer(cfg: GovernorConfig, e: float) -> float:
    """eps = eps0 + k_eps e^2."""
    return cfg.eps0 + cfg.k_eps * e * e


def gamma(P: np.ndarray, x_tilde_d: float, x_bar: float, eps: float) -> float:
    """Smallest V on the faces x_m = +-(x_bar - eps), 0 if the equilibrium is not inside."""
    limit = x_bar - eps
    if limit <= 0 or abs(x_tilde_d) >= limit:
        return 0.0
    schur = (P[0, 0] * P[1, 1] - P[0, 1] * P[0, 1]) / P[1, 1]
    c_plus = limit - x_tilde_d
    c_minus = -limit - x_tilde_d
    return min(c_plus * c_plus, c_minus * c_minus) * schur


def lyapunov_value(P: np.ndarray, z_m: Tuple[float, float], x_tilde_d: float) -> float:
    """V(z_m - z_bar) with z_bar = (x_tilde_d, 0)."""
    dx = z_m[0] - x_tilde_d
    de = z_m[1]
    return P[0, 0] * dx * dx + 2.0 * P[0, 1] * dx * de + P[1, 1] * de * de


def solve_kappa(
    gs: GovernorState,
    cfg: GovernorConfig,
    P: np.ndarray,
    z_m: Tuple[float, float],
    x_d: float,
    eps: float,
    kappa_lower: Optional[float] = None,
) -> KappaSolution:
    """Largest kappa in [kappa_lower, 1] keeping V(z_m - z_bar(kappa)) <= Gamma(kappa).

    ``kappa_lower`` defaults to -Delta. Along the segment, sqrt(V) is convex and
    sqrt(Gamma) concave in kappa, so the admissible kappas form one interval:
    a descending grid scan brackets its upper end, bisection refines it, and a
    bounded scalar minimisation finds the interval when it falls between grid
    points.
    """
    lower = -cfg.Delta if kappa_lower is None else kappa_lower
    v_prev = gs.x_tilde_d_prev
    step = x_d - v_prev

    def g(kappa: float) -> float:
        v = v_prev + kappa * step
        return lyapunov_value(P, z_m, v) - gamma(P, v, cfg.x_bar, eps)

    if g(1.0) <= 0:
        return KappaSolution(1.0, x_d, False)

    feasible: Optional[float] = None
    upper = 1.0
    for kappa in np.linspace(1.0, lower, KAPPA_GRID_POINTS)[1:]:
        kappa = float(kappa)
        if g(kappa) <= 0:
            feasible = kappa
            break
        upper = kappa

    if feasible is None:
        schur = math.sqrt((P[0, 0] * P[1, 1] - P[0, 1] ** 2) / P[1, 1])
        limit = cfg.x_bar - eps

        def margin(kappa: float) -> float:
            v = v_prev + kappa * step
            return math.sqrt(max(lyapunov_value(P, z_m, v), 0.0)) - schur * (limit - abs(v))

        result = minimize_scalar(
            margin, bounds=(lower, 1.0), method="bounded", options={"xatol": KAPPA_TOLERANCE}
        )
        if g(float(result.x)) <= 0:
            feasible, upper = float(result.x), 1.0
        else:
            logger.debug(f"No admissible kappa (min margin {result.fun:.3e}); holding {v_prev}")
            return KappaSolution(None, v_prev, True)

    while upper - feasible > KAPPA_TOLERANCE:
        mid = 0.5 * (feasible + upper)
        if g(mid) <= 0:
            feasible = mid
        else:
            upper = mid

    return KappaSolution(feasible, v_prev + feasible * step, False)


def saturate(cfg: GovernorConfig, x_tilde_d: float) -> float:
    """Clip the governed reference to |x_tilde_d| <= x_bar_d."""
    if abs(x_tilde_d) <= cfg.x_bar_d:
        return x_tilde_d
    return math.copysign(cfg.x_bar_d, x_tilde_d)


def check_initial_feasibility(
    P: np.ndarray,
    z_m0: Tuple[float, float],
    x_tilde_d0: float,
    cfg: GovernorConfig,
    eps: float,
) -> bool:
    return lyapunov_value(P, z_m0, x_tilde_d0) <= gamma(P, x_tilde_d0, cfg.x_bar, eps)


def governor_update(
    state: GovernorState,
    cfg: GovernorConfig,
    P: np.ndarray,
    z_m: RefModelState,
    x_d: float,
    e: float,
    kappa_lower: Optional[float] = None,
) -> Tuple[GovernorState, GovernorStep]:
    """One governor sample: buffer, kappa search, saturation."""
    eps = buffer(cfg, e)
    solution = solve_kappa(state, cfg, P, z_m, x_d, eps, kappa_lower)
    x_tilde_d = solution.x_tilde_d
    step = GovernorStep(
        kappa=solution.kappa,
        x_tilde_d=x_tilde_d,
        x_tilde_d_sat=saturate(cfg, x_tilde_d),
        eps=eps,
        V=lyapunov_value(P, z_m, x_tilde_d),
        Gamma=gamma(P, x_tilde_d, cfg.x_bar, eps),
        infeasible=solution.infeasible,
    )
    new_state = GovernorState(
        x_tilde_d_prev=x_tilde_d,
        kappa_last=solution.kappa if solution.kappa is not None else state.kappa_last,
        infeasible_flag=solution.infeasible,
    )
    return new_state, step
