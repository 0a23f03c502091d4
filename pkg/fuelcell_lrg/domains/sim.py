"""Closed-loop simulation of plant, reference model, adaptive PI and governor.

The continuous state (x, x_m, e_Im, e_int, J_hat, B_hat) is integrated with
fixed-step RK4. The governor runs every T_s seconds and its saturated output
is held constant in between, so every RK4 step sees a smooth right-hand side.
"""

import logging
import math
from enum import Enum
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..utils.error_handling import (
    InfeasibleStartError,
    InvariantViolationError,
    NumericalError,
    handle_model_errors,
)
from .adaptive import (
    AdaptiveGains,
    AdaptiveState,
    ErrorSignals,
    adaptation_derivatives,
    control_input,
    lyapunov_V,
    tracking_errors,
)
from .governor import (
    GovernorConfig,
    GovernorState,
    buffer,
    check_initial_feasibility,
    gamma,
    governor_update,
    lyapunov_value,
)
from .plant import (
    FuelCellParams,
    LinearPlant,
    OperatingPoint,
    bilinear_derivative,
    linearize,
    nominal_coolant_flow,
    perturb,
)
from .refmodel import (
    RefModelGains,
    RefModelState,
    StateSpace2,
    ref_model_derivative,
    solve_lyapunov,
    system_matrices,
)


logger = logging.getLogger(__name__)

# Continuous state layout
X, X_M, E_IM, E_INT, J_HAT, B_HAT = range(6)

CSV_SCHEMA_VERSION = 1
INTERVAL_TOLERANCE = 1e-9
KAPPA_CONVERGENCE_TOLERANCE = 1e-6


class PlantModel(str, Enum):
    """Plant used as the 'true' system."""

    LINEAR = "linear"
    BILINEAR = "bilinear"


class SetpointStep(BaseModel):
    """Command x_d applied from t_start onwards."""

    model_config = ConfigDict(frozen=True)

    t_start: float = Field(ge=0)
    x_d: float


class SimConfig(BaseModel):
    """Everything a closed-loop run depends on."""

    model_config = ConfigDict(frozen=True)

    # Plant
    params: FuelCellParams = FuelCellParams()
    operating_point: OperatingPoint = OperatingPoint()
    rel_J: float = 0.11
    rel_B: float = 0.22
    plant_model: PlantModel = PlantModel.LINEAR

    # Controller (adaptation rates are magnitudes; sign(J_nom) is applied)
    K: float = Field(-1.0, lt=0)
    lam: float = Field(0.3, gt=0)
    gamma1: float = Field(5.0, gt=0)
    gamma2: float = Field(1.0, gt=0)
    J_hat0: Optional[float] = None
    B_hat0: Optional[float] = None

    # Governor
    governor: GovernorConfig = GovernorConfig(x_bar=0.5, eps0=0.055, k_eps=5.0)
    Q: Tuple[Tuple[float, float], Tuple[float, float]] = ((1.0, 0.0), (0.0, 1.0))
    governed: bool = True

    # Run
    duration: float = Field(100.0, gt=0)
    dt: float = Field(0.01, gt=0)
    x_d: float = -0.35
    setpoint_schedule: Optional[Tuple[SetpointStep, ...]] = None
    x0: float = 0.0
    x_m0: float = 0.0
    e_Im0: float = 0.0
    e_int0: float = 0.0
    x_tilde_d0: float = 0.0

    # Monitors
    delta: Optional[float] = None
    sanity_bound: float = Field(100.0, gt=0)
    settle_tolerance: float = Field(0.01, gt=0)
    convergence_window: float = Field(10.0, ge=0)

    @model_validator(mode="after")
    def _check_timing_and_monitor(self) -> "SimConfig":
        ratio = self.governor.T_s / self.dt
        if round(ratio) < 1 or abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(
                f"T_s ({self.governor.T_s}) must be a positive integer multiple of dt ({self.dt})"
            )
        lower, upper = delta_bounds(self.governor)
        delta = self.monitor_delta
        if not lower < delta < upper:
            raise ValueError(
                f"delta ({delta}) must satisfy 1/(4 k_eps) = {lower} < delta < eps0 = {upper}"
            )
        if self.setpoint_schedule is not None:
            starts = [step.t_start for step in self.setpoint_schedule]
            if not starts or starts[0] != 0 or starts != sorted(starts):
                raise ValueError("setpoint_schedule must start at t=0 and be sorted by t_start")
        return self

    @property
    def monitor_delta(self) -> float:
        if self.delta is not None:
            return self.delta
        lower, upper = delta_bounds(self.governor)
        return 0.5 * (lower + upper)

    @property
    def governor_stride(self) -> int:
        return int(round(self.governor.T_s / self.dt))

    def command_at(self, t: float) -> float:
        """Setpoint command in force at time t."""
        if self.setpoint_schedule is None:
            return self.x_d
        x_d = self.setpoint_schedule[0].x_d
        for step in self.setpoint_schedule:
            if step.t_start <= t + 1e-12:
                x_d = step.x_d
            else:
                break
        return x_d

    @property
    def final_command(self) -> float:
        return self.command_at(self.duration)


class ClosedLoopModel(NamedTuple):
    """Derived, read-only quantities shared by every step of a run."""

    nominal: LinearPlant
    true_plant: LinearPlant
    w_c0: float
    ref_gains: RefModelGains
    adaptive_gains: AdaptiveGains
    ss: StateSpace2
    P: np.ndarray


class SimRecord(BaseModel):
    """One integration step of the closed loop."""

    model_config = ConfigDict(frozen=True)

    t: float
    x: float
    x_m: float
    e_Im: float
    e: float
    e1: float
    e2: float
    J_hat: float
    B_hat: float
    u: float
    x_d: float
    x_tilde_d: float
    x_tilde_d_sat: float
    kappa: Optional[float]
    eps: float
    V_gov: float
    Gamma: float
    V_adapt: float
    infeasible_flag: bool
    violation_flag: bool
    interval_ok: bool


CSV_COLUMNS = list(SimRecord.model_fields)


class SimSummary(BaseModel):
    """Safety and convergence verdicts derived from a record stream."""

    governed: bool
    delta: float
    safety_bound: float
    max_abs_x: float
    max_abs_x_m: float
    final_x: float
    final_e2: float
    settled: bool
    safety_ok: bool
    kappa_converged: bool
    any_infeasible: bool
    infeasible_count: int
    violation_count: int


class RunResult(NamedTuple):
    records: List[SimRecord]
    summary: SimSummary


class Comparison(BaseModel):
    """Side-by-side summaries of two runs of the same plant and command."""

    summary_a: SimSummary
    summary_b: SimSummary
    max_abs_x_delta: float = Field(description="summary_b.max_abs_x - summary_a.max_abs_x")
    violation_intervals_a: List[Tuple[float, float]]
    violation_intervals_b: List[Tuple[float, float]]


class ReferenceTrajectory(NamedTuple):
    t: np.ndarray
    x_m: np.ndarray
    e_Im: np.ndarray
    x_tilde_d: np.ndarray
    kappa: np.ndarray


def delta_bounds(governor: GovernorConfig) -> Tuple[float, float]:
    """Open interval (1/(4 k_eps), eps0) the safety monitor's delta must lie in."""
    lower = math.inf if governor.k_eps == 0 else 1.0 / (4.0 * governor.k_eps)
    return lower, governor.eps0


def safety_bound(cfg: SimConfig, delta: Optional[float] = None) -> float:
    """x_bar - (eps0 - delta)."""
    delta = cfg.monitor_delta if delta is None else delta
    return cfg.governor.x_bar - (cfg.governor.eps0 - delta)


@handle_model_errors
def prepare_model(cfg: SimConfig) -> ClosedLoopModel:
    """Linearize, perturb and design the reference model for a run."""
    nominal = linearize(cfg.params, cfg.operating_point)
    if cfg.plant_model is PlantModel.LINEAR:
        true_plant = perturb(nominal, cfg.rel_J, cfg.rel_B)
    else:
        true_plant = nominal
        if cfg.rel_J or cfg.rel_B:
            logger.info(
                f"Bilinear plant ignores rel_J={cfg.rel_J} and rel_B={cfg.rel_B}; "
                "V_adapt is taken against the nominal J and B"
            )
    ref_gains = RefModelGains(K=cfg.K, lam=cfg.lam, J_nom=nominal.J, B_nom=nominal.B)
    ss = system_matrices(ref_gains)
    P = solve_lyapunov(ss, np.array(cfg.Q, dtype=float))
    adaptive_gains = AdaptiveGains.from_magnitudes(
        cfg.gamma1, cfg.gamma2, cfg.K, cfg.lam, nominal.J
    )
    logger.info(
        f"Nominal plant J={nominal.J:.4f}, B={nominal.B:.4f}; "
        f"true plant J={true_plant.J:.4f}, B={true_plant.B:.4f} ({cfg.plant_model.value})"
    )
    return ClosedLoopModel(
        nominal=nominal,
        true_plant=true_plant,
        w_c0=nominal_coolant_flow(cfg.params, cfg.operating_point),
        ref_gains=ref_gains,
        adaptive_gains=adaptive_gains,
        ss=ss,
        P=P,
    )


def _signals(
    model: ClosedLoopModel, state: np.ndarray, x_tilde_d_sat: float
) -> Tuple[np.ndarray, ErrorSignals, float]:
    x, x_m, e_Im, e_int, J_hat, B_hat = state
    dz_m = ref_model_derivative(model.ss, (x_m, e_Im), x_tilde_d_sat)
    err = tracking_errors(x, x_m, dz_m[0], e_int, model.ref_gains.lam)
    u = control_input(AdaptiveState(J_hat, B_hat, e_int), x, err, model.ref_gains.K)
    return dz_m, err, u


def closed_loop_derivative(
    model: ClosedLoopModel, cfg: SimConfig, state: np.ndarray, x_tilde_d_sat: float
) -> np.ndarray:
    """Time derivative of (x, x_m, e_Im, e_int, J_hat, B_hat) for a held reference."""
    dz_m, err, u = _signals(model, state, x_tilde_d_sat)
    x = state[X]

    if cfg.plant_model is PlantModel.LINEAR:
        plant = model.true_plant
        dx = (-plant.B * x + u) / plant.J
    else:
        op = cfg.operating_point
        w_c = max(model.w_c0 + u, 0.0)
        dx = bilinear_derivative(cfg.params, op.T_st0 + x, w_c, op.I0, op.T_in)

    dJ_hat, dB_hat = adaptation_derivatives(model.adaptive_gains, err, x)
    derivative = np.array([dx, dz_m[0], dz_m[1], err.e, dJ_hat, dB_hat])
    if not np.all(np.isfinite(derivative)):
        raise NumericalError(
            "Non-finite closed-loop derivative",
            {"state": state.tolist(), "derivative": derivative.tolist()},
        )
    return derivative


def step_rk4(
    state: np.ndarray, derivative_fn: Callable[[np.ndarray], np.ndarray], dt: float
) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    if not dt > 0:
        raise NumericalError(f"Step size must be positive, got {dt}")
    y = np.asarray(state, dtype=float)
    k1 = derivative_fn(y)
    k2 = derivative_fn(y + 0.5 * dt * k1)
    k3 = derivative_fn(y + 0.5 * dt * k2)
    k4 = derivative_fn(y + dt * k3)
    y_next = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(y_next)):
        raise NumericalError("Non-finite RK4 step", {"state": np.atleast_1d(y).tolist()})
    return y_next


def initial_state(cfg: SimConfig, model: ClosedLoopModel) -> np.ndarray:
    J_hat0 = model.nominal.J if cfg.J_hat0 is None else cfg.J_hat0
    B_hat0 = model.nominal.B if cfg.B_hat0 is None else cfg.B_hat0
    return np.array([cfg.x0, cfg.x_m0, cfg.e_Im0, cfg.e_int0, J_hat0, B_hat0], dtype=float)


@handle_model_errors
def run_scenario(cfg: SimConfig) -> RunResult:
    """Simulate the closed loop and evaluate the safety/convergence monitors."""
    model = prepare_model(cfg)
    gov_cfg = cfg.governor
    state = initial_state(cfg, model)
    bound = safety_bound(cfg)

    gov_state = GovernorState(x_tilde_d_prev=cfg.x_tilde_d0)
    if cfg.governed:
        z_m0 = RefModelState(cfg.x_m0, cfg.e_Im0)
        eps_start = buffer(gov_cfg, cfg.x_m0 - cfg.x0)
        if not check_initial_feasibility(model.P, z_m0, cfg.x_tilde_d0, gov_cfg, eps_start):
            V0 = lyapunov_value(model.P, z_m0, cfg.x_tilde_d0)
            G0 = gamma(model.P, cfg.x_tilde_d0, gov_cfg.x_bar, eps_start)
            raise InfeasibleStartError(
                f"Initial state is outside the governor's admissible set (V={V0:.6g} > Gamma={G0:.6g})",
                {"V": V0, "Gamma": G0, "x_tilde_d0": cfg.x_tilde_d0, "z_m0": list(z_m0)},
            )

    n_steps = int(round(cfg.duration / cfg.dt))
    stride = cfg.governor_stride
    records: List[SimRecord] = []
    infeasible_count = 0
    clipped_warned = False

    kappa: Optional[float] = None
    x_tilde_d = x_tilde_d_sat = cfg.x_tilde_d0
    eps = gov_cfg.eps0

    logger.info(
        f"Running {'governed' if cfg.governed else 'ungoverned'} scenario: "
        f"{n_steps} steps of {cfg.dt} s, governor every {stride} steps"
    )

    for k in range(n_steps + 1):
        t = k * cfg.dt
        x_d = cfg.command_at(t)

        if k % stride == 0:
            e = state[X_M] - state[X]
            if cfg.governed:
                z_m = RefModelState(state[X_M], state[E_IM])
                gov_state, gov_step = governor_update(gov_state, gov_cfg, model.P, z_m, x_d, e)
                kappa = gov_step.kappa
                x_tilde_d = gov_step.x_tilde_d
                x_tilde_d_sat = gov_step.x_tilde_d_sat
                eps = gov_step.eps
                if gov_step.infeasible:
                    infeasible_count += 1
                    if infeasible_count == 1:
                        logger.warning(f"Governor infeasible at t={t:.3f} s; holding x_tilde_d={x_tilde_d:.6g}")
                else:
                    logger.debug(f"t={t:.3f} kappa={kappa:.6f} x_tilde_d={x_tilde_d:.6f}")
            else:
                kappa = None
                x_tilde_d = x_tilde_d_sat = x_d
                eps = buffer(gov_cfg, e)

        records.append(
            _make_record(model, cfg, state, t, x_d, x_tilde_d, x_tilde_d_sat, kappa, eps,
                         gov_state.infeasible_flag if cfg.governed else False, bound)
        )
        if (
            cfg.plant_model is PlantModel.BILINEAR
            and not clipped_warned
            and model.w_c0 + records[-1].u < 0
        ):
            clipped_warned = True
            logger.warning(f"Coolant flow w_c0 + u clipped at zero from t={t:.3f} s")

        if k == n_steps:
            break

        state = step_rk4(
            state, lambda s: closed_loop_derivative(model, cfg, s, x_tilde_d_sat), cfg.dt
        )
        if np.max(np.abs(state)) > cfg.sanity_bound:
            raise NumericalError(
                f"Closed-loop state exceeded the sanity bound {cfg.sanity_bound} at t={t + cfg.dt:.3f} s",
                {"state": state.tolist()},
            )

    if infeasible_count:
        logger.warning(f"Governor was infeasible at {infeasible_count} samples")

    summary = summarize(records, cfg)
    logger.info(
        f"Scenario finished: max|x|={summary.max_abs_x:.6f}, safety_ok={summary.safety_ok}, "
        f"settled={summary.settled}, kappa_converged={summary.kappa_converged}"
    )
    if not summary.safety_ok:
        logger.warning(f"Safety bound {bound:.6g} exceeded at {summary.violation_count} records")
    return RunResult(records, summary)


def _make_record(
    model: ClosedLoopModel,
    cfg: SimConfig,
    state: np.ndarray,
    t: float,
    x_d: float,
    x_tilde_d: float,
    x_tilde_d_sat: float,
    kappa: Optional[float],
    eps: float,
    infeasible: bool,
    bound: float,
) -> SimRecord:
    _, err, u = _signals(model, state, x_tilde_d_sat)
    x = float(state[X])
    z_m = (state[X_M], state[E_IM])
    x_bar = cfg.governor.x_bar
    interval_ok = (
        -x_bar + (eps - err.e) - INTERVAL_TOLERANCE
        <= x
        <= x_bar - (eps + err.e) + INTERVAL_TOLERANCE
    )
    return SimRecord(
        t=t,
        x=x,
        x_m=float(state[X_M]),
        e_Im=float(state[E_IM]),
        e=float(err.e),
        e1=float(err.e1),
        e2=float(err.e2),
        J_hat=float(state[J_HAT]),
        B_hat=float(state[B_HAT]),
        u=float(u),
        x_d=x_d,
        x_tilde_d=x_tilde_d,
        x_tilde_d_sat=x_tilde_d_sat,
        kappa=kappa,
        eps=eps,
        V_gov=float(lyapunov_value(model.P, z_m, x_tilde_d)),
        Gamma=float(gamma(model.P, x_tilde_d, x_bar, eps)),
        V_adapt=lyapunov_V(
            float(err.e2), float(state[J_HAT]), float(state[B_HAT]),
            model.true_plant.J, model.true_plant.B, model.adaptive_gains,
        ),
        infeasible_flag=infeasible,
        violation_flag=abs(x) > bound,
        interval_ok=bool(interval_ok),
    )


def summarize(records: List[SimRecord], cfg: SimConfig, delta: Optional[float] = None) -> SimSummary:
    """Derive the run verdicts; ``delta`` overrides the configured monitor value."""
    delta = cfg.monitor_delta if delta is None else delta
    bound = safety_bound(cfg, delta)
    last = records[-1]
    window_start = last.t - cfg.convergence_window - 1e-9
    tail = [r for r in records if r.t >= window_start]
    violations = sum(1 for r in records if abs(r.x) > bound)
    infeasible = sum(1 for r in records[:: cfg.governor_stride] if r.infeasible_flag)

    return SimSummary(
        governed=cfg.governed,
        delta=delta,
        safety_bound=bound,
        max_abs_x=max(abs(r.x) for r in records),
        max_abs_x_m=max(abs(r.x_m) for r in records),
        final_x=last.x,
        final_e2=last.e2,
        settled=abs(last.x - cfg.final_command) < cfg.settle_tolerance,
        safety_ok=violations == 0,
        kappa_converged=bool(tail) and all(
            r.kappa == 1.0 and abs(r.x_tilde_d - r.x_d) <= KAPPA_CONVERGENCE_TOLERANCE
            for r in tail
        ),
        any_infeasible=infeasible > 0,
        infeasible_count=infeasible,
        violation_count=violations,
    )


def violation_intervals(records: List[SimRecord], bound: float) -> List[Tuple[float, float]]:
    """Maximal time intervals during which |x| > bound."""
    intervals: List[Tuple[float, float]] = []
    start: Optional[float] = None
    previous_t = records[0].t if records else 0.0
    for record in records:
        if abs(record.x) > bound:
            if start is None:
                start = record.t
        elif start is not None:
            intervals.append((start, previous_t))
            start = None
        previous_t = record.t
    if start is not None:
        intervals.append((start, previous_t))
    return intervals


def _same_plant_and_command(cfg_a: SimConfig, cfg_b: SimConfig) -> bool:
    fields = ("params", "operating_point", "rel_J", "rel_B", "plant_model",
              "x_d", "setpoint_schedule", "duration", "dt")
    return all(getattr(cfg_a, name) == getattr(cfg_b, name) for name in fields)


def compare_runs(cfg_a: SimConfig, cfg_b: SimConfig) -> Tuple[RunResult, RunResult, Comparison]:
    """Run two scenarios on the same plant and command and compare them."""
    if not _same_plant_and_command(cfg_a, cfg_b):
        raise InvariantViolationError(
            "compare_runs needs identical plant, perturbation and setpoint command"
        )
    run_a = run_scenario(cfg_a)
    run_b = run_scenario(cfg_b)
    comparison = Comparison(
        summary_a=run_a.summary,
        summary_b=run_b.summary,
        max_abs_x_delta=run_b.summary.max_abs_x - run_a.summary.max_abs_x,
        violation_intervals_a=violation_intervals(run_a.records, run_a.summary.safety_bound),
        violation_intervals_b=violation_intervals(run_b.records, run_b.summary.safety_bound),
    )
    return run_a, run_b, comparison


def records_frame(records: List[SimRecord]) -> pd.DataFrame:
    """Records as a DataFrame with the fixed CSV column order."""
    return pd.DataFrame([r.model_dump() for r in records], columns=CSV_COLUMNS)


def run_reference_model(
    ss: StateSpace2,
    P: np.ndarray,
    gov_cfg: GovernorConfig,
    schedule: List[SetpointStep],
    duration: float,
    dt: float,
    z0: Tuple[float, float] = (0.0, 0.0),
    x_tilde_d0: float = 0.0,
) -> ReferenceTrajectory:
    """Governed reference model alone, with the static buffer eps0 and kappa in [0, 1]."""
    if not check_initial_feasibility(P, z0, x_tilde_d0, gov_cfg, gov_cfg.eps0):
        raise InfeasibleStartError("Reference model starts outside the admissible set")

    stride = int(round(gov_cfg.T_s / dt))
    if stride < 1 or abs(gov_cfg.T_s / dt - stride) > 1e-9:
        raise InvariantViolationError("T_s must be an integer multiple of dt")
    n_steps = int(round(duration / dt))
    steps = sorted(schedule, key=lambda s: s.t_start)
    static = gov_cfg.model_copy(update={"k_eps": 0.0})

    z = np.array(z0, dtype=float)
    gov_state = GovernorState(x_tilde_d_prev=x_tilde_d0)
    out = np.empty((n_steps + 1, 5))
    v = x_tilde_d0
    kappa = math.nan

    for k in range(n_steps + 1):
        t = k * dt
        x_d = steps[0].x_d
        for s in steps:
            if s.t_start <= t + 1e-12:
                x_d = s.x_d
        if k % stride == 0:
            gov_state, gov_step = governor_update(
                gov_state, static, P, RefModelState(z[0], z[1]), x_d, 0.0, kappa_lower=0.0
            )
            v = gov_step.x_tilde_d_sat
            kappa = math.nan if gov_step.kappa is None else gov_step.kappa
        out[k] = (t, z[0], z[1], v, kappa)
        if k == n_steps:
            break
        z = step_rk4(z, lambda w: ref_model_derivative(ss, w, v), dt)

    return ReferenceTrajectory(out[:, 0], out[:, 1], out[:, 2], out[:, 3], out[:, 4])
