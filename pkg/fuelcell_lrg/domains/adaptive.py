"""Adaptive PI controller for the uncertain first-order plant.

    u = B_hat x + J_hat e1 + K e2
    dJ_hat/dt = gamma1 e1 e2,   dB_hat/dt = gamma2 x e2

with e = x_m - x, e1 = dx_m/dt + lambda e, e2 = e + lambda * integral(e).
The adaptation rates must share the sign of J so that the Lyapunov function
below is positive definite.
"""

import logging
from typing import NamedTuple, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..utils.error_handling import ConfigurationError


logger = logging.getLogger(__name__)


class AdaptiveGains(BaseModel):
    """Signed adaptation rates and the PI gains shared with the reference model."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    gamma1: float
    gamma2: float
    K: float = Field(lt=0)
    lam: float = Field(gt=0, alias="lambda")

    @model_validator(mode="after")
    def _rates_share_sign(self) -> "AdaptiveGains":
        if self.gamma1 * self.gamma2 <= 0:
            raise ValueError("gamma1 and gamma2 must be nonzero and of the same sign")
        return self

    @classmethod
    def from_magnitudes(
        cls, gamma1: float, gamma2: float, K: float, lam: float, J_nom: float
    ) -> "AdaptiveGains":
        """Build gains from rate magnitudes, applying sign(J_nom)."""
        gamma1, gamma2 = resolve_adaptation_rates(gamma1, gamma2, J_nom)
        return cls(gamma1=gamma1, gamma2=gamma2, K=K, lam=lam)


class AdaptiveState(NamedTuple):
    J_hat: float
    B_hat: float
    e_int: float


class ErrorSignals(NamedTuple):
    e: float
    e1: float
    e2: float


def resolve_adaptation_rates(gamma1: float, gamma2: float, J_nom: float) -> Tuple[float, float]:
    """Return (sign(J_nom)|gamma1|, sign(J_nom)|gamma2|)."""
    if J_nom == 0:
        raise ConfigurationError("J_nom must be nonzero to sign the adaptation rates")
    if gamma1 == 0 or gamma2 == 0:
        raise ConfigurationError(
            "Adaptation rates must be nonzero", {"gamma1": gamma1, "gamma2": gamma2}
        )
    sign = 1.0 if J_nom > 0 else -1.0
    signed = (sign * abs(gamma1), sign * abs(gamma2))
    logger.info(
        f"Applying sign(J_nom)={sign:+.0f} to adaptation rates: "
        f"gamma1={signed[0]:g}, gamma2={signed[1]:g}"
    )
    return signed


def tracking_errors(x: float, x_m: float, dx_m: float, e_int: float, lam: float) -> ErrorSignals:
    e = x_m - x
    return ErrorSignals(e=e, e1=dx_m + lam * e, e2=e + lam * e_int)


def control_input(st: AdaptiveState, x: float, err: ErrorSignals, K: float) -> float:
    """Coolant flow deviation u = B_hat x + J_hat e1 + K e2 (kg/s)."""
    return st.B_hat * x + st.J_hat * err.e1 + K * err.e2


def adaptation_derivatives(g: AdaptiveGains, err: ErrorSignals, x: float) -> Tuple[float, float]:
    """(dJ_hat/dt, dB_hat/dt)."""
    return g.gamma1 * err.e1 * err.e2, g.gamma2 * x * err.e2


def lyapunov_V(
    e2: float, J_hat: float, B_hat: float, J_true: float, B_true: float, g: AdaptiveGains
) -> float:
    """V = 1/2 (e2^2 + (1/J)(J_tilde^2/gamma1 + B_tilde^2/gamma2)); non-increasing in closed loop."""
    if not (g.gamma1 * J_true > 0 and g.gamma2 * J_true > 0):
        raise ConfigurationError(
            "Adaptation rates must share the sign of J for V to be positive definite",
            {"gamma1": g.gamma1, "gamma2": g.gamma2, "J": J_true},
        )
    J_tilde = J_hat - J_true
    B_tilde = B_hat - B_true
    return 0.5 * (e2 ** 2 + (J_tilde ** 2 / g.gamma1 + B_tilde ** 2 / g.gamma2) / J_true)
