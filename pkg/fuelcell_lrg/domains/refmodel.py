"""Nominal PI closed loop used as the reference model.

With the nominal plant J_nom dx_m/dt = -B_nom x_m + u and the PI law

    u = B_nom x_m + J_nom (dx_d/dt + lambda e_m) + K e_2m,

the loop is linear in z_m = [x_m, e_Im] (de_Im/dt = e_m = x_d - x_m):

    dz_m/dt = A_m z_m + b_m x_d + [1, 0]^T dx_d/dt.
"""

import logging
from typing import NamedTuple, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..utils.error_handling import ConfigurationError, handle_model_errors


logger = logging.getLogger(__name__)


class RefModelGains(BaseModel):
    """PI gains and the nominal plant they were designed for."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    K: float = Field(lt=0)
    lam: float = Field(gt=0, alias="lambda")
    J_nom: float = Field(lt=0)
    B_nom: float

    @model_validator(mode="after")
    def _loop_is_stable(self) -> "RefModelGains":
        if not self.K / self.J_nom > 0:
            raise ValueError("K / J_nom must be positive")
        return self


class RefModelState(NamedTuple):
    x_m: float
    e_Im: float


class StateSpace2(NamedTuple):
    A_m: np.ndarray
    b_m: np.ndarray


def is_hurwitz(A: np.ndarray) -> bool:
    return bool(np.all(np.linalg.eigvals(A).real < 0))


def system_matrices(g: RefModelGains) -> StateSpace2:
    """State-space form of the reference model for a constant command."""
    J = g.J_nom
    a = (g.K + J * g.lam) / J
    A_m = np.array([[-a, g.K * g.lam / J], [-1.0, 0.0]])
    b_m = np.array([a, 1.0])
    if not is_hurwitz(A_m):
        raise ConfigurationError(
            "Reference model matrix is not Hurwitz",
            {"A_m": A_m.tolist(), "eigenvalues": [complex(v) for v in np.linalg.eigvals(A_m)]},
        )
    return StateSpace2(A_m, b_m)


def equilibrium(ss: StateSpace2, x_d: float) -> RefModelState:
    """Steady state -A_m^{-1} b_m x_d; equals (x_d, 0)."""
    z = -np.linalg.solve(ss.A_m, ss.b_m * x_d)
    return RefModelState(float(z[0]), float(z[1]))


def dc_gain(ss: StateSpace2) -> float:
    """Steady-state gain from x_d to x_m."""
    return float(-np.linalg.solve(ss.A_m, ss.b_m)[0])


def ref_model_derivative(
    ss: StateSpace2, z: Tuple[float, float], x_d_in: float, dx_d: float = 0.0
) -> np.ndarray:
    """A_m z + b_m x_d_in, plus the rate input [1, 0]^T dx_d when given."""
    (a11, a12), (a21, a22) = ss.A_m
    b1, b2 = ss.b_m
    x_m, e_Im = z
    return np.array([
        a11 * x_m + a12 * e_Im + b1 * x_d_in + dx_d,
        a21 * x_m + a22 * e_Im + b2 * x_d_in,
    ])


@handle_model_errors
def solve_lyapunov(ss: StateSpace2, Q: np.ndarray) -> np.ndarray:
    """Solve A_m^T P + P A_m = -Q for symmetric positive definite P.

    The 2x2 symmetric problem has three unknowns (p11, p12, p22), solved as a
    single dense linear system.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (2, 2) or not np.allclose(Q, Q.T):
        raise ConfigurationError("Q must be a symmetric 2x2 matrix", {"Q": Q.tolist()})
    if np.any(np.linalg.eigvalsh(Q) <= 0):
        raise ConfigurationError("Q must be positive definite", {"Q": Q.tolist()})
    if not is_hurwitz(ss.A_m):
        raise ConfigurationError("A_m must be Hurwitz", {"A_m": ss.A_m.tolist()})

    (a, b), (c, d) = ss.A_m
    mat33 = np.array([
        [2 * a, 2 * c, 0.0],
        [b, a + d, c],
        [0.0, 2 * b, 2 * d],
    ])
    rhs = -np.array([Q[0, 0], Q[0, 1], Q[1, 1]])
    p11, p12, p22 = np.linalg.solve(mat33, rhs)
    P = np.array([[p11, p12], [p12, p22]])

    residual = np.max(np.abs(ss.A_m.T @ P + P @ ss.A_m + Q))
    logger.debug(f"Lyapunov solve residual {residual:.3e}")
    return P


def nominal_pi_control(
    g: RefModelGains, x_m: float, e_m: float, e_2m: float, dx_d: float
) -> float:
    """u = B_nom x_m + J_nom (dx_d + lambda e_m) + K e_2m."""
    return g.B_nom * x_m + g.J_nom * (dx_d + g.lam * e_m) + g.K * e_2m
