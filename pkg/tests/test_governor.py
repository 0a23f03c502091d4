"""Tests for the Lyapunov-based reference governor."""

import numpy as np
import pytest

from fuelcell_lrg.domains.governor import (
    GovernorConfig,
    GovernorState,
    buffer,
    check_initial_feasibility,
    gamma,
    governor_update,
    lyapunov_value,
    saturate,
    solve_kappa,
)
from fuelcell_lrg.domains.plant import FuelCellParams, OperatingPoint, linearize
from fuelcell_lrg.domains.refmodel import RefModelGains, solve_lyapunov, system_matrices


def scenario_P():
    plant = linearize(FuelCellParams(), OperatingPoint())
    ss = system_matrices(RefModelGains(K=-1.0, lam=0.3, J_nom=plant.J, B_nom=plant.B))
    return solve_lyapunov(ss, np.eye(2))


def scenario_config(**overrides):
    values = {"x_bar": 0.5, "eps0": 0.055, "k_eps": 5.0}
    values.update(overrides)
    return GovernorConfig(**values)


def grid_gamma(P, x_tilde_d, x_bar, eps):
    """Smallest V over the two faces, by brute force over e_Im.

    A coarse scan locates the minimum on each face and a fine scan around it
    refines the value.
    """
    limit = x_bar - eps
    coarse = np.arange(-50.0, 50.0 + 5e-4, 1e-3)
    best = np.inf
    for face in (limit, -limit):
        c = face - x_tilde_d

        def face_values(e):
            return P[0, 0] * c * c + 2.0 * P[0, 1] * c * e + P[1, 1] * e * e

        center = coarse[int(np.argmin(face_values(coarse)))]
        fine = np.linspace(center - 1e-3, center + 1e-3, 20001)
        best = min(best, float(face_values(fine).min()))
    return best


class TestBuffer:
    """Test the time-varying buffer."""

    def setup_method(self):
        """Setup test fixtures."""
        self.cfg = scenario_config()

    def test_static_part(self):
        """Test eps = eps0 at zero tracking error."""
        assert buffer(self.cfg, 0.0) == 0.055

    def test_quadratic_growth(self):
        """Test eps0 + k_eps e^2."""
        assert buffer(self.cfg, 0.1) == pytest.approx(0.105)
        assert buffer(self.cfg, -0.1) == pytest.approx(0.105)

    def test_completing_the_square(self):
        """Test k_eps e^2 - |e| >= -1/(4 k_eps) with equality at 1/(2 k_eps)."""
        k = self.cfg.k_eps
        for e in np.linspace(-1.0, 1.0, 201):
            assert k * e * e - abs(e) >= -1.0 / (4.0 * k) - 1e-15
        e_star = 1.0 / (2.0 * k)
        assert k * e_star ** 2 - e_star == pytest.approx(-1.0 / (4.0 * k))


class TestGovernorConfig:
    """Test governor tunables."""

    def test_default_saturation_limit(self):
        """Test x_bar_d defaults to x_bar - eps0."""
        assert scenario_config().x_bar_d == pytest.approx(0.445)

    def test_buffer_must_leave_room(self):
        """Test eps0 < x_bar."""
        with pytest.raises(ValueError) as exc:
            scenario_config(eps0=0.5, x_bar_d=0.1)
        assert "eps0" in str(exc.value)

    def test_buffer_error_without_saturation_limit(self):
        """Test that eps0 >= x_bar is reported as such when x_bar_d is left to its default."""
        with pytest.raises(ValueError) as exc:
            scenario_config(eps0=0.6)
        assert "eps0" in str(exc.value)
        assert "must be smaller than x_bar" in str(exc.value)

    def test_saturation_limit_inside_tightened_set(self):
        """Test x_bar_d <= x_bar - eps0."""
        with pytest.raises(ValueError):
            scenario_config(x_bar_d=0.46)
        assert scenario_config(x_bar_d=0.3).x_bar_d == 0.3

    def test_positive_tunables(self):
        """Test Delta > 0 and T_s > 0."""
        with pytest.raises(ValueError):
            scenario_config(Delta=0.0)
        with pytest.raises(ValueError):
            scenario_config(T_s=0.0)


class TestGamma:
    """Test the closed-form Lyapunov threshold."""

    def setup_method(self):
        """Setup test fixtures."""
        self.P = scenario_P()
        self.schur = np.linalg.det(self.P) / self.P[1, 1]

    def test_symmetric_faces(self):
        """Test Gamma at x_tilde_d = 0."""
        assert gamma(self.P, 0.0, 0.5, 0.055) == pytest.approx(0.445 ** 2 * self.schur, rel=1e-12)

    def test_equilibrium_on_boundary(self):
        """Test Gamma = 0 when the equilibrium touches or leaves the tightened set."""
        assert gamma(self.P, 0.445, 0.5, 0.055) == 0.0
        assert gamma(self.P, -0.6, 0.5, 0.055) == 0.0
        assert gamma(self.P, 0.0, 0.5, 0.5) == 0.0
        assert gamma(self.P, 0.0, 0.5, 0.7) == 0.0

    def test_scenario_matches_grid(self):
        """Test the closed form against a boundary grid search."""
        closed = gamma(self.P, -0.35, 0.5, 0.055)
        assert closed == pytest.approx(grid_gamma(self.P, -0.35, 0.5, 0.055), rel=1e-3)

    def test_randomized_grid_oracle(self):
        """Test the closed form over randomized (P, x_tilde_d, eps) draws."""
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            M = rng.uniform(-1.0, 1.0, size=(2, 2))
            P = M @ M.T + 0.1 * np.eye(2)
            eps = rng.uniform(0.0, 0.2)
            limit = 0.5 - eps
            x_tilde_d = rng.uniform(-0.5 * limit, 0.5 * limit)

            closed = gamma(P, x_tilde_d, 0.5, eps)
            oracle = grid_gamma(P, x_tilde_d, 0.5, eps)
            assert closed <= oracle * (1.0 + 1e-9)
            assert oracle - closed <= 1e-3 * oracle

    def test_monotone_threshold(self):
        """Test Gamma is non-increasing in eps and in |x_tilde_d|."""
        eps_values = np.linspace(0.0, 0.4, 41)
        by_eps = [gamma(self.P, 0.1, 0.5, eps) for eps in eps_values]
        assert all(a >= b for a, b in zip(by_eps, by_eps[1:]))

        refs = np.linspace(0.0, 0.5, 51)
        by_ref = [gamma(self.P, r, 0.5, 0.055) for r in refs]
        assert all(a >= b for a, b in zip(by_ref, by_ref[1:]))
        by_neg = [gamma(self.P, -r, 0.5, 0.055) for r in refs]
        assert by_neg == pytest.approx(by_ref)


class TestLyapunovValue:
    """Test V around the held equilibrium."""

    def test_zero_at_equilibrium(self):
        """Test V(z_bar) = 0."""
        assert lyapunov_value(scenario_P(), (-0.2, 0.0), -0.2) == 0.0

    def test_positive_elsewhere(self):
        """Test V > 0 off the equilibrium."""
        P = scenario_P()
        rng = np.random.default_rng(1)
        for _ in range(50):
            w = rng.uniform(-1.0, 1.0, size=2)
            assert lyapunov_value(P, (0.1 + w[0], w[1]), 0.1) > 0

    def test_half_identity(self):
        """Test V with P = I/2 and offset (0.1, 0.2)."""
        P = 0.5 * np.eye(2)
        assert lyapunov_value(P, (0.3 + 0.1, 0.2), 0.3) == pytest.approx(0.025)


class TestSolveKappa:
    """Test the kappa line search."""

    def setup_method(self):
        """Setup test fixtures."""
        self.P = scenario_P()
        self.cfg = scenario_config()

    def g(self, z_m, v_prev, x_d, eps, kappa):
        v = v_prev + kappa * (x_d - v_prev)
        d = np.array([z_m[0] - v, z_m[1]])
        limit = self.cfg.x_bar - eps
        if abs(v) >= limit:
            return float(d @ self.P @ d)
        schur = self.P[0, 0] - self.P[0, 1] ** 2 / self.P[1, 1]
        return float(d @ self.P @ d) - schur * (limit - abs(v)) ** 2

    def bisect(self, z_m, v_prev, x_d, eps):
        lo, hi = 0.0, 1.0
        if self.g(z_m, v_prev, x_d, eps, 1.0) <= 0:
            return 1.0
        while hi - lo > 1e-13:
            mid = 0.5 * (lo + hi)
            if self.g(z_m, v_prev, x_d, eps, mid) <= 0:
                lo = mid
            else:
                hi = mid
        return lo

    def test_unchanged_command(self):
        """Test kappa = 1 at the equilibrium of an unchanged command."""
        sol = solve_kappa(GovernorState(0.2), self.cfg, self.P, (0.2, 0.0), 0.2, 0.055)
        assert sol.kappa == 1.0
        assert sol.x_tilde_d == 0.2
        assert not sol.infeasible

    def test_far_command_is_slowed(self):
        """Test an active constraint for a command beyond x_bar."""
        eps = 0.055
        sol = solve_kappa(GovernorState(0.0), self.cfg, self.P, (0.0, 0.0), 2.0, eps)
        assert 0.0 < sol.kappa < 1.0
        assert sol.x_tilde_d == pytest.approx(sol.kappa * 2.0)

        V = lyapunov_value(self.P, (0.0, 0.0), sol.x_tilde_d)
        G = gamma(self.P, sol.x_tilde_d, 0.5, eps)
        assert abs(V - G) <= 1e-6 * max(G, 1.0)
        assert sol.kappa == pytest.approx(self.bisect((0.0, 0.0), 0.0, 2.0, eps), abs=1e-9)

    def test_infeasible_hold(self):
        """Test that a state outside every admissible set holds the reference."""
        sol = solve_kappa(GovernorState(0.0), self.cfg, self.P, (0.3, 0.0), 0.0, 0.3)
        assert sol.infeasible
        assert sol.kappa is None
        assert sol.x_tilde_d == 0.0

    def test_randomized_bisection_oracle(self):
        """Test agreement with a bisection oracle on randomized instances."""
        rng = np.random.default_rng(99)
        for _ in range(500):
            eps = rng.uniform(0.055, 0.15)
            limit = self.cfg.x_bar - eps
            v_prev = rng.uniform(-0.6 * limit, 0.6 * limit)

            direction = rng.normal(size=2)
            level = rng.uniform(0.0, 0.9) * gamma(self.P, v_prev, self.cfg.x_bar, eps)
            w = direction * np.sqrt(level / float(direction @ self.P @ direction))
            z_m = (v_prev + w[0], w[1])
            x_d = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 3.0)

            sol = solve_kappa(GovernorState(v_prev), self.cfg, self.P, z_m, x_d, eps)
            assert not sol.infeasible
            assert sol.kappa == pytest.approx(self.bisect(z_m, v_prev, x_d, eps), abs=1e-9)

            if sol.kappa < 1.0:
                V = lyapunov_value(self.P, z_m, sol.x_tilde_d)
                G = gamma(self.P, sol.x_tilde_d, self.cfg.x_bar, eps)
                assert abs(V - G) <= 1e-6 * max(G, 1.0)

    def test_conventional_range(self):
        """Test that kappa_lower=0 keeps kappa in [0, 1]."""
        sol = solve_kappa(GovernorState(0.0), self.cfg, self.P, (0.0, 0.0), 2.0, 0.055, kappa_lower=0.0)
        assert 0.0 <= sol.kappa < 1.0


class TestSaturation:
    """Test the saturation block."""

    def setup_method(self):
        """Setup test fixtures."""
        self.cfg = scenario_config()

    def test_identity_branch(self):
        """Test that small references pass unchanged."""
        assert saturate(self.cfg, 0.3) == 0.3

    def test_clipping(self):
        """Test clipping to x_bar_d."""
        assert saturate(self.cfg, 0.6) == pytest.approx(0.445)

    def test_odd_symmetry(self):
        """Test saturate(-a) = -saturate(a)."""
        for a in (0.1, 0.445, 0.6, 3.0):
            assert saturate(self.cfg, -a) == -saturate(self.cfg, a)


class TestInitialFeasibility:
    """Test the startup check."""

    def setup_method(self):
        """Setup test fixtures."""
        self.cfg = scenario_config()

    def test_equilibrium_start(self):
        """Test that starting at the equilibrium is feasible."""
        assert check_initial_feasibility(scenario_P(), (0.1, 0.0), 0.1, self.cfg, 0.055)

    def test_far_start(self):
        """Test that a state far outside the tightened set is infeasible."""
        assert not check_initial_feasibility(scenario_P(), (0.49, 0.0), 0.0, self.cfg, 0.055)

    def test_boundary_is_feasible(self):
        """Test that V = Gamma exactly counts as feasible."""
        P = np.eye(2)
        eps = 0.055
        limit = self.cfg.x_bar - eps
        assert lyapunov_value(P, (limit, 0.0), 0.0) == gamma(P, 0.0, self.cfg.x_bar, eps)
        assert check_initial_feasibility(P, (limit, 0.0), 0.0, self.cfg, eps)


class TestGovernorUpdate:
    """Test one full governor sample."""

    def setup_method(self):
        """Setup test fixtures."""
        self.P = scenario_P()
        self.cfg = scenario_config()

    def test_sample_outputs(self):
        """Test buffer, kappa and saturation in one call."""
        state, step = governor_update(GovernorState(0.0), self.cfg, self.P, (0.0, 0.0), -0.35, 0.1)
        assert step.eps == pytest.approx(0.105)
        assert 0.0 < step.kappa < 1.0
        assert step.x_tilde_d_sat == step.x_tilde_d
        assert step.V <= step.Gamma + 1e-12
        assert state.x_tilde_d_prev == step.x_tilde_d
        assert state.kappa_last == step.kappa
        assert not state.infeasible_flag

    def test_infeasible_sample_keeps_last_kappa(self):
        """Test that an infeasible sample flags the state and keeps kappa_last."""
        start = GovernorState(0.0, kappa_last=0.4)
        state, step = governor_update(start, self.cfg, self.P, (0.3, 0.0), 0.0, 0.22)
        assert step.infeasible
        assert state.infeasible_flag
        assert state.kappa_last == 0.4
        assert state.x_tilde_d_prev == 0.0
