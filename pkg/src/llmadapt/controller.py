"""Hover-linearized LQR position controller with an additive adaptive term.

The control law is ``u = u_hover + K (x - x_ref) + du`` where ``K`` is stored
already negated, so the formula applies literally.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm, solve_discrete_lyapunov
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .dynamics import GRAVITY, ControlCommand, VehicleState

logger = logging.getLogger(__name__)

N_STATE = 8
N_INPUT = 3

POSITION = slice(0, 3)
VELOCITY = slice(3, 6)
ATTITUDE = slice(6, 8)
ATTITUDE_CMD = slice(0, 2)
THRUST = slice(2, 3)

WEIGHT_MIN = 1e-6
WEIGHT_MAX = 1e6


class DareConvergenceError(RuntimeError):
    """The Riccati iteration did not converge."""


@dataclass(frozen=True)
class LinearModel:
    A: np.ndarray
    B: np.ndarray
    dt: float
    mass_param: float

    def __post_init__(self):
        if self.A.shape != (N_STATE, N_STATE) or self.B.shape != (N_STATE, N_INPUT):
            raise ValueError(f"expected 8x8 and 8x3 matrices, got {self.A.shape} and {self.B.shape}")


@dataclass(frozen=True)
class CostWeights:
    """Diagonal LQR weights.

    ``Q`` diagonal is ordered position (3), velocity (3), attitude (2);
    ``R`` diagonal is attitude command (2), thrust (1).
    """

    q: np.ndarray = field(default_factory=lambda: np.array([10.0] * 3 + [1.0] * 3 + [1.0] * 2))
    r: np.ndarray = field(default_factory=lambda: np.array([5.0, 5.0, 1.0]))

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        r = np.asarray(self.r, dtype=float)
        if q.shape != (N_STATE,) or r.shape != (N_INPUT,):
            raise ValueError("q must have 8 entries and r must have 3")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(r))):
            raise ValueError("weights must be finite")
        if np.any(q < 0) or np.any(r <= 0):
            raise ValueError("Q must be nonnegative and R positive")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)

    @property
    def Q(self) -> np.ndarray:
        return np.diag(self.q)

    @property
    def R(self) -> np.ndarray:
        return np.diag(self.r)


@dataclass(frozen=True)
class GainSolution:
    P: np.ndarray
    K: np.ndarray
    residual: float
    iterations: int = 0

    def closed_loop_radius(self, model: LinearModel) -> float:
        return spectral_radius(model.A + model.B @ self.K)


@dataclass(frozen=True)
class AdaptiveState:
    thrust_offset: float = 0.0
    roll_offset: float = 0.0
    pitch_offset: float = 0.0

    def as_vector(self) -> np.ndarray:
        return np.array([self.roll_offset, self.pitch_offset, self.thrust_offset])


@dataclass(frozen=True)
class HoverCommand:
    """Operating point of the linearization: level attitude, thrust ``f_hover``."""

    f_hover: float

    def __post_init__(self):
        if self.f_hover <= 0:
            raise ValueError("f_hover must be positive")

    @classmethod
    def for_mass(cls, mass_param: float, gravity: float = GRAVITY) -> "HoverCommand":
        return cls(mass_param * gravity)

    @property
    def vector(self) -> np.ndarray:
        # Inputs are deviations from hover, so the nominal command is zero.
        return np.zeros(N_INPUT)


@dataclass(frozen=True)
class CommandLimits:
    max_tilt: float = 0.35
    thrust_min: float = 0.0
    thrust_max: float = 25.0


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def build_hover_model(mass_param: float, gravity: float = GRAVITY, attitude_tau: float = 0.15,
                      dt: float = 0.01) -> LinearModel:
    """Zero-order-hold discretization of the hover-linearized translational model."""
    for name, value in (("mass_param", mass_param), ("gravity", gravity),
                        ("attitude_tau", attitude_tau), ("dt", dt)):
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")

    Ac = np.zeros((N_STATE, N_STATE))
    Bc = np.zeros((N_STATE, N_INPUT))
    Ac[0, 3] = Ac[1, 4] = Ac[2, 5] = 1.0
    Ac[3, 7] = gravity      # v_x' = g * pitch
    Ac[4, 6] = -gravity     # v_y' = -g * roll
    Ac[6, 6] = Ac[7, 7] = -1.0 / attitude_tau
    Bc[6, 0] = Bc[7, 1] = 1.0 / attitude_tau
    Bc[5, 2] = 1.0 / mass_param

    M = np.zeros((N_STATE + N_INPUT, N_STATE + N_INPUT))
    M[:N_STATE, :N_STATE] = Ac
    M[:N_STATE, N_STATE:] = Bc
    Md = expm(M * dt)
    return LinearModel(Md[:N_STATE, :N_STATE], Md[:N_STATE, N_STATE:], dt, mass_param)


def dare_residual(A, B, Q, R, P) -> float:
    BtPA = B.T @ P @ A
    res = A.T @ P @ A - P - BtPA.T @ np.linalg.solve(R + B.T @ P @ B, BtPA) + Q
    return float(np.linalg.norm(res, "fro"))


def solve_dare_matrices(A, B, Q, R, tol: float = 1e-12, max_iter: int = 200,
                        refine_steps: int = 2) -> GainSolution:
    """Structure-preserving doubling for ``A'PA - P - A'PB(R+B'PB)^-1 B'PA + Q = 0``.

    Convergence is declared once the relative Frobenius change of the iterate
    drops below ``tol``. Raises :class:`DareConvergenceError` otherwise.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n = A.shape[0]
    eye = np.eye(n)

    Ak = A.copy()
    Gk = B @ np.linalg.solve(R, B.T)
    Hk = Q.copy()
    for it in range(1, max_iter + 1):
        W = eye + Gk @ Hk
        try:
            WinvA = np.linalg.solve(W, Ak)
            WinvG = np.linalg.solve(W, Gk)
        except np.linalg.LinAlgError as exc:
            raise DareConvergenceError(f"singular doubling step at iteration {it}") from exc
        H_next = Hk + Ak.T @ Hk @ WinvA
        Gk = Gk + Ak @ WinvG @ Ak.T
        Ak = Ak @ WinvA
        H_next = 0.5 * (H_next + H_next.T)
        Gk = 0.5 * (Gk + Gk.T)
        if not np.all(np.isfinite(H_next)):
            raise DareConvergenceError(f"doubling iterate diverged at iteration {it}")
        change = np.linalg.norm(H_next - Hk, "fro")
        Hk = H_next
        if change <= tol * max(1.0, np.linalg.norm(Hk, "fro")):
            break
    else:
        raise DareConvergenceError(f"no convergence within {max_iter} iterations")

    P = Hk
    K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    residual = dare_residual(A, B, Q, R, P)
    # Newton (Hewer) polishing: each step solves the closed-loop Lyapunov
    # equation; kept only while it lowers the residual.
    for _ in range(refine_steps):
        Acl = A + B @ K
        try:
            P_new = solve_discrete_lyapunov(Acl.T, Q + K.T @ R @ K)
        except (np.linalg.LinAlgError, ValueError):
            break
        P_new = 0.5 * (P_new + P_new.T)
        K_new = -np.linalg.solve(R + B.T @ P_new @ B, B.T @ P_new @ A)
        res_new = dare_residual(A, B, Q, R, P_new)
        if not res_new < residual:
            break
        P, K, residual = P_new, K_new, res_new
    if spectral_radius(A + B @ K) >= 1.0 or np.linalg.eigvalsh(P).min() < -1e-9 * max(1.0, np.abs(P).max()):
        raise DareConvergenceError("no stabilizing solution (is (A, B) stabilizable and (A, Q) detectable?)")
    return GainSolution(P=P, K=K, residual=residual, iterations=it)


def solve_dare(model: LinearModel, weights: CostWeights, tol: float = 1e-12,
               max_iter: int = 200) -> GainSolution:
    return solve_dare_matrices(model.A, model.B, weights.Q, weights.R, tol=tol, max_iter=max_iter)


def reference_vector(position_ref, velocity_ref) -> np.ndarray:
    """Full reference state: reference attitude is level."""
    return np.concatenate((np.asarray(position_ref, dtype=float),
                           np.asarray(velocity_ref, dtype=float), np.zeros(2)))


def compute_control(state: VehicleState, ref, gain: GainSolution, hover: HoverCommand,
                    adapt: AdaptiveState = AdaptiveState(),
                    limits: CommandLimits = CommandLimits()) -> ControlCommand:
    x_ref = reference_vector(ref.position_ref, ref.velocity_ref)
    u = hover.vector + gain.K @ (state.as_vector() - x_ref) + adapt.as_vector()

    roll, pitch, thrust_delta = (float(v) for v in u)
    sat_roll = min(max(roll, -limits.max_tilt), limits.max_tilt)
    sat_pitch = min(max(pitch, -limits.max_tilt), limits.max_tilt)
    sat_thrust = min(max(thrust_delta, limits.thrust_min - hover.f_hover),
                     limits.thrust_max - hover.f_hover)
    if (sat_roll, sat_pitch, sat_thrust) != (roll, pitch, thrust_delta):
        logger.debug("command saturated: %s -> %s", (roll, pitch, thrust_delta),
                     (sat_roll, sat_pitch, sat_thrust))
    return ControlCommand(sat_roll, sat_pitch, sat_thrust, hover.f_hover)


def retune(weights: CostWeights, which: str, factor: float) -> CostWeights:
    """Scale the position block of Q (``"Q_position"``) or all of R (``"R_all"``)."""
    if not factor > 0:
        raise ValueError(f"factor must be positive, got {factor}")
    q, r = weights.q.copy(), weights.r.copy()
    if which == "Q_position":
        q[POSITION] = np.clip(q[POSITION] * factor, WEIGHT_MIN, WEIGHT_MAX)
    elif which == "R_all":
        r = np.clip(r * factor, WEIGHT_MIN, WEIGHT_MAX)
    else:
        raise ValueError(f"unknown weight block {which!r}")
    return replace(weights, q=q, r=r)


@dataclass(frozen=True)
class GainBundle:
    """Everything a control tick reads, swapped as one object."""

    weights: CostWeights
    gain: GainSolution
    hover: HoverCommand


class LiveGains:
    """Holder whose bundle is replaced atomically between control ticks."""

    def __init__(self, bundle: GainBundle):
        self._lock = threading.Lock()
        self._bundle = bundle

    @property
    def current(self) -> GainBundle:
        with self._lock:
            return self._bundle

    def swap(self, bundle: GainBundle) -> None:
        with self._lock:
            self._bundle = bundle


class LQRPositionController(BaseEstimator):
    """Estimator-style wrapper around model construction and gain synthesis.

    ``fit`` builds the hover model and solves the DARE; ``predict`` maps
    stacked state deviations ``x - x_ref`` (n, 8) to input deviations (n, 3)
    before saturation.

    Parameters
    ----------
    mass_param : float
        Mass the controller believes the vehicle has, in kg.
    q_position, q_velocity, q_attitude : float
        Diagonal state weights per block.
    r_attitude, r_thrust : float
        Diagonal input weights.
    """

    def __init__(self, mass_param=1.0, gravity=GRAVITY, attitude_tau=0.15, dt=0.01,
                 q_position=10.0, q_velocity=1.0, q_attitude=1.0, r_attitude=5.0, r_thrust=1.0,
                 tol=1e-12, max_iter=200):
        self.mass_param = mass_param
        self.gravity = gravity
        self.attitude_tau = attitude_tau
        self.dt = dt
        self.q_position = q_position
        self.q_velocity = q_velocity
        self.q_attitude = q_attitude
        self.r_attitude = r_attitude
        self.r_thrust = r_thrust
        self.tol = tol
        self.max_iter = max_iter

    def _weights(self) -> CostWeights:
        return CostWeights(
            q=np.array([self.q_position] * 3 + [self.q_velocity] * 3 + [self.q_attitude] * 2),
            r=np.array([self.r_attitude] * 2 + [self.r_thrust]),
        )

    def fit(self, X=None, y=None):
        self.model_ = build_hover_model(self.mass_param, self.gravity, self.attitude_tau, self.dt)
        self.weights_ = self._weights()
        self.gain_ = solve_dare(self.model_, self.weights_, tol=self.tol, max_iter=self.max_iter)
        self.hover_ = HoverCommand.for_mass(self.mass_param, self.gravity)
        return self

    def refit(self, weights: CostWeights):
        """Re-solve with new weights while keeping the model."""
        check_is_fitted(self, "gain_")
        self.weights_ = weights
        self.gain_ = solve_dare(self.model_, weights, tol=self.tol, max_iter=self.max_iter)
        return self

    def predict(self, X):
        check_is_fitted(self, "gain_")
        X = check_array(X)
        if X.shape[1] != N_STATE:
            raise ValueError(f"expected {N_STATE} state columns, got {X.shape[1]}")
        return X @ self.gain_.K.T

    def bundle(self) -> GainBundle:
        check_is_fitted(self, "gain_")
        return GainBundle(self.weights_, self.gain_, self.hover_)
