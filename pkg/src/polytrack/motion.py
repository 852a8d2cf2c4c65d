"""Kalman filtering over CV, CTRA and kinematic-bicycle motion models.

State layouts (all 7-dimensional):

    CV       [x, y, z, vx, vy, vz, yaw]
    CTRA     [x, y, z, v, a, yaw, yaw_rate]
    BICYCLE  [x, y, z, v, a, yaw, steer]

Every model observes ``[x, y, z, yaw]``.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import Box3D, MotionKind, TrackerConfig, normalize_angle

STATE_DIM = 7
MEAS_DIM = 4
MEAS_YAW = 3
# below this |yaw_rate| CTRA uses its first-order expansion in the turn rate
TURN_RATE_EPS = 1e-3


class FilterError(ArithmeticError):
    """Raised when a filter diverges or an innovation covariance is singular."""


@dataclass(frozen=True)
class FilterState:
    x: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    H: np.ndarray
    dt: float = 0.5
    # measurement component holding an angle; its residual is wrapped to (-pi, pi]
    angle_index: Optional[int] = MEAS_YAW


@dataclass(frozen=True)
class MotionModel:
    kind: MotionKind
    wheelbase_ratio: float = 0.6
    rear_tire_ratio: float = 0.3
    length: float = 4.0

    @property
    def yaw_index(self) -> int:
        return 6 if self.kind is MotionKind.CV else 5

    def with_length(self, length: float) -> "MotionModel":
        return self if length == self.length else replace(self, length=length)

    def transition(self, x: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray]:
        """Propagate ``x`` by ``dt`` seconds; returns the new state and its Jacobian."""
        if self.kind is MotionKind.CV:
            return _cv_transition(x, dt)
        if self.kind is MotionKind.CTRA:
            return _ctra_transition(x, dt)
        return _bicycle_transition(
            x, dt, self.wheelbase_ratio * self.length, self.rear_tire_ratio * self.length
        )

    def measurement_matrix(self) -> np.ndarray:
        H = np.zeros((MEAS_DIM, STATE_DIM))
        H[0, 0] = H[1, 1] = H[2, 2] = 1.0
        H[3, self.yaw_index] = 1.0
        return H

    def planar_velocity(self, x: np.ndarray) -> Tuple[float, float]:
        if self.kind is MotionKind.CV:
            return float(x[3]), float(x[4])
        v, yaw = float(x[3]), float(x[5])
        return v * math.cos(yaw), v * math.sin(yaw)

    def nominal_noise(self, cfg: TrackerConfig) -> Tuple[np.ndarray, np.ndarray]:
        """Initial (Q, R). Height and the higher-order channels vary slowly, so they get less process noise."""
        q = np.full(STATE_DIM, cfg.process_noise)
        q[2] = cfg.process_noise_rates
        if self.kind is MotionKind.CV:
            q[5:7] = cfg.process_noise_rates
        else:
            q[4:7] = cfg.process_noise_rates
        return np.diag(q), np.eye(MEAS_DIM) * cfg.measurement_noise

    def initial_state(self, box: Box3D, cfg: TrackerConfig, dt: Optional[float] = None) -> FilterState:
        vx, vy = box.velocity
        x = np.zeros(STATE_DIM)
        x[0:3] = box.center
        p = np.empty(STATE_DIM)
        p[0:3] = cfg.init_pos_var
        if self.kind is MotionKind.CV:
            x[3], x[4], x[6] = vx, vy, box.yaw
            p[3:6] = cfg.init_speed_var
            p[6] = cfg.init_yaw_var
        else:
            x[3] = math.hypot(vx, vy)
            x[5] = box.yaw
            p[3] = cfg.init_speed_var
            p[4] = cfg.init_accel_var
            p[5] = cfg.init_yaw_var
            p[6] = cfg.init_turn_var
        Q, R = self.nominal_noise(cfg)
        return FilterState(
            x=x,
            P=np.diag(p),
            Q=Q,
            R=R,
            H=self.measurement_matrix(),
            dt=cfg.default_dt if dt is None else dt,
        )

    def to_box(self, x: np.ndarray, size: Sequence[float]) -> Box3D:
        return Box3D(
            center=(x[0], x[1], x[2]),
            size=tuple(size),
            yaw=float(x[self.yaw_index]),
            velocity=self.planar_velocity(x),
        )


def measurement_from_box(box: Box3D) -> np.ndarray:
    return np.array([box.center[0], box.center[1], box.center[2], box.yaw])


def _cv_transition(x, dt):
    F = np.eye(STATE_DIM)
    F[0, 3] = F[1, 4] = F[2, 5] = dt
    return F @ x, F


def _ctra_transition(x, dt):
    px, py, pz, v, a, yaw, w = (float(c) for c in x)
    F = np.eye(STATE_DIM)
    yaw1 = yaw + w * dt
    v1 = v + a * dt
    if abs(w) > TURN_RATE_EPS:
        s0, c0 = math.sin(yaw), math.cos(yaw)
        s1, c1 = math.sin(yaw1), math.cos(yaw1)
        w2 = w * w
        nx = v1 * w * s1 + a * c1 - v * w * s0 - a * c0
        ny = -v1 * w * c1 + a * s1 + v * w * c0 - a * s0
        dx, dy = nx / w2, ny / w2
        dnx_dw = v1 * s1 + v1 * w * dt * c1 - a * dt * s1 - v * s0
        dny_dw = -v1 * c1 + v1 * w * dt * s1 + a * dt * c1 + v * c0
        F[0, 3] = (s1 - s0) / w
        F[0, 4] = (w * dt * s1 + c1 - c0) / w2
        F[0, 5] = (v1 * w * c1 - a * s1 - v * w * c0 + a * s0) / w2
        F[0, 6] = dnx_dw / w2 - 2.0 * nx / (w2 * w)
        F[1, 3] = (c0 - c1) / w
        F[1, 4] = (-w * dt * c1 + s1 - s0) / w2
        F[1, 5] = nx / w2
        F[1, 6] = dny_dw / w2 - 2.0 * ny / (w2 * w)
    else:
        # first order in the turn rate
        s0, c0 = math.sin(yaw), math.cos(yaw)
        dist = v * dt + 0.5 * a * dt * dt
        bend = v * dt * dt / 2.0 + a * dt**3 / 3.0
        dx = dist * c0 - bend * w * s0
        dy = dist * s0 + bend * w * c0
        F[0, 3] = dt * c0 - 0.5 * dt * dt * w * s0
        F[0, 4] = 0.5 * dt * dt * c0 - dt**3 / 3.0 * w * s0
        F[0, 5] = -dist * s0 - bend * w * c0
        F[0, 6] = -bend * s0
        F[1, 3] = dt * s0 + 0.5 * dt * dt * w * c0
        F[1, 4] = 0.5 * dt * dt * s0 + dt**3 / 3.0 * w * c0
        F[1, 5] = dist * c0 - bend * w * s0
        F[1, 6] = bend * c0
    F[3, 4] = dt
    F[5, 6] = dt
    out = np.array([px + dx, py + dy, pz, v1, a, yaw1, w])
    return out, F


def _bicycle_transition(x, dt, wheelbase, rear_offset):
    px, py, pz, v, a, yaw, steer = (float(c) for c in x)
    k = rear_offset / wheelbase
    tan_d = math.tan(steer)
    beta = math.atan(k * tan_d)
    dbeta = k / (math.cos(steer) ** 2 * (1.0 + (k * tan_d) ** 2))
    dist = v * dt + 0.5 * a * dt * dt
    heading = yaw + beta
    ch, sh = math.cos(heading), math.sin(heading)
    sb, cb = math.sin(beta), math.cos(beta)
    F = np.eye(STATE_DIM)
    F[0, 3], F[0, 4], F[0, 5], F[0, 6] = dt * ch, 0.5 * dt * dt * ch, -dist * sh, -dist * sh * dbeta
    F[1, 3], F[1, 4], F[1, 5], F[1, 6] = dt * sh, 0.5 * dt * dt * sh, dist * ch, dist * ch * dbeta
    F[3, 4] = dt
    F[5, 3] = dt * sb / rear_offset
    F[5, 4] = 0.5 * dt * dt * sb / rear_offset
    F[5, 6] = dist * cb * dbeta / rear_offset
    out = np.array(
        [px + dist * ch, py + dist * sh, pz, v + a * dt, a, yaw + dist * sb / rear_offset, steer]
    )
    return out, F


def predict(fs: FilterState, model: MotionModel) -> FilterState:
    x, F = model.transition(fs.x, fs.dt)
    if not np.all(np.isfinite(x)):
        raise FilterError("diverged filter: non-finite predicted state")
    x[model.yaw_index] = normalize_angle(x[model.yaw_index])
    P = F @ fs.P @ F.T + fs.Q
    P = 0.5 * (P + P.T)
    return replace(fs, x=x, P=P)


def innovation(fs: FilterState, z: np.ndarray) -> np.ndarray:
    r = np.asarray(z, dtype=float) - fs.H @ fs.x
    if fs.angle_index is not None:
        r[fs.angle_index] = normalize_angle(r[fs.angle_index])
    return r


def update(fs: FilterState, z: np.ndarray, w: float = 1.0, weighted: bool = True) -> FilterState:
    """Confidence-weighted update.

    The gain is the ordinary Kalman gain; the detection confidence ``w`` scales
    how much of the correction is applied, and the covariance follows the
    matching Joseph form so it stays symmetric PSD for any ``w`` in [0, 1].
    """
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"update weight must lie in [0, 1], got {w}")
    if not weighted:
        w = 1.0
    if w == 0.0:
        return fs
    H, P, R = fs.H, fs.P, fs.R
    r = innovation(fs, z)
    S = H @ P @ H.T + R
    eig = np.linalg.eigvalsh(0.5 * (S + S.T))
    cond = eig[-1] / eig[0] if eig[0] > 0.0 else math.inf
    if not np.isfinite(cond) or cond > 1e12:
        raise FilterError(f"singular innovation covariance (condition number {cond:.3e})")
    K = np.linalg.solve(S, H @ P).T
    x = fs.x + w * (K @ r)
    A = np.eye(len(x)) - w * (K @ H)
    P_new = A @ P @ A.T + (w * w) * (K @ R @ K.T)
    P_new = 0.5 * (P_new + P_new.T)
    return replace(fs, x=x, P=P_new)


def adapt_R(R: np.ndarray, residual: np.ndarray) -> np.ndarray:
    """Shrink R after small residuals, inflate it after large ones."""
    norm = float(np.linalg.norm(residual))
    if norm < 1.0:
        return 0.9 * R
    if norm > 5.0:
        return 1.1 * R
    return R


def adapt_Q(Q: np.ndarray, velocity: Sequence[float]) -> np.ndarray:
    """Shrink Q for slow targets, inflate it for fast ones.

    ``velocity`` is the planar velocity (see ``MotionModel.planar_velocity``).
    """
    speed = math.hypot(velocity[0], velocity[1])
    if speed < 1.0:
        return 0.9 * Q
    if speed > 10.0:
        return 1.1 * Q
    return Q


def bound_scale(M: np.ndarray, reference: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Rescale ``M`` so that trace(M) / trace(reference) lies in [lo, hi].

    adapt_R and adapt_Q only ever multiply by a scalar, so without this the
    noise shrinks geometrically on a well-tracked object and the filter ends
    up copying raw measurements.
    """
    ref = float(np.trace(reference))
    if ref <= 0.0:
        return M
    c = float(np.trace(M)) / ref
    if c < lo:
        return M * (lo / c) if c > 0.0 else lo * reference
    if c > hi:
        return M * (hi / c)
    return M


def median_smooth(history: Sequence[Sequence[float]], window: int = 5) -> Tuple[float, ...]:
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    if not history:
        raise ValueError("history must be non-empty")
    recent = history[-window:]
    return tuple(float(statistics.median(col)) for col in zip(*recent))
