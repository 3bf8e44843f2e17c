"""Time-domain simulators: the Brockett-Heisenberg integrator and the Bloch system.

Both integrators are classical fixed-step RK4. Controls are any callables of
time that accept numpy arrays (``ControlSignal`` qualifies), so piecewise or
hand-built inputs work as well as Fourier signals.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import PreconditionError

DEFAULT_STEPS = 10_000

Control = Callable[[np.ndarray], np.ndarray]

OMEGA_X = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
OMEGA_Y = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
OMEGA_Z = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), 3): columns x, y, z

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_z(self) -> float:
        return float(self.states[-1, 2])

    def sample(self, t: float) -> np.ndarray:
        """State at the grid node nearest to ``t``."""
        k = int(np.argmin(np.abs(self.times - t)))
        return self.states[k]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,x,y,z\n")
        for t, (x, y, z) in zip(self.times, self.states):
            buf.write(f"{t:.10g},{x:.17g},{y:.17g},{z:.17g}\n")
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class RotationTrajectory:
    times: np.ndarray
    matrices: np.ndarray  # shape (len(times), 3, 3)

    @property
    def final(self) -> np.ndarray:
        return self.matrices[-1]


def _check_steps(steps: int) -> None:
    if steps < 100:
        raise PreconditionError(f"steps must be >= 100, got {steps}")


def simulate_bh(
    u: Control,
    v: Control,
    steps: int = DEFAULT_STEPS,
    x0: Sequence[float] = (0.0, 0.0, 0.0),
    t_span: tuple[float, float] = (0.0, 1.0),
) -> Trajectory:
    """Integrate x' = u, y' = v, z' = v x - u y with fixed-step RK4.

    The controls do not depend on the state, so every RK4 stage value can be
    written down in closed form from the node states. That lets the whole
    integration run as a handful of cumulative sums instead of a Python loop;
    the result is the RK4 solution, not an approximation of it.
    """
    _check_steps(steps)
    t0, t1 = t_span
    h = (t1 - t0) / steps
    times = t0 + h * np.arange(steps + 1)
    times[-1] = t1
    u0 = np.asarray(u(times[:-1]), dtype=float)
    v0 = np.asarray(v(times[:-1]), dtype=float)
    mid = times[:-1] + 0.5 * h
    um = np.asarray(u(mid), dtype=float)
    vm = np.asarray(v(mid), dtype=float)
    u1 = np.asarray(u(times[1:]), dtype=float)
    v1 = np.asarray(v(times[1:]), dtype=float)

    x_init, y_init, z_init = (float(c) for c in x0)
    dx = h / 6.0 * (u0 + 4.0 * um + u1)
    dy = h / 6.0 * (v0 + 4.0 * vm + v1)
    x = np.concatenate(([x_init], x_init + np.cumsum(dx)))
    y = np.concatenate(([y_init], y_init + np.cumsum(dy)))
    xk, yk = x[:-1], y[:-1]

    k1 = v0 * xk - u0 * yk
    k2 = vm * (xk + 0.5 * h * u0) - um * (yk + 0.5 * h * v0)
    k3 = vm * (xk + 0.5 * h * um) - um * (yk + 0.5 * h * vm)
    k4 = v1 * (xk + h * um) - u1 * (yk + h * vm)
    dz = h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    z = np.concatenate(([z_init], z_init + np.cumsum(dz)))
    return Trajectory(times=times, states=np.column_stack([x, y, z]))


def rk4(f: Callable, y0: np.ndarray, t0: float, t1: float, steps: int, project=None):
    """Plain fixed-step RK4 for ``y' = f(t, y)``; optional ``project`` after each step."""
    h = (t1 - t0) / steps
    y = np.array(y0, dtype=float)
    out = np.empty((steps + 1,) + y.shape)
    out[0] = y
    t = t0
    for k in range(steps):
        s1 = f(t, y)
        s2 = f(t + 0.5 * h, y + 0.5 * h * s1)
        s3 = f(t + 0.5 * h, y + 0.5 * h * s2)
        s4 = f(t + h, y + h * s3)
        y = y + h / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
        if project is not None:
            y = project(y)
        t = t0 + (k + 1) * h
        out[k + 1] = y
    return t0 + h * np.arange(steps + 1), out


def bh_rhs(u: Control, v: Control):
    """Right-hand side of the B-H system for use with the generic ``rk4``."""

    def f(t, s):
        ut, vt = float(u(t)), float(v(t))
        return np.array([ut, vt, vt * s[0] - ut * s[1]])

    return f


def enclosed_area(traj: Trajectory, close_tol: float = 1e-6) -> float:
    """Signed area enclosed by the planar (x, y) curve of a closed trajectory."""
    x, y = traj.states[:, 0], traj.states[:, 1]
    gap = math.hypot(x[-1] - x[0], y[-1] - y[0])
    if gap > close_tol:
        raise PreconditionError(f"curve is not closed: endpoint gap {gap:.3e} > {close_tol:g}")
    # trapezoid rule on (1/2) * (x dy - y dx), written as the shoelace sum
    return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))


def _project_so3(x: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(x)
    return u @ vt


def simulate_bloch(
    u: Control, v: Control, t_final: float = 1.0, steps: int = DEFAULT_STEPS
) -> RotationTrajectory:
    """Integrate X' = (u Omega_y + v Omega_x) X from X(0) = I on SO(3)."""
    _check_steps(steps)

    def f(t, x):
        return (float(u(t)) * OMEGA_Y + float(v(t)) * OMEGA_X) @ x

    times, mats = rk4(f, np.eye(3), 0.0, t_final, steps, project=_project_so3)
    return RotationTrajectory(times=times, matrices=mats)


def circular_inputs(eps: float):
    """u = eps cos(2 pi t), v = eps sin(2 pi t)."""
    return (
        lambda t: eps * np.cos(2.0 * np.pi * np.asarray(t)),
        lambda t: eps * np.sin(2.0 * np.pi * np.asarray(t)),
    )


@dataclass(frozen=True)
class BlochComparison:
    epsilon: float
    theta: float
    z1: float
    gap: float
    off_block: float
    flagged: bool  # off-block entries too large for the angle to mean anything


def bloch_period(eps: float) -> float:
    return 1.0 / math.sqrt(1.0 + (eps / (2.0 * math.pi)) ** 2)


def bloch_angle_vs_area(eps: float, steps: int = DEFAULT_STEPS) -> BlochComparison:
    """Compare the Bloch z-rotation angle with half the B-H output for circular inputs."""
    if not 0.0 < eps <= 1.0:
        raise PreconditionError(f"epsilon must lie in (0, 1], got {eps}")
    u, v = circular_inputs(eps)
    xt = simulate_bloch(u, v, bloch_period(eps), steps).final
    off = float(max(np.abs(xt[2, :2]).max(), np.abs(xt[:2, 2]).max(), abs(xt[2, 2] - 1.0)))
    theta = math.atan2(xt[0, 1], xt[0, 0])
    z1 = eps * eps / (2.0 * math.pi)
    return BlochComparison(
        epsilon=eps, theta=theta, z1=z1, gap=abs(theta + 0.5 * z1), off_block=off, flagged=off > 1e-3
    )
