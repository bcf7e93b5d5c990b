"""Six-joint serial arm: forward kinematics, panel normal, alignment solver.

The arm carries a small panel whose outward normal (``panel_axis`` in the
end-effector frame) should point at the sun. Kinematics follow the standard
Denavit-Hartenberg convention: each link transform is
Rz(theta) Tz(d) Tx(a) Rx(alpha) with theta = q_i + theta_offset_i.

Because the task only constrains a direction (2 degrees of freedom), inverse
kinematics is done as damped descent on the scalar misalignment angle rather
than full pose IK; redundancy resolves itself as minimal change from the
starting state. Joint values are plain numpy arrays of 6 radians.

The default geometry is a stand-in for a small desk arm; nothing downstream
depends on its exact link lengths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

FD_STEP = 1e-6


@dataclass(frozen=True)
class DhRow:
    """One Denavit-Hartenberg link: a (m), alpha (rad), d (m), theta_offset (rad)."""

    a: float
    alpha: float
    d: float
    theta_offset: float

    def __post_init__(self):
        for name in ("a", "alpha", "d", "theta_offset"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"DhRow.{name} must be finite")


@dataclass(frozen=True)
class ArmModel:
    """A 6-joint arm: DH table, joint limits, and the panel normal axis.

    rows: exactly 6 DhRow entries.
    joint_limits: 6 (min_rad, max_rad) pairs with min < max.
    panel_axis: unit vector in the end-effector frame, the panel's outward normal.
    """

    rows: tuple[DhRow, ...]
    joint_limits: tuple[tuple[float, float], ...]
    panel_axis: tuple[float, float, float]

    def __post_init__(self):
        if len(self.rows) != 6:
            raise ValueError(f"expected 6 DH rows, got {len(self.rows)}")
        if len(self.joint_limits) != 6:
            raise ValueError(f"expected 6 joint limit pairs, got {len(self.joint_limits)}")
        for i, (lo, hi) in enumerate(self.joint_limits):
            if not lo < hi:
                raise ValueError(f"joint {i} limits not ordered: ({lo}, {hi})")
        norm = math.sqrt(sum(c * c for c in self.panel_axis))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"panel_axis norm {norm} != 1")

    @classmethod
    def default(cls) -> "ArmModel":
        """The built-in desk-arm geometry used by all defaults."""
        rows = (
            DhRow(0.0, math.pi / 2, 0.10, 0.0),
            DhRow(0.25, 0.0, 0.0, 0.0),
            DhRow(0.05, math.pi / 2, 0.0, 0.0),
            DhRow(0.0, -math.pi / 2, 0.20, 0.0),
            DhRow(0.0, math.pi / 2, 0.0, 0.0),
            DhRow(0.0, 0.0, 0.08, 0.0),
        )
        limits = tuple(
            (-math.pi / 2, math.pi / 2) if i == 1 else (-math.pi, math.pi)
            for i in range(6)
        )
        return cls(rows=rows, joint_limits=limits, panel_axis=(0.0, 0.0, 1.0))

    @classmethod
    def from_dict(cls, d: dict) -> "ArmModel":
        """Build from config form: {"rows": [[a, alpha, d, theta_offset] x6],
        "joint_limits": [[lo, hi] x6], "panel_axis": [x, y, z]}."""
        rows = tuple(DhRow(*map(float, r)) for r in d["rows"])
        limits = tuple((float(lo), float(hi)) for lo, hi in d["joint_limits"])
        axis = tuple(float(c) for c in d["panel_axis"])
        return cls(rows=rows, joint_limits=limits, panel_axis=axis)


@dataclass(frozen=True)
class Pose:
    """Rigid transform: 3x3 rotation (validated orthonormal) plus translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if r.shape != (3, 3) or t.shape != (3,):
            raise ValueError(f"bad shapes: rotation {r.shape}, translation {t.shape}")
        if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-9:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation determinant is not 1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)


def dh_transform(row: DhRow, q: float) -> np.ndarray:
    """Homogeneous 4x4 transform of one link at joint angle q."""
    theta = q + row.theta_offset
    ct, st = math.cos(theta), math.sin(theta)
    ca, sa = math.cos(row.alpha), math.sin(row.alpha)
    return np.array([
        [ct, -st * ca, st * sa, row.a * ct],
        [st, ct * ca, -ct * sa, row.a * st],
        [0.0, sa, ca, row.d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def clamp_joints(m: ArmModel, q: Sequence[float]) -> np.ndarray:
    """Project joint values onto the model's limits, elementwise."""
    q = np.asarray(q, dtype=np.float64)
    lo = np.array([l for l, _ in m.joint_limits])
    hi = np.array([h for _, h in m.joint_limits])
    return np.clip(q, lo, hi)


def forward_kinematics(m: ArmModel, q: Sequence[float]) -> Pose:
    """End-effector pose: the chained DH product over all 6 joints."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (6,):
        raise ValueError(f"expected 6 joint values, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("joint values must be finite")
    t = np.eye(4)
    for row, qi in zip(m.rows, q):
        t = t @ dh_transform(row, float(qi))
    # re-orthonormalize: chained float products drift at the 1e-15 level,
    # and Pose validates at 1e-9
    u, _, vt = np.linalg.svd(t[:3, :3])
    r = u @ vt
    if np.linalg.det(r) < 0:
        r = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return Pose(rotation=r, translation=t[:3, 3].copy())


def panel_normal(m: ArmModel, q: Sequence[float]) -> np.ndarray:
    """The panel's outward normal in the world frame at joint state q."""
    pose = forward_kinematics(m, q)
    n = pose.rotation @ np.asarray(m.panel_axis, dtype=np.float64)
    return n / np.linalg.norm(n)


def alignment_error(n, s) -> float:
    """Angle in radians between two unit vectors, in [0, pi]."""
    d = float(np.dot(np.asarray(n, dtype=np.float64), np.asarray(s, dtype=np.float64)))
    return math.acos(max(-1.0, min(1.0, d)))


def numeric_jacobian(m: ArmModel, q: Sequence[float], s) -> np.ndarray:
    """Central-difference gradient of the misalignment angle w.r.t. each joint."""
    q = np.asarray(q, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    grad = np.zeros(6)
    for i in range(6):
        qp = q.copy()
        qm = q.copy()
        qp[i] += FD_STEP
        qm[i] -= FD_STEP
        ep = alignment_error(panel_normal(m, qp), s)
        em = alignment_error(panel_normal(m, qm), s)
        grad[i] = (ep - em) / (2.0 * FD_STEP)
    return grad


def solve_alignment(m: ArmModel, q0: Sequence[float], s, tol_rad: float = 0.017,
                    max_iters: int = 100, trace: list | None = None
                    ) -> tuple[np.ndarray, float]:
    """Drive the panel normal toward direction ``s`` by damped descent.

    Each iteration takes a Gauss-Newton style step on the scalar misalignment
    e(q): step = g * e / (g.g + lambda^2), backtracked by halving until the
    error decreases; full rejection raises the damping, acceptance lowers it.
    Iterates are clamped to joint limits. Stops at the first iterate with
    error <= tol_rad, otherwise returns the best iterate seen.

    Descent starts from q0 so that a solution near the current state is
    preferred; only if that stalls above tol_rad does the solver retry from a
    fixed set of seeded joint states to escape local minima, returning the
    best result overall.

    Args:
        trace: optional list; accepted (q, error) pairs are appended for
            inspection.

    Returns:
        (joint state, achieved error in radians). Non-convergence shows up
        as achieved error > tol_rad, never as an exception.
    """
    if tol_rad <= 0.0:
        raise ValueError(f"tol_rad must be positive, got {tol_rad}")
    s = np.asarray(s, dtype=np.float64)
    q0 = np.asarray(q0, dtype=np.float64)
    q_start = clamp_joints(m, q0)
    err0 = alignment_error(panel_normal(m, q_start), s)
    if err0 <= tol_rad:
        return q_start, err0

    best_q, best_err = _descend(m, q_start, s, tol_rad, max_iters, trace)
    if best_err > tol_rad:
        lo = np.array([l for l, _ in m.joint_limits])
        hi = np.array([h for _, h in m.joint_limits])
        restarts = np.random.default_rng(0).uniform(lo, hi, size=(8, 6))
        for seed_q in restarts:
            q_r, err_r = _descend(m, clamp_joints(m, seed_q), s, tol_rad,
                                  max_iters, trace)
            if err_r < best_err:
                best_q, best_err = q_r, err_r
            if best_err <= tol_rad:
                break
    return best_q, best_err


def _descend(m: ArmModel, q: np.ndarray, s: np.ndarray, tol_rad: float,
             max_iters: int, trace: list | None) -> tuple[np.ndarray, float]:
    """One damped-descent run from a single start; see solve_alignment."""
    err = alignment_error(panel_normal(m, q), s)
    best_q, best_err = q.copy(), err
    lam = 1e-2
    for _ in range(max_iters):
        grad = numeric_jacobian(m, q, s)
        gg = float(grad @ grad)
        if gg < 1e-16:
            # flat spot (e.g. antipodal start); deterministic nudge off it
            q = clamp_joints(m, q + 1e-3 * np.arange(1.0, 7.0))
            err = alignment_error(panel_normal(m, q), s)
            if err < best_err:
                best_q, best_err = q.copy(), err
            continue
        step = grad * (err / (gg + lam * lam))
        scale = 1.0
        accepted = False
        for _ in range(10):
            q_new = clamp_joints(m, q - scale * step)
            err_new = alignment_error(panel_normal(m, q_new), s)
            if err_new < err:
                accepted = True
                break
            scale *= 0.5
        if accepted:
            q, err = q_new, err_new
            lam = max(lam * 0.5, 1e-4)
            if trace is not None:
                trace.append((q.copy(), err))
            if err < best_err:
                best_q, best_err = q.copy(), err
            if err <= tol_rad:
                return q, err
        else:
            lam *= 10.0
            if lam > 1e8:
                break
    return best_q, best_err
