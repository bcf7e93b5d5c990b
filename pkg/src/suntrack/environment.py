"""Episodic solar-energy world for the tracking agent.

Advances sky state over one daylight window, turns discrete joint
adjustments into arm motion, and pays out collected energy as reward.
Also provides the static-panel and perfect-tracking baselines the learned
policy is measured against, plus a 1-DoF toy mode with an enumerable
optimal policy for fast controller checks.

All step functions are pure: randomness is re-derived from (seed, step
index), so stepping the same state twice gives the same result and a whole
episode is reproducible from its seed.
"""

from __future__ import annotations

import datetime
import hashlib
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .ephemeris import (GeoLocation, SolarAngles, daylight_window,
                        solar_direction, sun_unit_vector)
from .kinematics import ArmModel, alignment_error, clamp_joints, panel_normal
from .kinematics import solve_alignment
from .neural import Mlp
from .tracker import Blob, CloudEllipse, SkyScene, render_frame, track_step

N_ACTIONS = 13

# Sky camera: azimuthal equidistant projection of the upper hemisphere onto
# a 96x96 image. Zenith maps to the center, the horizon to a 45 px circle.
SKY_H = 96
SKY_W = 96
SKY_CENTER = (47.5, 47.5)
SKY_HORIZON_PX = 45.0
SKY_SUN_RADIUS_PX = 4.0
SKY_NOISE_SIGMA = 0.02

WH_PER_STEP_TOL = 1e-9


@dataclass(frozen=True)
class CloudProcess:
    """Two-state (clear/cloudy) semi-Markov cloud model.

    rate_per_hour: expected cloud arrivals per clear hour (0 disables clouds).
    mean_duration_min: mean cloudy holding time, minutes.
    attenuation: irradiance transmission factor while cloudy, in [0, 1].
    Holding times in both states are exponential.
    """

    rate_per_hour: float = 0.0
    mean_duration_min: float = 0.0
    attenuation: float = 1.0

    def __post_init__(self):
        if self.rate_per_hour < 0.0:
            raise ValueError(f"rate_per_hour must be >= 0, got {self.rate_per_hour}")
        if self.mean_duration_min < 0.0:
            raise ValueError(
                f"mean_duration_min must be >= 0, got {self.mean_duration_min}")
        if self.rate_per_hour > 0.0 and self.mean_duration_min <= 0.0:
            raise ValueError("mean_duration_min must be > 0 when rate_per_hour > 0")
        if not 0.0 <= self.attenuation <= 1.0:
            raise ValueError(
                f"attenuation must be in [0, 1], got {self.attenuation}")

    @property
    def active(self) -> bool:
        return self.rate_per_hour > 0.0 and self.mean_duration_min > 0.0

    def duty_cycle(self) -> float:
        """Long-run fraction of time spent cloudy."""
        if not self.active:
            return 0.0
        mean_clear_min = 60.0 / self.rate_per_hour
        return self.mean_duration_min / (mean_clear_min + self.mean_duration_min)

    def expected_factor(self) -> float:
        """Long-run mean transmission factor of the process."""
        d = self.duty_cycle()
        return 1.0 - d * (1.0 - self.attenuation)


@dataclass(frozen=True)
class ScenarioConfig:
    """One solar-collection scenario: place, day, panel, sky, and arm."""

    location: GeoLocation
    date: datetime.date
    step_minutes: float = 5.0
    irradiance_peak: float = 1000.0
    panel_area: float = 0.01
    cloud_process: CloudProcess = field(default_factory=CloudProcess)
    use_tracker_observations: bool = False
    arm: ArmModel = field(default_factory=ArmModel.default)
    home_joints: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.step_minutes <= 0.0:
            raise ValueError(f"step_minutes must be > 0, got {self.step_minutes}")
        if self.irradiance_peak <= 0.0:
            raise ValueError(
                f"irradiance_peak must be > 0, got {self.irradiance_peak}")
        if self.panel_area <= 0.0:
            raise ValueError(f"panel_area must be > 0, got {self.panel_area}")
        if len(self.home_joints) != 6:
            raise ValueError(f"home_joints needs 6 entries, got {len(self.home_joints)}")
        for i, ((lo, hi), q) in enumerate(zip(self.arm.joint_limits, self.home_joints)):
            if not lo <= q <= hi:
                raise ValueError(f"home_joints[{i}]={q} outside limits ({lo}, {hi})")


@dataclass(frozen=True)
class AgentState:
    """Observation vector pieces: joints, sun estimate, error, last action.

    joint_fracs: joint angles mapped to [-1, 1] over their limit ranges.
    sun_direction: unit East-North-Up estimate of the sun direction.
    alignment_error_rad: estimated angle between panel normal and sun.
    prev_action: last action index taken (one-hot encoded in vector()).
    """

    joint_fracs: tuple[float, ...]
    sun_direction: tuple[float, float, float]
    alignment_error_rad: float
    prev_action: int

    def __post_init__(self):
        if len(self.joint_fracs) != 6:
            raise ValueError(f"joint_fracs needs 6 entries, got {len(self.joint_fracs)}")
        for i, f in enumerate(self.joint_fracs):
            if not -1.0 <= f <= 1.0:
                raise ValueError(f"joint_fracs[{i}]={f} outside [-1, 1]")
        norm = math.sqrt(sum(c * c for c in self.sun_direction))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"sun_direction norm {norm} != 1")
        if not 0 <= self.prev_action < N_ACTIONS:
            raise ValueError(f"prev_action {self.prev_action} outside [0, {N_ACTIONS})")
        if not math.isfinite(self.alignment_error_rad):
            raise ValueError("alignment_error_rad must be finite")

    def vector(self) -> np.ndarray:
        """Flatten to the 23-dim network input."""
        v = np.zeros(6 + 3 + 1 + N_ACTIONS)
        v[0:6] = self.joint_fracs
        v[6:9] = self.sun_direction
        v[9] = self.alignment_error_rad
        v[10 + self.prev_action] = 1.0
        return v


@dataclass(frozen=True)
class StepInfo:
    """Diagnostics accompanying a reward."""

    alignment_error_rad: float
    irradiance_w_m2: float
    occluded: bool


@dataclass(frozen=True)
class StepResult:
    """What one environment step hands back to the agent."""

    observation: AgentState
    reward: float
    done: bool
    info: StepInfo


@dataclass(frozen=True)
class EnvState:
    """Full simulation state between steps; advancing it is pure."""

    step_index: int
    joints: tuple[float, ...]
    sun: SolarAngles
    attenuation: float
    energy_wh: float
    seed: int
    cloudy: bool
    next_toggle_min: float
    prev_action: int
    track_point: tuple[float, float] | None
    done: bool

    def __post_init__(self):
        if not 0.0 <= self.attenuation <= 1.0:
            raise ValueError(f"attenuation {self.attenuation} outside [0, 1]")
        if self.energy_wh < 0.0:
            raise ValueError(f"energy_wh {self.energy_wh} negative")


def action_joint_delta(action: int, delta_rad: float) -> np.ndarray:
    """Joint-space increment for an action index.

    Index 0 is the no-op; index 2j+1 moves joint j by +delta_rad and index
    2j+2 by -delta_rad, j = 0..5.
    """
    if not 0 <= action < N_ACTIONS:
        raise ValueError(f"action {action} outside [0, {N_ACTIONS})")
    dq = np.zeros(6)
    if action > 0:
        joint, sign = divmod(action - 1, 2)
        dq[joint] = delta_rad if sign == 0 else -delta_rad
    return dq


def irradiance(sun, normal, peak: float, attenuation: float,
               sun_elevation_deg: float) -> float:
    """Effective irradiance (W/m²) on a panel: cosine-of-incidence model."""
    s = np.asarray(sun, dtype=np.float64)
    n = np.asarray(normal, dtype=np.float64)
    for name, v in (("sun", s), ("normal", n)):
        if abs(float(np.linalg.norm(v)) - 1.0) > 1e-6:
            raise ValueError(f"{name} vector is not unit length")
    if not 0.0 <= attenuation <= 1.0:
        raise ValueError(f"attenuation {attenuation} outside [0, 1]")
    if peak <= 0.0:
        raise ValueError(f"peak must be > 0, got {peak}")
    if sun_elevation_deg <= 0.0:
        return 0.0
    return peak * attenuation * max(0.0, float(np.dot(s, n)))


def _fanout_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _step_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(_fanout_seed(seed, f"env-step:{index}"))


@lru_cache(maxsize=64)
def _cached_window(day_ordinal: int, lat: float, lon: float):
    loc = GeoLocation(latitude_deg=lat, longitude_deg=lon)
    return daylight_window(datetime.date.fromordinal(day_ordinal), loc)


def episode_layout(cfg: ScenarioConfig) -> tuple[datetime.datetime, int]:
    """Sunrise time and the number of whole steps before sunset."""
    sunrise, sunset = _cached_window(cfg.date.toordinal(),
                                     cfg.location.latitude_deg,
                                     cfg.location.longitude_deg)
    total_min = (sunset - sunrise).total_seconds() / 60.0
    n_steps = int(total_min // cfg.step_minutes)
    if n_steps < 1:
        raise ValueError(
            f"step_minutes {cfg.step_minutes} longer than the daylight window")
    return sunrise, n_steps


def _advance_clouds(cloudy: bool, next_toggle_min: float, t_new_min: float,
                    proc: CloudProcess, rng: np.random.Generator
                    ) -> tuple[bool, float]:
    if not proc.active:
        return False, math.inf
    mean_clear_min = 60.0 / proc.rate_per_hour
    while next_toggle_min <= t_new_min:
        cloudy = not cloudy
        hold = rng.exponential(proc.mean_duration_min if cloudy else mean_clear_min)
        next_toggle_min += hold
    return cloudy, next_toggle_min


def sky_project(sun: SolarAngles) -> tuple[float, float]:
    """Sun pixel (row, col) under the azimuthal equidistant sky camera."""
    rho = (90.0 - sun.elevation_deg) / 2.0
    az = math.radians(sun.azimuth_deg)
    return (SKY_CENTER[0] - rho * math.cos(az),
            SKY_CENTER[1] + rho * math.sin(az))


def sky_unproject(point) -> SolarAngles:
    """Direction whose sky-camera image is the given (row, col) pixel."""
    drow = SKY_CENTER[0] - float(point[0])
    dcol = float(point[1]) - SKY_CENTER[1]
    rho = math.hypot(drow, dcol)
    el = max(-90.0, min(90.0, 90.0 - 2.0 * rho))
    az = math.degrees(math.atan2(dcol, drow)) % 360.0
    if az >= 360.0:
        az = 0.0
    return SolarAngles(azimuth_deg=az, elevation_deg=el)


def _sky_frame(sun: SolarAngles, attenuation: float, cloudy: bool,
               rng: np.random.Generator):
    """Render the camera's current sky view; returns the tracker Frame."""
    row, col = sky_project(sun)
    row = float(np.clip(row, 0.0, SKY_H - 1.0))
    col = float(np.clip(col, 0.0, SKY_W - 1.0))
    clouds = ()
    if cloudy:
        clouds = (CloudEllipse(
            row=row + float(rng.uniform(-3.0, 3.0)),
            col=col + float(rng.uniform(-3.0, 3.0)),
            vel_row=0.0, vel_col=0.0,
            semi_row=float(rng.uniform(8.0, 14.0)),
            semi_col=float(rng.uniform(10.0, 18.0)),
            opacity=float(np.clip(1.0 - attenuation, 0.0, 1.0)),
        ),)
    distractors = ()
    if rng.uniform() < 0.3:
        ang = float(rng.uniform(0.0, 2.0 * math.pi))
        dist = float(rng.uniform(10.0, 20.0))
        distractors = (Blob(
            row=float(np.clip(row + dist * math.sin(ang), 2.0, SKY_H - 3.0)),
            col=float(np.clip(col + dist * math.cos(ang), 2.0, SKY_W - 3.0)),
            radius_px=float(rng.uniform(2.5, 5.0)),
            amplitude=float(rng.uniform(0.4, 0.8)),
        ),)
    scene = SkyScene(image_size=(SKY_H, SKY_W),
                     sun_radius_px=SKY_SUN_RADIUS_PX,
                     sun_path=np.array([[row, col]]),
                     clouds=clouds,
                     distractors=distractors,
                     noise_sigma=SKY_NOISE_SIGMA)
    return render_frame(scene, 0, rng_seed=int(rng.integers(2 ** 31)))


def _joint_fracs(arm: ArmModel, joints) -> tuple[float, ...]:
    out = []
    for (lo, hi), q in zip(arm.joint_limits, joints):
        f = 2.0 * (q - lo) / (hi - lo) - 1.0
        out.append(max(-1.0, min(1.0, f)))
    return tuple(out)


def _observe(cfg: ScenarioConfig, joints, sun: SolarAngles, attenuation: float,
             cloudy: bool, prev_action: int, track_point, rng,
             tracker_net: Mlp | None
             ) -> tuple[AgentState, tuple[float, float] | None]:
    """Build the agent observation; returns (state, new tracked point)."""
    normal = panel_normal(cfg.arm, joints)
    if cfg.use_tracker_observations:
        if tracker_net is None:
            raise ValueError(
                "use_tracker_observations is set but no tracker net was provided")
        frame = _sky_frame(sun, attenuation, cloudy, rng)
        prev = track_point if track_point is not None else frame.gt_point
        new_point = track_step(tracker_net, frame, prev, 4).final
        est = sky_unproject(new_point)
        direction = sun_unit_vector(est)
    else:
        new_point = None
        direction = sun_unit_vector(sun)
    err = alignment_error(normal, direction)
    obs = AgentState(joint_fracs=_joint_fracs(cfg.arm, joints),
                     sun_direction=tuple(float(c) for c in direction),
                     alignment_error_rad=float(err),
                     prev_action=prev_action)
    return obs, new_point


def reset(cfg: ScenarioConfig, seed: int, tracker_net: Mlp | None = None
          ) -> tuple[EnvState, AgentState]:
    """Start an episode at sunrise with the arm at its home position.

    Raises NoDaylight (from the ephemeris layer) for polar-night scenarios.
    """
    sunrise, _ = episode_layout(cfg)
    joints = tuple(float(q) for q in clamp_joints(cfg.arm, cfg.home_joints))
    sun = solar_direction(sunrise, cfg.location)
    rng = _step_rng(seed, 0)
    proc = cfg.cloud_process
    if proc.active:
        next_toggle = float(rng.exponential(60.0 / proc.rate_per_hour))
    else:
        next_toggle = math.inf
    obs, track_point = _observe(cfg, joints, sun, 1.0, False, 0, None,
                                rng, tracker_net)
    state = EnvState(step_index=0, joints=joints, sun=sun, attenuation=1.0,
                     energy_wh=0.0, seed=seed, cloudy=False,
                     next_toggle_min=next_toggle, prev_action=0,
                     track_point=track_point, done=False)
    return state, obs


def step(state: EnvState, action: int, cfg: ScenarioConfig,
         action_delta_rad: float = 0.02, tracker_net: Mlp | None = None
         ) -> tuple[EnvState, StepResult]:
    """Advance one step: move joints, advance the sun and clouds, pay energy.

    The reward is the pure energy collected this step (Wh); movement
    penalties are the agent's business, not the world's.
    """
    if state.done:
        raise ValueError("cannot step a finished episode")
    sunrise, n_steps = episode_layout(cfg)
    dq = action_joint_delta(action, action_delta_rad)
    joints = tuple(float(q) for q in
                   clamp_joints(cfg.arm, np.asarray(state.joints) + dq))
    new_index = state.step_index + 1
    t_new = sunrise + datetime.timedelta(minutes=new_index * cfg.step_minutes)
    rng = _step_rng(state.seed, new_index)
    cloudy, next_toggle = _advance_clouds(
        state.cloudy, state.next_toggle_min, new_index * cfg.step_minutes,
        cfg.cloud_process, rng)
    attenuation = cfg.cloud_process.attenuation if cloudy else 1.0
    sun = solar_direction(t_new, cfg.location)
    normal = panel_normal(cfg.arm, joints)
    irr = irradiance(sun_unit_vector(sun), normal, cfg.irradiance_peak,
                     attenuation, sun.elevation_deg)
    reward = cfg.panel_area * irr * cfg.step_minutes / 60.0
    done = new_index >= n_steps
    obs, track_point = _observe(cfg, joints, sun, attenuation, cloudy,
                                action, state.track_point, rng, tracker_net)
    true_err = alignment_error(normal, sun_unit_vector(sun))
    new_state = EnvState(step_index=new_index, joints=joints, sun=sun,
                         attenuation=attenuation,
                         energy_wh=state.energy_wh + reward, seed=state.seed,
                         cloudy=cloudy, next_toggle_min=next_toggle,
                         prev_action=action, track_point=track_point,
                         done=done)
    info = StepInfo(alignment_error_rad=float(true_err), irradiance_w_m2=irr,
                    occluded=cloudy)
    return new_state, StepResult(observation=obs, reward=reward, done=done,
                                 info=info)


def _step_suns(cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Unit sun vectors and elevations at each step endpoint of the episode."""
    sunrise, n_steps = episode_layout(cfg)
    vecs = np.empty((n_steps, 3))
    els = np.empty(n_steps)
    for i in range(1, n_steps + 1):
        t = sunrise + datetime.timedelta(minutes=i * cfg.step_minutes)
        sun = solar_direction(t, cfg.location)
        vecs[i - 1] = sun_unit_vector(sun)
        els[i - 1] = sun.elevation_deg
    return vecs, els


def static_yield(cfg: ScenarioConfig, normal) -> float:
    """Expected daily energy (Wh) of a panel fixed at the given normal.

    Clouds enter through the process's long-run expected transmission
    factor, so the result is deterministic.
    """
    n = np.asarray(normal, dtype=np.float64)
    if abs(float(np.linalg.norm(n)) - 1.0) > 1e-6:
        raise ValueError("normal is not unit length")
    vecs, els = _step_suns(cfg)
    factor = cfg.cloud_process.expected_factor()
    hours = cfg.step_minutes / 60.0
    total = 0.0
    for v, el in zip(vecs, els):
        total += cfg.panel_area * irradiance(v, n, cfg.irradiance_peak,
                                             factor, el) * hours
    return total


def best_static_orientation(cfg: ScenarioConfig, grid_deg: float
                            ) -> tuple[np.ndarray, float]:
    """Exhaustive azimuth x tilt grid search for the best fixed panel.

    Ties are broken toward the lower tilt (the cheaper mount).
    """
    if grid_deg <= 0.0:
        raise ValueError(f"grid_deg must be > 0, got {grid_deg}")
    vecs, els = _step_suns(cfg)
    day = els > 0.0
    factor = cfg.cloud_process.expected_factor()
    hours = cfg.step_minutes / 60.0
    scale = cfg.panel_area * cfg.irradiance_peak * factor * hours
    best_normal = None
    best_wh = -1.0
    n_t = int(math.floor(90.0 / grid_deg)) + 1
    n_a = int(math.ceil(360.0 / grid_deg))
    for it in range(n_t):
        tilt = math.radians(min(it * grid_deg, 90.0))
        # every azimuth coincides at zero tilt
        for ia in range(1 if it == 0 else n_a):
            az = math.radians(ia * grid_deg)
            normal = np.array([math.sin(tilt) * math.sin(az),
                               math.sin(tilt) * math.cos(az),
                               math.cos(tilt)])
            dots = vecs[day] @ normal
            wh = scale * float(np.sum(np.clip(dots, 0.0, None)))
            if wh > best_wh + WH_PER_STEP_TOL:
                best_wh = wh
                best_normal = normal
    return best_normal, best_wh


def oracle_tracking_yield(cfg: ScenarioConfig) -> float:
    """Energy (Wh) of an idealized controller re-aligned every step.

    Per step the alignment solver is warm-started from the previous joints
    and driven to 0.5 degrees; clouds enter in expectation as for
    static_yield. This is the ceiling any learned policy is compared to.
    """
    vecs, els = _step_suns(cfg)
    factor = cfg.cloud_process.expected_factor()
    hours = cfg.step_minutes / 60.0
    q = np.asarray(cfg.home_joints, dtype=np.float64)
    total = 0.0
    tol = math.radians(0.5)
    for v, el in zip(vecs, els):
        if el <= 0.0:
            continue
        q, _ = solve_alignment(cfg.arm, q, v, tol_rad=tol)
        total += cfg.panel_area * irradiance(v, panel_normal(cfg.arm, q),
                                             cfg.irradiance_peak, factor,
                                             el) * hours
    return total


# --- toy 1-DoF mode ---------------------------------------------------------
#
# A single azimuth joint chases a sun moving steadily around the horizon
# circle. The sun advances half an action increment per step, so the panel
# can lock on and hold; every quantity stays on the half-increment grid,
# which makes the optimal stationary policy exactly enumerable.


@dataclass(frozen=True)
class ToyConfig:
    """Scenario for the 1-DoF toy mode."""

    n_steps: int = 60
    action_delta_rad: float = 0.1
    sun_start_rad: float = -1.0
    panel_start_rad: float = 0.0
    peak_reward: float = 1.0

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.action_delta_rad <= 0.0:
            raise ValueError(
                f"action_delta_rad must be > 0, got {self.action_delta_rad}")
        if self.peak_reward <= 0.0:
            raise ValueError(f"peak_reward must be > 0, got {self.peak_reward}")

    @property
    def sun_step_rad(self) -> float:
        return self.action_delta_rad / 2.0


@dataclass(frozen=True)
class ToyState:
    """State of the 1-DoF toy episode."""

    step_index: int
    panel_rad: float
    sun_rad: float
    energy: float
    prev_action: int
    done: bool


def _wrap_pi(x: float) -> float:
    return math.atan2(math.sin(x), math.cos(x))


def _toy_observe(cfg: ToyConfig, state: ToyState) -> AgentState:
    gap = _wrap_pi(state.sun_rad - state.panel_rad)
    direction = (math.sin(state.sun_rad), math.cos(state.sun_rad), 0.0)
    fracs = (max(-1.0, min(1.0, state.panel_rad / math.pi)),
             0.0, 0.0, 0.0, 0.0, 0.0)
    return AgentState(joint_fracs=fracs, sun_direction=direction,
                      alignment_error_rad=abs(gap),
                      prev_action=state.prev_action)


def toy_reset(cfg: ToyConfig, seed: int = 0) -> tuple[ToyState, AgentState]:
    """Start the toy episode; the layout is fixed, so every seed agrees."""
    state = ToyState(step_index=0, panel_rad=_wrap_pi(cfg.panel_start_rad),
                     sun_rad=_wrap_pi(cfg.sun_start_rad), energy=0.0,
                     prev_action=0, done=False)
    return state, _toy_observe(cfg, state)


def toy_step(state: ToyState, action: int, cfg: ToyConfig
             ) -> tuple[ToyState, StepResult]:
    """Advance the toy world one step; same contract as the full step()."""
    if state.done:
        raise ValueError("cannot step a finished episode")
    if not 0 <= action < N_ACTIONS:
        raise ValueError(f"action {action} outside [0, {N_ACTIONS})")
    u = 0.0
    if action == 1:
        u = cfg.action_delta_rad
    elif action == 2:
        u = -cfg.action_delta_rad
    panel = _wrap_pi(state.panel_rad + u)
    sun = _wrap_pi(state.sun_rad + cfg.sun_step_rad)
    gap = _wrap_pi(sun - panel)
    irr = cfg.peak_reward * max(0.0, math.cos(gap))
    reward = irr
    new_index = state.step_index + 1
    done = new_index >= cfg.n_steps
    new_state = ToyState(step_index=new_index, panel_rad=panel, sun_rad=sun,
                         energy=state.energy + reward, prev_action=action,
                         done=done)
    info = StepInfo(alignment_error_rad=abs(gap), irradiance_w_m2=irr,
                    occluded=False)
    return new_state, StepResult(observation=_toy_observe(cfg, new_state),
                                 reward=reward, done=done, info=info)
