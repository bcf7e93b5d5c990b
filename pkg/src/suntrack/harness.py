"""Experiment orchestration: config files, checkpoints, metrics, pipelines.

Configs are strict JSON: unknown fields are rejected and every error names
the offending field and constraint. A single master seed fans out to
per-component seeds through a labeled hash, and the run summary is written
atomically so its presence certifies a complete run.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .agent import AgentConfig, run_evaluation, run_training
from .environment import (CloudProcess, ScenarioConfig, ToyConfig,
                          best_static_orientation, oracle_tracking_yield,
                          static_yield)
from .ephemeris import GeoLocation
from .kinematics import ArmModel
from .neural import Mlp, mlp_from_dict, mlp_to_dict
from .tracker import LossConfig, SceneConfig, TrackerTrainConfig, train_tracker

DEFAULT_EPISODES = 300
DEFAULT_EVAL_SEEDS = 10
BASELINE_GRID_DEG = 5.0


class ConfigError(ValueError):
    """A config file failed to parse or validate."""


@dataclass(frozen=True)
class RunConfig:
    """Everything a full pipeline run needs."""

    scenario_path: str
    agent_path: str | None
    tracker_path: str | None
    seed: int
    out_dir: str
    episodes: int = DEFAULT_EPISODES
    eval_seeds: int = DEFAULT_EVAL_SEEDS

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned value, got {self.seed}")
        if self.episodes < 0:
            raise ValueError(f"episodes must be >= 0, got {self.episodes}")
        if self.eval_seeds < 1:
            raise ValueError(f"eval_seeds must be >= 1, got {self.eval_seeds}")


def fanout_seed(seed: int, label: str) -> int:
    """Per-component seed derived from the master seed and a label."""
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


# --- config files -----------------------------------------------------------


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"{path}: {e}") from e
    if not text.strip():
        return {}
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def _reject_unknown(d: dict, allowed, where: str) -> None:
    for key in d:
        if key not in allowed:
            raise ConfigError(f"{where}: unknown field '{key}'")


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing required field '{key}'")
    return d[key]


def _build(ctor, kwargs, where: str):
    try:
        return ctor(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from e


def load_scenario_config(path: str) -> ScenarioConfig | ToyConfig:
    """Parse a scenario file; {"toy": {...}} selects the 1-DoF toy mode."""
    data = _read_json(path)
    if "toy" in data:
        _reject_unknown(data, {"toy"}, path)
        toy = data["toy"]
        if not isinstance(toy, dict):
            raise ConfigError(f"{path}: 'toy' must be an object")
        allowed = {"n_steps", "action_delta_rad", "sun_start_rad",
                   "panel_start_rad", "peak_reward"}
        _reject_unknown(toy, allowed, f"{path}: toy")
        return _build(ToyConfig, toy, f"{path}: toy")
    allowed = {"location", "date", "step_minutes", "irradiance_peak",
               "panel_area", "cloud_process", "use_tracker_observations",
               "arm", "home_joints"}
    _reject_unknown(data, allowed, path)
    loc_d = _require(data, "location", path)
    _reject_unknown(loc_d, {"latitude_deg", "longitude_deg"}, f"{path}: location")
    _require(loc_d, "latitude_deg", f"{path}: location")
    _require(loc_d, "longitude_deg", f"{path}: location")
    location = _build(GeoLocation, loc_d, f"{path}: location")
    date_s = _require(data, "date", path)
    try:
        date = datetime.date.fromisoformat(str(date_s))
    except ValueError as e:
        raise ConfigError(f"{path}: date: {e}") from e
    kwargs: dict = {"location": location, "date": date}
    for key in ("step_minutes", "irradiance_peak", "panel_area",
                "use_tracker_observations"):
        if key in data:
            kwargs[key] = data[key]
    if "cloud_process" in data:
        cp = data["cloud_process"]
        _reject_unknown(cp, {"rate_per_hour", "mean_duration_min",
                             "attenuation"}, f"{path}: cloud_process")
        kwargs["cloud_process"] = _build(CloudProcess, cp,
                                         f"{path}: cloud_process")
    if "arm" in data:
        arm_d = data["arm"]
        _reject_unknown(arm_d, {"rows", "joint_limits", "panel_axis"},
                        f"{path}: arm")
        try:
            kwargs["arm"] = ArmModel.from_dict(arm_d)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"{path}: arm: {e}") from e
    if "home_joints" in data:
        kwargs["home_joints"] = tuple(float(q) for q in data["home_joints"])
    return _build(ScenarioConfig, kwargs, path)


def load_agent_config(path: str) -> AgentConfig:
    data = _read_json(path)
    allowed = {"gamma", "epsilon_schedule", "buffer_capacity", "batch_size",
               "target_sync_every", "learning_rate", "action_delta_rad",
               "hidden_sizes"}
    _reject_unknown(data, allowed, path)
    kwargs = dict(data)
    if "epsilon_schedule" in kwargs:
        sched = kwargs["epsilon_schedule"]
        if not (isinstance(sched, (list, tuple)) and len(sched) == 3):
            raise ConfigError(
                f"{path}: epsilon_schedule must be [eps_start, eps_end, "
                f"decay_steps]")
        kwargs["epsilon_schedule"] = (float(sched[0]), float(sched[1]),
                                      int(sched[2]))
    if "hidden_sizes" in kwargs:
        kwargs["hidden_sizes"] = tuple(int(h) for h in kwargs["hidden_sizes"])
    return _build(AgentConfig, kwargs, path)


def load_tracker_config(path: str
                        ) -> tuple[SceneConfig, LossConfig, TrackerTrainConfig]:
    data = _read_json(path)
    _reject_unknown(data, {"scene", "loss", "train"}, path)
    sections = []
    for key, ctor in (("scene", SceneConfig), ("loss", LossConfig),
                      ("train", TrackerTrainConfig)):
        sub = data.get(key, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"{path}: '{key}' must be an object")
        fields = set(ctor.__dataclass_fields__)
        _reject_unknown(sub, fields, f"{path}: {key}")
        kwargs = dict(sub)
        for name, value in kwargs.items():
            if isinstance(value, list):
                kwargs[name] = tuple(value)
        sections.append(_build(ctor, kwargs, f"{path}: {key}"))
    return sections[0], sections[1], sections[2]


def load_run_config(path: str, seed: int, out_dir: str) -> RunConfig:
    """Parse a pipeline file; relative paths are taken from its directory."""
    data = _read_json(path)
    _reject_unknown(data, {"scenario", "agent", "tracker", "episodes",
                           "eval_seeds"}, path)
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        if p is None:
            return None
        return p if os.path.isabs(p) else os.path.join(base, p)

    scenario = _require(data, "scenario", path)
    return _build(RunConfig,
                  {"scenario_path": resolve(scenario),
                   "agent_path": resolve(data.get("agent")),
                   "tracker_path": resolve(data.get("tracker")),
                   "seed": seed,
                   "out_dir": out_dir,
                   "episodes": int(data.get("episodes", DEFAULT_EPISODES)),
                   "eval_seeds": int(data.get("eval_seeds",
                                              DEFAULT_EVAL_SEEDS))},
                  path)


def scenario_to_dict(cfg: ScenarioConfig | ToyConfig) -> dict:
    """Inverse of load_scenario_config, for round-trip checks."""
    if isinstance(cfg, ToyConfig):
        return {"toy": {"n_steps": cfg.n_steps,
                        "action_delta_rad": cfg.action_delta_rad,
                        "sun_start_rad": cfg.sun_start_rad,
                        "panel_start_rad": cfg.panel_start_rad,
                        "peak_reward": cfg.peak_reward}}
    return {
        "location": {"latitude_deg": cfg.location.latitude_deg,
                     "longitude_deg": cfg.location.longitude_deg},
        "date": cfg.date.isoformat(),
        "step_minutes": cfg.step_minutes,
        "irradiance_peak": cfg.irradiance_peak,
        "panel_area": cfg.panel_area,
        "cloud_process": {"rate_per_hour": cfg.cloud_process.rate_per_hour,
                          "mean_duration_min": cfg.cloud_process.mean_duration_min,
                          "attenuation": cfg.cloud_process.attenuation},
        "use_tracker_observations": cfg.use_tracker_observations,
        "arm": {"rows": [[r.a, r.alpha, r.d, r.theta_offset]
                         for r in cfg.arm.rows],
                "joint_limits": [list(p) for p in cfg.arm.joint_limits],
                "panel_axis": list(cfg.arm.panel_axis)},
        "home_joints": list(cfg.home_joints),
    }


# --- checkpoints and metrics ------------------------------------------------


def _format_number(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _dump_json(obj) -> str:
    """JSON text with floats at 17 significant digits (bit-exact reload)."""
    if isinstance(obj, dict):
        inner = ",".join(f"{json.dumps(str(k))}:{_dump_json(v)}"
                         for k, v in obj.items())
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_dump_json(v) for v in obj) + "]"
    if isinstance(obj, str):
        return json.dumps(obj)
    if obj is None:
        return "null"
    return _format_number(obj)


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def save_checkpoint(net: Mlp, path: str) -> None:
    """Write the network as a version-1 JSON document."""
    text = _dump_json(mlp_to_dict(net))
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")


def load_checkpoint(path: str) -> Mlp:
    """Read a checkpoint; errors leave no partially built network behind."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: corrupt checkpoint ({e})") from e
    return mlp_from_dict(data)


def write_metrics_csv(path: str, header: list[str], rows: list[dict]) -> None:
    """Deterministic CSV: declared columns, repr-exact numbers."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for col in header:
            v = row[col]
            if isinstance(v, bool):
                v = int(v)
            if isinstance(v, float):
                cells.append(repr(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary(path: str, entries: dict) -> None:
    """key=value document, written via temp file + rename so it is atomic."""
    lines = []
    for k, v in entries.items():
        if isinstance(v, float):
            lines.append(f"{k}={v:.6f}")
        else:
            lines.append(f"{k}={v}")
    text = "\n".join(lines) + "\n"
    _ensure_parent(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".summary-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- pipelines --------------------------------------------------------------


def run_experiment(cfg: RunConfig) -> dict:
    """Full pipeline: tracker training, agent training, eval, baselines.

    Writes metrics, checkpoints, and finally the summary document into
    cfg.out_dir; returns the summary mapping.
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    scenario = load_scenario_config(cfg.scenario_path)
    agent_cfg = (load_agent_config(cfg.agent_path) if cfg.agent_path
                 else AgentConfig())
    if cfg.tracker_path:
        scene_cfg, loss_cfg, track_cfg = load_tracker_config(cfg.tracker_path)
    else:
        scene_cfg, loss_cfg, track_cfg = (SceneConfig(), LossConfig(),
                                          TrackerTrainConfig())

    tracker_net, tracker_rows = train_tracker(
        scene_cfg, loss_cfg, track_cfg, seed=fanout_seed(cfg.seed, "tracker"))
    save_checkpoint(tracker_net, os.path.join(cfg.out_dir, "tracker.json"))
    write_metrics_csv(os.path.join(cfg.out_dir, "tracker_metrics.csv"),
                      ["epoch", "loss", "hit_rate", "occluded_hit_rate"],
                      tracker_rows)
    tracker_hit = tracker_rows[-1]["hit_rate"] if tracker_rows else 0.0

    needs_tracker = (isinstance(scenario, ScenarioConfig)
                     and scenario.use_tracker_observations)
    qnet, agent_rows = run_training(
        scenario, agent_cfg, fanout_seed(cfg.seed, "agent"),
        n_episodes=cfg.episodes,
        tracker_net=tracker_net if needs_tracker else None)
    save_checkpoint(qnet, os.path.join(cfg.out_dir, "agent.json"))
    write_metrics_csv(os.path.join(cfg.out_dir, "agent_metrics.csv"),
                      ["episode", "return", "success", "energy_wh", "epsilon"],
                      agent_rows)

    eval_seeds = [fanout_seed(cfg.seed, f"eval:{i}")
                  for i in range(cfg.eval_seeds)]
    eval_rows = run_evaluation(qnet, scenario, agent_cfg, eval_seeds,
                               tracker_net=tracker_net if needs_tracker else None)
    write_metrics_csv(os.path.join(cfg.out_dir, "eval_metrics.csv"),
                      ["seed", "return", "success", "energy_wh"], eval_rows)
    policy_wh = float(np.mean([r["energy_wh"] for r in eval_rows]))
    eval_success = float(np.mean([r["success"] for r in eval_rows]))

    summary = {
        "tracker_hit_rate": float(tracker_hit),
        "agent_final_success_rate": eval_success,
        "policy_energy_wh": policy_wh,
    }
    if isinstance(scenario, ScenarioConfig):
        horiz_wh = static_yield(scenario, (0.0, 0.0, 1.0))
        _, best_wh = best_static_orientation(scenario, BASELINE_GRID_DEG)
        oracle_wh = oracle_tracking_yield(scenario)
        summary.update({
            "horizontal_static_wh": horiz_wh,
            "best_static_wh": best_wh,
            "oracle_tracking_wh": oracle_wh,
            "gain_vs_horizontal_percent":
                100.0 * (policy_wh - horiz_wh) / horiz_wh if horiz_wh else 0.0,
            "gain_vs_best_static_percent":
                100.0 * (policy_wh - best_wh) / best_wh if best_wh else 0.0,
            "policy_vs_oracle_percent":
                100.0 * policy_wh / oracle_wh if oracle_wh else 0.0,
        })
    write_summary(os.path.join(cfg.out_dir, "summary"), summary)
    return summary


def baseline_line(scenario: ScenarioConfig) -> str:
    """The baseline subcommand's one-line payload."""
    _, best_wh = best_static_orientation(scenario, BASELINE_GRID_DEG)
    oracle_wh = oracle_tracking_yield(scenario)
    gain = 100.0 * (oracle_wh - best_wh) / best_wh if best_wh else math.inf
    return f"{best_wh:.6f},{oracle_wh:.6f},{gain:.6f}"
