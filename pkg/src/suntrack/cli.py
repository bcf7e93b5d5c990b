"""Command-line interface.

Subcommands: ephemeris, track-train, train, eval, baseline, run. Every
command exits 0 on success and nonzero with one diagnostic line on stderr
otherwise; all outputs are deterministic for a fixed (config, seed).
"""

from __future__ import annotations

import argparse
import datetime
import os
import sys

from . import harness
from .agent import run_evaluation, run_training
from .environment import ScenarioConfig
from .ephemeris import GeoLocation, daylight_window, solar_direction
from .tracker import train_tracker


def _cmd_ephemeris(args) -> int:
    loc = GeoLocation(latitude_deg=args.lat, longitude_deg=args.lon)
    day = datetime.date.fromisoformat(args.date)
    sunrise, sunset = daylight_window(day, loc)
    lines = ["time_utc,azimuth_deg,elevation_deg"]
    t = sunrise
    step = datetime.timedelta(minutes=args.step_min)
    while t <= sunset:
        sun = solar_direction(t, loc)
        stamp = t.strftime("%Y-%m-%dT%H:%M:%SZ")
        lines.append(f"{stamp},{sun.azimuth_deg:.6f},{sun.elevation_deg:.6f}")
        t += step
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_track_train(args) -> int:
    scene_cfg, loss_cfg, train_cfg = harness.load_tracker_config(args.config)
    net, rows = train_tracker(scene_cfg, loss_cfg, train_cfg, seed=args.seed)
    harness.save_checkpoint(net, args.out)
    harness.write_metrics_csv(args.metrics,
                              ["epoch", "loss", "hit_rate",
                               "occluded_hit_rate"], rows)
    return 0


def _load_tracker_net(args, scenario) -> object | None:
    needs = isinstance(scenario, ScenarioConfig) and scenario.use_tracker_observations
    if not needs:
        return None
    if not args.tracker_checkpoint:
        raise ValueError(
            "scenario sets use_tracker_observations; pass --tracker-checkpoint")
    return harness.load_checkpoint(args.tracker_checkpoint)


def _cmd_train(args) -> int:
    scenario = harness.load_scenario_config(args.scenario)
    agent_cfg = (harness.load_agent_config(args.agent) if args.agent
                 else harness.AgentConfig())
    tracker_net = _load_tracker_net(args, scenario)
    qnet, rows = run_training(scenario, agent_cfg, args.seed,
                              n_episodes=args.episodes,
                              tracker_net=tracker_net)
    harness.save_checkpoint(qnet, args.out)
    harness.write_metrics_csv(args.metrics,
                              ["episode", "return", "success", "energy_wh",
                               "epsilon"], rows)
    return 0


def _cmd_eval(args) -> int:
    scenario = harness.load_scenario_config(args.scenario)
    agent_cfg = (harness.load_agent_config(args.agent) if args.agent
                 else harness.AgentConfig())
    tracker_net = _load_tracker_net(args, scenario)
    qnet = harness.load_checkpoint(args.checkpoint)
    seeds = [harness.fanout_seed(args.seed, f"eval:{i}")
             for i in range(args.seeds)]
    rows = run_evaluation(qnet, scenario, agent_cfg, seeds,
                          tracker_net=tracker_net)
    harness.write_metrics_csv(args.metrics,
                              ["seed", "return", "success", "energy_wh"],
                              rows)
    return 0


def _cmd_baseline(args) -> int:
    scenario = harness.load_scenario_config(args.scenario)
    if not isinstance(scenario, ScenarioConfig):
        raise ValueError("baseline needs a full solar scenario, not toy mode")
    print(harness.baseline_line(scenario))
    return 0


def _cmd_run(args) -> int:
    cfg = harness.load_run_config(args.config, args.seed, args.out)
    summary = harness.run_experiment(cfg)
    for key, value in summary.items():
        print(f"{key}={value:.6f}" if isinstance(value, float)
              else f"{key}={value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="suntrack",
        description="Sun-tracking simulation and learning pipelines")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ephemeris", help="print sun positions over a day")
    p.add_argument("--lat", type=float, required=True)
    p.add_argument("--lon", type=float, required=True)
    p.add_argument("--date", required=True, help="YYYY-MM-DD")
    p.add_argument("--step-min", type=float, default=5.0)
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    p.set_defaults(func=_cmd_ephemeris)

    p = sub.add_parser("track-train", help="train the sun-point tracker")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--metrics", required=True, help="metrics CSV path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_track_train)

    p = sub.add_parser("train", help="train the control agent")
    p.add_argument("--scenario", required=True)
    p.add_argument("--agent", default=None, help="agent config (defaults used if absent)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--metrics", required=True, help="metrics CSV path")
    p.add_argument("--episodes", type=int, default=harness.DEFAULT_EPISODES)
    p.add_argument("--tracker-checkpoint", default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="greedy rollouts of a trained agent")
    p.add_argument("--scenario", required=True)
    p.add_argument("--agent", default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=harness.DEFAULT_EVAL_SEEDS,
                   help="number of evaluation seeds")
    p.add_argument("--metrics", required=True)
    p.add_argument("--tracker-checkpoint", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("baseline", help="static and oracle yields for a scenario")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("run", help="full pipeline into an output directory")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:  # one diagnostic line, nonzero exit
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
