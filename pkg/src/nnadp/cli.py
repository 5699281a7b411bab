"""Command-line workflow: sets, train-value, train-policy, simulate, compare.

Exit codes: 0 ok, 1 configuration or missing-artifact error, 2 infeasibility,
3 acceptance threshold exceeded.
"""

import argparse
import csv
import logging
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from .config import load_config
from .control import (
    ExactMpcController,
    ValueFwController,
    VertexPolicyController,
    backward_reach_sequence,
    simulate_closed_loop,
)
from .errors import ConfigError, ControllerFailure, EmptyPolytope, Infeasible
from .geometry import chebyshev_center, contains, enumerate_vertices, max_violation, save_json
from .network import Mlp
from .pipeline import fit_regression, generate_policy_dataset, sequential_dp_train

logger = logging.getLogger("nnadp")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_THRESHOLD = 0, 1, 2, 3
VIOLATION_TOL = 1e-8
SPEEDUP_TARGET = 10.0


class MissingArtifact(Exception):
    pass


def _fmt(v):
    return repr(float(v))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def _out(args, cfg):
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sets(cfg):
    return backward_reach_sequence(cfg.system, cfg.X, cfg.U, cfg.X_N, cfg.N)


def _load_model(path):
    if not path.exists():
        raise MissingArtifact(f"missing {path}; run the prerequisite command first")
    return Mlp.load(path)


def _tag(x0):
    return "_".join(f"{v:g}" for v in x0)


def cmd_sets(args, cfg):
    out = _out(args, cfg) / "sets"
    out.mkdir(exist_ok=True)
    sets = _sets(cfg)
    rows = []
    for k, P in enumerate(sets.sets):
        save_json(P, out / f"X_{k}.json")
        _, radius = chebyshev_center(P)
        nested = True if k == 0 else all(
            contains(sets.sets[k - 1], v, 1e-9) for v in enumerate_vertices(P).vertices
        )
        rows.append([k, P.m, _fmt(radius), str(nested).lower()])
    _write_csv(out / "summary.csv", ["k", "rows", "chebyshev_radius", "nested_in_previous"], rows)
    print(f"{'k':>3} {'rows':>5} {'radius':>10} nested")
    for k, m, r, nested in rows:
        print(f"{k:>3} {m:>5} {float(r):>10.4f} {nested}")
    return EXIT_OK


def cmd_train_value(args, cfg):
    out = _out(args, cfg) / "models"
    out.mkdir(exist_ok=True)
    sets = _sets(cfg)
    nets, reports = sequential_dp_train(
        sets, cfg.system, cfg.cost, cfg.fw, cfg.train, q=cfg.q_per_stage,
        hidden=cfg.hidden, jobs=args.jobs,
    )
    for k, net in enumerate(nets, start=1):
        net.save(out / f"value_{k}.json")
    _write_csv(out / "value_metrics.csv", ["stage", "train_mse", "val_mse", "wall_time"],
               [[r.stage, _fmt(r.train_mse), _fmt(r.val_mse), f"{r.wall_time:.3f}"] for r in reports])
    for r in reports:
        print(f"stage {r.stage}: train mse {r.train_mse:.4g}  val mse {r.val_mse:.4g}  ({r.wall_time:.1f} s)")
    return EXIT_OK


def cmd_train_policy(args, cfg):
    out = _out(args, cfg) / "models"
    out.mkdir(exist_ok=True)
    value_1 = _load_model(out / "value_1.json")
    sets = _sets(cfg)
    V = enumerate_vertices(cfg.U)
    ctrl = ValueFwController(value_1, cfg.cost, cfg.system, sets, cfg.fw)
    t0 = time.perf_counter()
    rng = np.random.default_rng([cfg.train.seed, 0, 1])
    ds = generate_policy_dataset(ctrl, V, cfg.q_policy, sets, rng, jobs=args.jobs)
    ds.meta.update({"seed": cfg.train.seed, "fw_max_iters": cfg.fw.max_iters})
    ds.to_csv(out / "policy_dataset.csv")
    net, tr, va = fit_regression([cfg.system.nx, *cfg.hidden, V.n_v], "softmax", ds, cfg.train)
    net.save(out / "policy.json")
    _write_csv(out / "policy_metrics.csv", ["train_mse", "val_mse", "wall_time"],
               [[_fmt(tr), _fmt(va), f"{time.perf_counter() - t0:.3f}"]])
    print(f"policy: {V.n_v} vertices, train mse {tr:.4g}  val mse {va:.4g}")
    return EXIT_OK


def _controller(kind, cfg, sets, models):
    if kind == "exact":
        return ExactMpcController(cfg.system, cfg.cost, sets)
    if kind == "value":
        return ValueFwController(_load_model(models / "value_1.json"), cfg.cost, cfg.system, sets, cfg.fw)
    if kind == "policy":
        return VertexPolicyController(_load_model(models / "policy.json"), enumerate_vertices(cfg.U))
    raise ValueError(kind)


def _run(ctrl, cfg, sets, x0):
    return simulate_closed_loop(ctrl, cfg.system, cfg.cost, sets, x0, cfg.T)


def cmd_simulate(args, cfg):
    out = _out(args, cfg)
    traj_dir = out / "trajectories"
    traj_dir.mkdir(exist_ok=True)
    try:
        x0 = np.array([float(v) for v in args.x0.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse --x0 {args.x0!r}") from None
    if x0.size != cfg.system.nx:
        raise ConfigError(f"--x0 has {x0.size} entries, the state has {cfg.system.nx}")
    sets = _sets(cfg)
    ctrl = _controller(args.controller, cfg, sets, out / "models")
    traj = _run(ctrl, cfg, sets, x0)
    stem = f"{args.controller}_{_tag(x0)}"
    traj.to_csv(traj_dir / f"{stem}.csv")
    if args.svg:
        from .plotting import plot_trajectories

        plot_trajectories({args.controller: traj}, sets, traj_dir / f"{stem}.svg")
    print(f"total cost {traj.total_cost:.6g}; mean step time {np.mean(traj.step_times) * 1e3:.3f} ms")
    return EXIT_OK


def _violations(traj, cfg, sets):
    u_viol = max(max_violation(cfg.U, u) for u in traj.inputs)
    x_viol = max(max_violation(cfg.X, x) for x in traj.states)
    x0_viol = max(max_violation(sets.sets[0], x) for x in traj.states)
    return u_viol, x_viol, x0_viol


def cmd_compare(args, cfg):
    out = _out(args, cfg)
    cmp_dir = out / "compare"
    cmp_dir.mkdir(exist_ok=True)
    sets = _sets(cfg)
    models = out / "models"
    ctrls = [_controller(kind, cfg, sets, models) for kind in ("exact", "value", "policy")]
    rows, timing = [], []
    status = EXIT_OK
    speed = {"value": [], "policy": []}
    for x0 in cfg.initial_states:
        trajs = {}
        for ctrl in ctrls:
            traj = _run(ctrl, cfg, sets, x0)
            trajs[ctrl.kind] = traj
            traj.to_csv(cmp_dir / f"{ctrl.kind}_{_tag(x0)}.csv")
        j_exact = trajs["exact"].total_cost
        for kind, traj in trajs.items():
            rel = (traj.total_cost - j_exact) / max(abs(j_exact), 1e-12)
            u_viol, x_viol, x0_viol = _violations(traj, cfg, sets)
            rows.append([_tag(x0), kind, _fmt(traj.total_cost), _fmt(rel), _fmt(u_viol), _fmt(x_viol), _fmt(x0_viol)])
            step_time = float(np.mean(traj.step_times))
            timing.append([_tag(x0), kind, f"{step_time:.6e}"])
            if kind in speed:
                speed[kind].append(step_time)
            over = kind != "exact" and rel > cfg.suboptimality_threshold
            violated = max(u_viol, x_viol) > VIOLATION_TOL or (kind != "policy" and x0_viol > VIOLATION_TOL)
            if over or violated:
                status = EXIT_THRESHOLD
        if args.svg:
            from .plotting import plot_trajectories

            plot_trajectories(trajs, sets, cmp_dir / f"compare_{_tag(x0)}.svg")
    header = ["x0", "controller", "total_cost", "rel_suboptimality",
              "max_input_violation", "max_state_violation", "max_X0_violation"]
    _write_csv(cmp_dir / "report.csv", header, rows)
    _write_csv(cmp_dir / "timing.csv", ["x0", "controller", "mean_step_time_s"], timing)

    print(f"{'x0':>12} {'controller':>10} {'cost':>12} {'rel':>9} {'u viol':>9} {'x viol':>9}")
    for x0, kind, J, rel, uv, xv, _ in rows:
        print(f"{x0:>12} {kind:>10} {float(J):>12.4f} {float(rel):>9.4f} {float(uv):>9.2e} {float(xv):>9.2e}")
    ratio = np.mean(speed["value"]) / np.mean(speed["policy"])
    print(f"policy/value speed ratio: {ratio:.1f}x")
    if ratio < SPEEDUP_TARGET:
        warnings.warn(f"policy controller only {ratio:.1f}x faster than the value controller")
    if status == EXIT_THRESHOLD:
        print("acceptance threshold exceeded", file=sys.stderr)
    return status


COMMANDS = {
    "sets": cmd_sets,
    "train-value": cmd_train_value,
    "train-policy": cmd_train_policy,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment JSON (default: built-in benchmark)")
    common.add_argument("--out", help="output directory (default: config output_dir)")
    common.add_argument("--svg", action="store_true", help="also write SVG figures")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker threads for data generation")
    common.add_argument("--seed", type=int, help="override training.seed")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nnadp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("sets", "train-value", "train-policy", "compare"):
        sub.add_parser(name, parents=[common])
    sim = sub.add_parser("simulate", parents=[common])
    sim.add_argument("--controller", choices=("exact", "value", "policy"), required=True)
    sim.add_argument("--x0", required=True, help='initial state, e.g. "6.75,9"')
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; here 2 means infeasible
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.train.seed = args.seed
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, MissingArtifact) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EmptyPolytope, Infeasible) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ControllerFailure as exc:
        print(f"controller failure: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
