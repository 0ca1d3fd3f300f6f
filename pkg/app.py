"""
Command-Line Entry for Singular-Perturbation Trajectory Tracking
Runs experiment configs through the solution paths and writes their outputs
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Add project root to path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from core.errors import ParseError, TrackingError
from experiments.config import METHODS, Settings, parse_config, parse_config_dict
from experiments.feedback import FeedbackLoop
from experiments.outputs import emit_feedback, emit_outputs, emit_sweep
from experiments.runner import certify, epsilon_sweep, run_experiment


def banner(title: str):
    print("=" * 60)
    print(title)
    print("=" * 60)


def load_config(path: str, method: str = None):
    cfg = parse_config(path)
    if method and method != cfg.method:
        data = cfg.to_dict()
        data['method'] = method
        cfg = parse_config_dict(data, source=path)
    return cfg


def output_dir(args, cfg, settings: Settings) -> str:
    return args.out or cfg.output or os.path.join(settings.output_dir, cfg.name)


def cmd_solve(args, settings: Settings) -> int:
    cfg = load_config(args.config, args.method)
    banner(f"SOLVING {cfg.name.upper()} ({cfg.method})")
    result = run_experiment(cfg, settings)
    for name, traj in result.solutions.items():
        print(f"✅ {name}: {traj.grid.size} samples, {len(traj.kicks)} kicks")
    for path in emit_outputs(result, output_dir(args, cfg, settings)):
        print(f"Wrote {path}")
    return 0


def cmd_check(args, settings: Settings) -> int:
    cfg = load_config(args.config)
    banner(f"LINEARIZING CHECK: {cfg.model.name}")
    try:
        report = certify(cfg, cfg.build_problem())
    except TrackingError as exc:
        if exc.code != 'NotLinearizable':
            raise
        print(f"❌ {exc.code}: {exc.message}")
        return exc.exit_code
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    print("✅ Ω is constant and Q·R is affine over the samples")
    return 0


def cmd_compare(args, settings: Settings) -> int:
    args.method = 'compare'
    return cmd_solve(args, settings)


def cmd_sweep(args, settings: Settings) -> int:
    cfg = load_config(args.config)
    eps_list = [float(v) for v in args.epsilon.split(',') if v.strip()]
    banner(f"EPSILON SWEEP: {cfg.name.upper()}")
    table = epsilon_sweep(cfg, eps_list, settings)
    print(table.to_string(index=False))
    print(f"Wrote {emit_sweep(table, output_dir(args, cfg, settings))}")
    return 0


def cmd_feedback(args, settings: Settings) -> int:
    cfg = load_config(args.config)
    sample_dt = args.sample_dt or cfg.feedback.get('sample_dt')
    if sample_dt is None:
        raise ParseError("Please pass --sample-dt or set feedback.sample_dt in the config", field='feedback.sample_dt')
    banner(f"SAMPLED FEEDBACK: {cfg.name.upper()}")
    loop = FeedbackLoop(cfg, float(sample_dt), cfg.feedback.get('disturbance'), settings)
    traj = loop.run()
    directory = output_dir(args, cfg, settings)
    for path in emit_feedback(traj, loop.log, directory):
        print(f"Wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Optimal trajectory tracking by singular perturbation")
    sub = parser.add_subparsers(dest='command', required=True)

    solve = sub.add_parser('solve', help="run a config with its (or the given) method")
    solve.add_argument('--config', required=True)
    solve.add_argument('--method', choices=METHODS)
    solve.add_argument('--out')
    solve.set_defaults(handler=cmd_solve)

    check = sub.add_parser('check', help="linearizing-assumption report")
    check.add_argument('--config', required=True)
    check.set_defaults(handler=cmd_check)

    compare = sub.add_parser('compare', help="composite against the shooting oracle")
    compare.add_argument('--config', required=True)
    compare.add_argument('--out')
    compare.set_defaults(handler=cmd_compare)

    sweep = sub.add_parser('sweep', help="composite over a list of epsilons")
    sweep.add_argument('--config', required=True)
    sweep.add_argument('--epsilon', required=True, help="comma-separated, e.g. 1e-2,1e-3,1e-4")
    sweep.add_argument('--out')
    sweep.set_defaults(handler=cmd_sweep)

    feedback = sub.add_parser('feedback', help="sampled-data closed loop")
    feedback.add_argument('--config', required=True)
    feedback.add_argument('--sample-dt', type=float)
    feedback.add_argument('--out')
    feedback.set_defaults(handler=cmd_feedback)
    return parser


def main(argv=None) -> int:
    """Main application"""
    args = build_parser().parse_args(argv)
    try:
        settings = Settings()
    except ValueError as exc:
        print(f"❌ ConfigError: {exc}")
        return 2
    logging.basicConfig(level=getattr(logging, settings.log_level, logging.INFO),
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')
    try:
        return args.handler(args, settings)
    except TrackingError as exc:
        print(f"❌ {exc.code}: {exc.message}")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
