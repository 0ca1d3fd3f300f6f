"""
Output Emission
CSV trajectories and JSON sidecars written deterministically
"""

import json
import os
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from core.errors import OutputError
from core.types import TrajectorySolution

FLOAT_FORMAT = '%.17g'


def trajectory_frame(traj: TrajectorySolution) -> pd.DataFrame:
    """Columns t, x1..xn, lam1..lamn (when present), u1..up"""
    columns = {'t': traj.grid}
    for i in range(traj.n):
        columns[f"x{i + 1}"] = traj.x[:, i]
    if traj.lam is not None:
        for i in range(traj.n):
            columns[f"lam{i + 1}"] = traj.lam[:, i]
    for i in range(traj.p):
        columns[f"u{i + 1}"] = traj.u[:, i]
    return pd.DataFrame(columns)


def _plain(value):
    """JSON-ready copy with numpy scalars and arrays converted"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        # JSON has no infinities; keep them readable
        return value if np.isfinite(value) else str(value)
    return value


def write_json(data: Union[Dict, List], path: str):
    try:
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(_plain(data), f, indent=2, sort_keys=True)
            f.write('\n')
    except OSError as exc:
        raise OutputError(f"Could not write {path}: {exc}")


def write_csv(frame: pd.DataFrame, path: str):
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    except OSError as exc:
        raise OutputError(f"Could not write {path}: {exc}")


def _prepare(directory: str) -> str:
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"Could not create output directory {directory}: {exc}")
    return directory


def emit_outputs(result, directory: str) -> List[str]:
    """
    Write one experiment's artifacts.

    Files:
        trajectory.csv          primary solution
        trajectory_<name>.csv   every solution, when there is more than one
        kicks.json              exact ε=0 runs, a list of kicks
        metrics.json            flat map of costs, layer widths and comparison metrics
        report.json             linearizing report
        run.json                run summary and residual audits
        config.json             the fully resolved config

    Returns:
        list of written paths
    """
    _prepare(directory)
    written = []

    def out(name):
        path = os.path.join(directory, name)
        written.append(path)
        return path

    primary = result.solutions[result.primary]
    write_csv(trajectory_frame(primary), out('trajectory.csv'))
    if len(result.solutions) > 1:
        for name, traj in result.solutions.items():
            write_csv(trajectory_frame(traj), out(f"trajectory_{name}.csv"))
    if result.config.method == 'exact0':
        write_json([k.to_dict() for k in primary.kicks], out('kicks.json'))
    if result.metrics:
        write_json(result.metrics, out('metrics.json'))
    write_json(result.report.to_dict(), out('report.json'))
    write_json(result.summary(), out('run.json'))
    write_json(result.config.to_dict(), out('config.json'))
    return written


def emit_sweep(table: pd.DataFrame, directory: str) -> str:
    _prepare(directory)
    path = os.path.join(directory, 'sweep.csv')
    write_csv(table, path)
    return path


def emit_feedback(traj: TrajectorySolution, log: Optional[List[Dict]], directory: str) -> List[str]:
    """Closed-loop trajectory plus the per-sample measurement log"""
    _prepare(directory)
    paths = [os.path.join(directory, 'trajectory.csv'), os.path.join(directory, 'samples.json')]
    write_csv(trajectory_frame(traj), paths[0])
    write_json({'samples': log or []}, paths[1])
    return paths
