"""Experiment configuration: a single JSON document validated on load."""

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .control import LinearSystem, StageCost
from .errors import ConfigError, EmptyPolytope
from .geometry import HPolytope
from .pipeline import TrainConfig
from .solvers import FwConfig

BENCHMARK = {
    "system": {
        "A": [[1.5, 0.0], [1.0, -1.5]],
        "B": [[1.0, 0.0], [0.0, 1.0]],
    },
    "constraints": {
        "X": {"H": [[1, 0], [0, 1], [-1, 0], [0, -1]], "h": [10, 10, 10, 10]},
        "U": {
            "H": [[1, 0], [0, 1], [-1, 0], [0, -1], [1, 1], [-1, 1], [-1, -1], [1, -1]],
            "h": [5, 5, 5, 5, 7, 7, 7, 7],
        },
        "X_N": {"H": [[1, 0], [0, 1], [-1, 0], [0, -1]], "h": [0, 0, 0, 0]},
    },
    "horizon": 6,
    "costs": {
        "Q": [[1, 0], [0, 1]],
        "R": [[1, 0], [0, 1]],
        "terminal_Q": [[0, 0], [0, 0]],
    },
    "fw": {"max_iters": 10, "step_rule": "auto", "gap_tol": 1e-8},
    "training": {
        "method": "lm",
        "q_per_stage": 1000,
        "q_policy": 1000,
        "hidden": [50],
        "seed": 0,
        "validation_fraction": 0.2,
        "target_mse": 1e-8,
        "max_epochs": 200,
    },
    "simulation": {
        "T": 12,
        "initial_states": [[6.75, 9.0], [-8.6, -7.1]],
        "suboptimality_threshold": 0.10,
    },
    "output_dir": "out",
}

_TRAIN_KEYS = {"method", "seed", "validation_fraction", "target_mse", "max_epochs", "patience", "step", "mu"}


def default_config():
    return copy.deepcopy(BENCHMARK)


@dataclass
class ExperimentConfig:
    system: LinearSystem
    X: HPolytope
    U: HPolytope
    X_N: HPolytope
    N: int
    cost: StageCost
    fw: FwConfig
    train: TrainConfig
    q_per_stage: int
    q_policy: int
    hidden: tuple
    T: int
    initial_states: list
    suboptimality_threshold: float
    output_dir: str
    raw: dict = field(default_factory=dict, repr=False)


def _line_of(text, path):
    """Best-effort line number of the key at the end of ``path``."""
    if not text:
        return None
    pos = 0
    for key in path:
        if isinstance(key, int):
            continue
        found = text.find(f'"{key}"', pos)
        if found < 0:
            return None
        pos = found
    return text.count("\n", 0, pos) + 1


class _Validator:
    def __init__(self, data, text):
        self.data, self.text = data, text

    def fail(self, path, msg):
        where = ".".join(str(p) for p in path)
        line = _line_of(self.text, path)
        loc = f" (line {line})" if line else ""
        raise ConfigError(f"{where}{loc}: {msg}")

    def get(self, path, default=None, required=True):
        node = self.data
        for key in path:
            if isinstance(node, list) and isinstance(key, int) and 0 <= key < len(node):
                node = node[key]
                continue
            if not isinstance(node, dict) or key not in node:
                if required:
                    self.fail(path, "missing")
                return default
            node = node[key]
        return node

    def matrix(self, path, shape=None):
        value = self.get(path)
        try:
            M = np.array(value, dtype=float)
        except (TypeError, ValueError):
            self.fail(path, "must be a numeric matrix")
        if M.ndim != 2:
            self.fail(path, "must be a 2-D list of numbers")
        if not np.all(np.isfinite(M)):
            self.fail(path, "entries must be finite")
        if shape is not None:
            for got, want in zip(M.shape, shape):
                if want is not None and got != want:
                    self.fail(path, f"has shape {M.shape}, expected {tuple(shape)}")
        return M

    def vector(self, path, size=None):
        value = self.get(path)
        try:
            v = np.array(value, dtype=float)
        except (TypeError, ValueError):
            self.fail(path, "must be a list of numbers")
        if v.ndim != 1:
            self.fail(path, "must be a flat list of numbers")
        if size is not None and v.size != size:
            self.fail(path, f"has length {v.size}, expected {size}")
        return v

    def polytope(self, path, n):
        H = self.matrix(path + ["H"], (None, n))
        h = self.vector(path + ["h"], H.shape[0])
        try:
            return HPolytope(H, h)
        except (ValueError, EmptyPolytope) as exc:
            self.fail(path, str(exc))

    def integer(self, path, minimum, default=None):
        value = self.get(path, default, required=default is None)
        if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
            self.fail(path, f"must be an integer >= {minimum}")
        return value


def parse_config(data, text=None):
    """Validate a config dictionary and build the typed objects."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    v = _Validator(data, text)
    A = v.matrix(["system", "A"])
    nx = A.shape[0]
    if A.shape != (nx, nx):
        v.fail(["system", "A"], f"must be square, got {A.shape}")
    B = v.matrix(["system", "B"], (nx, None))
    nu = B.shape[1]
    X = v.polytope(["constraints", "X"], nx)
    U = v.polytope(["constraints", "U"], nu)
    X_N = v.polytope(["constraints", "X_N"], nx)
    N = v.integer(["horizon"], 1)
    Q = v.matrix(["costs", "Q"], (nx, nx))
    R = v.matrix(["costs", "R"], (nu, nu))
    tq = data.get("costs", {}).get("terminal_Q")
    QN = v.matrix(["costs", "terminal_Q"], (nx, nx)) if tq is not None else np.zeros((nx, nx))
    try:
        cost = StageCost(Q, R, QN)
    except ValueError as exc:
        v.fail(["costs"], str(exc))

    fw_raw = v.get(["fw"], {}, required=False)
    try:
        fw = FwConfig(**{k: fw_raw[k] for k in ("max_iters", "step_rule", "gap_tol") if k in fw_raw})
    except (TypeError, ValueError) as exc:
        v.fail(["fw"], str(exc))

    tr_raw = v.get(["training"], {}, required=False)
    unknown = set(tr_raw) - _TRAIN_KEYS - {"q_per_stage", "q_policy", "hidden"}
    if unknown:
        v.fail(["training", sorted(unknown)[0]], "unknown key")
    try:
        train = TrainConfig(**{k: tr_raw[k] for k in _TRAIN_KEYS if k in tr_raw})
    except (TypeError, ValueError) as exc:
        v.fail(["training"], str(exc))
    q_stage = v.integer(["training", "q_per_stage"], 10, 1000)
    q_policy = v.integer(["training", "q_policy"], 10, 1000)
    hidden = tr_raw.get("hidden", [50])
    if not isinstance(hidden, list) or not hidden or not all(isinstance(s, int) and s >= 1 for s in hidden):
        v.fail(["training", "hidden"], "must be a nonempty list of positive integers")

    T = v.integer(["simulation", "T"], 1, 12)
    states = v.get(["simulation", "initial_states"], [], required=False)
    x0s = []
    for i, _ in enumerate(states):
        x0s.append(v.vector(["simulation", "initial_states", i], nx))
    thr = v.get(["simulation", "suboptimality_threshold"], 0.10, required=False)
    if not isinstance(thr, (int, float)) or thr < 0:
        v.fail(["simulation", "suboptimality_threshold"], "must be a nonnegative number")

    return ExperimentConfig(
        system=LinearSystem(A, B), X=X, U=U, X_N=X_N, N=N, cost=cost, fw=fw, train=train,
        q_per_stage=q_stage, q_policy=q_policy, hidden=tuple(hidden), T=T, initial_states=x0s,
        suboptimality_threshold=float(thr), output_dir=str(data.get("output_dir", "out")), raw=data,
    )


def load_config(path=None):
    """Load and validate a config file; ``None`` gives the shipped benchmark."""
    if path is None:
        return parse_config(default_config())
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_config(data, text)
