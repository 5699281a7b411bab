"""Training-data generation and least-squares network fitting."""

import csv
import json
import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .control import QuadraticValue, value_controller_step
from .errors import TrainingDiverged
from .geometry import barycentric_coords, chebyshev_center, contains, enumerate_vertices, sample_uniform
from .network import Mlp, init_mlp, param_jacobian, predict

logger = logging.getLogger(__name__)

TRAIN_METHODS = ("lm", "gd")


@dataclass
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    meta: dict = field(default_factory=dict)
    controls: np.ndarray = None  # inputs behind the targets, when known

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.asarray(self.targets, dtype=float)
        if self.targets.ndim == 1:
            self.targets = self.targets[:, None]
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets differ in length")
        if not np.all(np.isfinite(self.targets)):
            raise ValueError("targets must be finite")

    @property
    def count(self):
        return self.inputs.shape[0]

    def to_csv(self, path):
        nx, nt = self.inputs.shape[1], self.targets.shape[1]
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow([f"x{i + 1}" for i in range(nx)] + [f"t{i + 1}" for i in range(nt)])
            for x, t in zip(self.inputs, self.targets):
                w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in t])
        with open(str(path) + ".json", "w") as f:
            json.dump(self.meta, f, indent=1, sort_keys=True)

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        nx = sum(1 for h in rows[0] if h.startswith("x"))
        data = np.array([[float(v) for v in row] for row in rows[1:]])
        meta = {}
        try:
            with open(str(path) + ".json") as f:
                meta = json.load(f)
        except FileNotFoundError:
            pass
        return cls(data[:, :nx], data[:, nx:], meta)


@dataclass
class TrainConfig:
    """Regression settings.

    ``method`` is ``"lm"`` (Levenberg-Marquardt, full batch) or ``"gd"``
    (fixed-step full-batch gradient descent with step ``step``). Training
    stops after ``max_epochs``, at ``target_mse`` on the training split, or
    after ``patience`` epochs without validation improvement.
    """

    method: str = "lm"
    max_epochs: int = 200
    target_mse: float = 1e-8
    validation_fraction: float = 0.2
    seed: int = 0
    step: float = 1e-2
    mu: float = 1e-3
    mu_max: float = 1e10
    patience: int = 20

    def __post_init__(self):
        if self.method not in TRAIN_METHODS:
            raise ValueError(f"method must be one of {TRAIN_METHODS}")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in [0, 1)")
        if self.target_mse <= 0:
            raise ValueError("target_mse must be positive")


def _input_scaler(X):
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = hi - lo
    scale = np.where(span > 0, 2.0 / np.where(span > 0, span, 1.0), 1.0)
    offset = np.where(span > 0, -1.0 - lo * scale, -lo)
    return scale, offset


def _mse(net, X, Y):
    if len(X) == 0:
        return float("nan")
    return float(np.mean((predict(net, X) - Y) ** 2))


def fit_regression(sizes, output, data, cfg=None, net=None):
    """Least-squares fit of an MLP to ``data``.

    Returns ``(net, train_mse, val_mse)``. For linear heads the targets are
    standardized during training and the scaling is folded back into the
    output layer, so the returned network predicts raw targets.
    """
    cfg = cfg or TrainConfig()
    if data.count < 10:
        raise ValueError("need at least 10 training pairs")
    sizes = list(sizes)
    if sizes[0] != data.inputs.shape[1] or sizes[-1] != data.targets.shape[1]:
        raise ValueError("architecture does not match the data dimensions")
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(data.count)
    n_val = int(round(cfg.validation_fraction * data.count))
    val_idx, tr_idx = np.sort(perm[:n_val]), np.sort(perm[n_val:])
    Xtr, Ytr = data.inputs[tr_idx], data.targets[tr_idx]
    Xval, Yval = data.inputs[val_idx], data.targets[val_idx]

    if net is None:
        net = init_mlp(sizes, output, rng)
    scale, offset = _input_scaler(Xtr)
    net = Mlp(net.weights, net.biases, net.hidden, output, scale, offset)

    if output == "linear":
        mean = Ytr.mean(axis=0)
        std = Ytr.std(axis=0)
        std = np.where(std > 0, std, 1.0)
    else:
        mean, std = np.zeros(sizes[-1]), np.ones(sizes[-1])
    Ttr = (Ytr - mean) / std
    Tval = (Yval - mean) / std
    target_norm = cfg.target_mse / float(np.mean(std**2))

    trainer = _train_lm if cfg.method == "lm" else _train_gd
    net = trainer(net, Xtr, Ttr, Xval, Tval, cfg, target_norm)

    if output == "linear":
        W = [w.copy() for w in net.weights]
        b = [v.copy() for v in net.biases]
        W[-1] = std[:, None] * W[-1]
        b[-1] = std * b[-1] + mean
        net = Mlp(W, b, net.hidden, net.output, net.scale, net.offset)
    train_mse = _mse(net, Xtr, Ytr)
    val_mse = _mse(net, Xval, Yval)
    if not train_mse <= cfg.target_mse:
        warnings.warn(f"target MSE {cfg.target_mse:.3g} not reached (train MSE {train_mse:.3g})", stacklevel=2)
    return net, train_mse, val_mse


class _BestTracker:
    def __init__(self, net, Xval, Tval, patience):
        self.Xval, self.Tval, self.patience = Xval, Tval, patience
        self.best_net = net
        self.best = _mse(net, Xval, Tval) if len(Xval) else np.inf
        self.stale = 0

    def update(self, net):
        """Record ``net``; True when training should stop early."""
        if not len(self.Xval):
            self.best_net = net
            return False
        v = _mse(net, self.Xval, self.Tval)
        if v < self.best:
            self.best, self.best_net, self.stale = v, net, 0
        else:
            self.stale += 1
        return self.patience is not None and self.stale >= self.patience


def _train_lm(net, X, T, Xval, Tval, cfg, target):
    theta = net.get_flat()
    mu = cfg.mu
    Y, J = param_jacobian(net, X)
    e = (Y - T).ravel()
    sse = float(e @ e)
    tracker = _BestTracker(net, Xval, Tval, cfg.patience)
    n_res = e.size
    for epoch in range(cfg.max_epochs):
        if sse / n_res <= target:
            break
        Jm = J.reshape(n_res, -1)
        JtJ = Jm.T @ Jm
        g = Jm.T @ e
        accepted = False
        while mu <= cfg.mu_max:
            step = np.linalg.solve(JtJ + mu * np.eye(JtJ.shape[0]), -g)
            trial = net.with_flat(theta + step)
            Yt = predict(trial, X)
            et = (Yt - T).ravel()
            sse_t = float(et @ et)
            if not np.isfinite(sse_t):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}", epoch)
            if sse_t < sse:
                accepted = True
                break
            mu *= 10.0
        if not accepted:
            logger.debug("LM stopped at epoch %d: damping limit reached", epoch)
            break
        mu = max(mu / 10.0, 1e-20)
        theta, net, sse, e = theta + step, trial, sse_t, et
        Y, J = param_jacobian(net, X)
        if tracker.update(net):
            break
    tracker.update(net)
    return tracker.best_net


def _train_gd(net, X, T, Xval, Tval, cfg, target, history=None):
    theta = net.get_flat()
    tracker = _BestTracker(net, Xval, Tval, cfg.patience)
    n_res = T.size
    for epoch in range(cfg.max_epochs):
        Y, J = param_jacobian(net, X)
        e = (Y - T).ravel()
        loss = float(e @ e) / n_res
        if not np.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}", epoch)
        if history is not None:
            history.append(loss)
        if loss <= target:
            break
        grad = 2.0 * J.reshape(n_res, -1).T @ e / n_res
        theta = theta - cfg.step * grad
        net = net.with_flat(theta)
        if tracker.update(net):
            break
    tracker.update(net)
    return tracker.best_net


def _map(fn, items, jobs):
    if jobs is None or jobs <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def stage_samples(P, q, rng):
    """``q`` uniform samples of a stage set; degenerate sets use vertices and edge midpoints."""
    _, radius = chebyshev_center(P)
    if radius > 1e-9:
        return sample_uniform(P, q, rng)
    V = enumerate_vertices(P).vertices
    pts = [V] + [0.5 * (V[i] + V[(i + 1) % len(V)])[None] for i in range(len(V))] if len(V) > 1 else [V]
    return np.vstack(pts)


def generate_value_dataset(k, next_value, sets, system, cost, cfg, q, rng, jobs=1):
    """State-cost pairs for stage ``k``.

    ``next_value`` is the stage-(k+1) approximator (an :class:`Mlp`) or
    ``None`` for the exact terminal cost. Each target is the cost of the
    Frank-Wolfe input plus the next-stage value at the resulting state.
    """
    if q < 10:
        raise ValueError("q must be at least 10")
    if next_value is None:
        next_value = QuadraticValue(cost.terminal_Q)
    X_k, X_next = sets.sets[k], sets.sets[k + 1]
    states = stage_samples(X_k, q, rng)

    def solve(x):
        res = value_controller_step(x, next_value, cost, system, X_next, sets.U, cfg)
        u = res.u
        x_next = system.A @ x + system.B @ u
        if isinstance(next_value, Mlp):
            tail = float(predict(next_value, x_next[None])[0, 0])
        else:
            tail = next_value(x_next)
        return u, cost.stage(x, u) + tail

    out = _map(solve, states, jobs)
    inputs_u = np.array([o[0] for o in out])
    beta = np.array([o[1] for o in out])
    meta = {"stage": k, "q": int(len(states)), "fw": asdict(cfg), "kind": "value"}
    return Dataset(states, beta, meta, inputs_u)


@dataclass
class StageReport:
    stage: int
    train_mse: float
    val_mse: float
    wall_time: float


def sequential_dp_train(sets, system, cost, fw_cfg, train_cfg, q=1000, hidden=(50,), jobs=1, seed=None):
    """Backward-in-time value fitting.

    Returns ``(nets, reports)`` where ``nets[i]`` approximates the cost-to-go
    of stage ``i + 1`` (stages 1 .. N-1).
    """
    N = sets.N
    if N < 2:
        raise ValueError("sequential DP needs N >= 2")
    seed = train_cfg.seed if seed is None else seed
    nx = system.nx
    nets = {}
    reports = []
    next_value = None
    for k in range(N - 1, 0, -1):
        t0 = time.perf_counter()
        rng = np.random.default_rng([seed, k])
        ds = generate_value_dataset(k, next_value, sets, system, cost, fw_cfg, q, rng, jobs)
        stage_cfg = TrainConfig(**{**asdict(train_cfg), "seed": seed + k})
        net, tr, va = fit_regression([nx, *hidden, 1], "linear", ds, stage_cfg)
        nets[k] = net
        next_value = net
        reports.append(StageReport(k, tr, va, time.perf_counter() - t0))
        logger.info("stage %d: train mse %.4g, val mse %.4g", k, tr, va)
    return [nets[k] for k in range(1, N)], reports[::-1]


def generate_policy_dataset(controller, V, q, sets, rng, jobs=1, coords=None):
    """State-weight pairs ``(x, lambda)`` from value-controller inputs on X_0.

    ``coords`` selects the barycentric method; by default planar input sets
    use Wachspress coordinates and everything else Frank-Wolfe.
    """
    if coords is None:
        coords = "wachspress" if V.n == 2 and V.n_v >= 3 else "frank_wolfe"
    if q < 10:
        raise ValueError("q must be at least 10")
    states = stage_samples(sets.sets[0], q, rng)

    def solve(x):
        u = controller.step(x)
        return u, barycentric_coords(V, u, method=coords)

    out = _map(solve, states, jobs)
    U = np.array([o[0] for o in out])
    lam = np.array([o[1] for o in out])
    return Dataset(states, lam, {"q": int(len(states)), "kind": "policy", "coords": coords}, U)


def in_stage_set(sets, k, X, tol=1e-12):
    return all(contains(sets.sets[k], x, tol) for x in X)
