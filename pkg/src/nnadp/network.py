"""Chain-structured feed-forward networks with tanh hidden layers.

Parameters are flattened as all weight entries (layer by layer, each matrix
row-major) followed by all bias entries (layer by layer). The flattened vector
is what the trainers in :mod:`nnadp.pipeline` optimize.
"""

import json
from dataclasses import dataclass, field

import numpy as np

HIDDEN_ACTIVATIONS = ("tanh",)
OUTPUT_UNITS = ("linear", "softmax")


@dataclass
class Mlp:
    weights: list
    biases: list
    hidden: str = "tanh"
    output: str = "linear"
    scale: np.ndarray = None
    offset: np.ndarray = None

    def __post_init__(self):
        self.weights = [np.asarray(W, dtype=float) for W in self.weights]
        self.biases = [np.asarray(b, dtype=float).reshape(-1) for b in self.biases]
        if len(self.weights) != len(self.biases) or len(self.weights) < 1:
            raise ValueError("need one bias vector per weight matrix")
        if self.hidden not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"hidden activation must be one of {HIDDEN_ACTIVATIONS}")
        if self.output not in OUTPUT_UNITS:
            raise ValueError(f"output unit must be one of {OUTPUT_UNITS}")
        prev = self.weights[0].shape[1]
        for W, b in zip(self.weights, self.biases):
            if W.ndim != 2 or W.shape[1] != prev or b.size != W.shape[0]:
                raise ValueError("layer dimensions do not chain")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError("weights must be finite")
            prev = W.shape[0]
        n_in = self.weights[0].shape[1]
        self.scale = np.ones(n_in) if self.scale is None else np.asarray(self.scale, dtype=float)
        self.offset = np.zeros(n_in) if self.offset is None else np.asarray(self.offset, dtype=float)

    @property
    def n_in(self):
        return self.weights[0].shape[1]

    @property
    def n_out(self):
        return self.weights[-1].shape[0]

    @property
    def n_layers(self):
        return len(self.weights)

    @property
    def sizes(self):
        return [self.n_in] + [W.shape[0] for W in self.weights]

    @property
    def n_params(self):
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def get_flat(self):
        return np.concatenate([W.ravel() for W in self.weights] + list(self.biases))

    def with_flat(self, theta):
        """Copy of this network with parameters taken from ``theta``."""
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {theta.size}")
        weights, biases = [], []
        pos = 0
        for W in self.weights:
            weights.append(theta[pos:pos + W.size].reshape(W.shape))
            pos += W.size
        for b in self.biases:
            biases.append(theta[pos:pos + b.size].copy())
            pos += b.size
        return Mlp(weights, biases, self.hidden, self.output, self.scale.copy(), self.offset.copy())

    def to_dict(self):
        return {
            "layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in zip(self.weights, self.biases)],
            "hidden": self.hidden,
            "output": self.output,
            "scaler": {"scale": self.scale.tolist(), "offset": self.offset.tolist()},
        }

    @classmethod
    def from_dict(cls, data):
        layers = data["layers"]
        scaler = data.get("scaler", {})
        return cls(
            [layer["W"] for layer in layers],
            [layer["b"] for layer in layers],
            data.get("hidden", "tanh"),
            data.get("output", "linear"),
            scaler.get("scale"),
            scaler.get("offset"),
        )

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass
class ForwardTrace:
    pre: list = field(default_factory=list)   # pre-activations, index 0 unused
    post: list = field(default_factory=list)  # post[0] is the scaled input


def init_mlp(sizes, output="linear", rng=None):
    """Glorot-uniform weights, zero biases, identity input scaler.

    ``sizes`` lists the input width, every hidden width and the output width.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 3:
        raise ValueError("need at least one hidden layer")
    if min(sizes) < 1:
        raise ValueError("layer sizes must be positive")
    rng = np.random.default_rng(rng)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(weights, biases, "tanh", output)


def softmax(z, axis=-1):
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def forward(net, x):
    """Evaluate ``net`` at a single input; returns ``(y, trace)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != net.n_in:
        raise ValueError(f"input has dimension {x.size}, network expects {net.n_in}")
    eta = net.scale * x + net.offset
    trace = ForwardTrace([None], [eta])
    last = net.n_layers - 1
    for ell, (W, b) in enumerate(zip(net.weights, net.biases)):
        psi = W @ eta + b
        trace.pre.append(psi)
        if ell < last:
            eta = np.tanh(psi)
        elif net.output == "softmax":
            eta = softmax(psi)
        else:
            eta = psi
        trace.post.append(eta)
    if not np.all(np.isfinite(eta)):
        raise FloatingPointError("network produced a non-finite output")
    return eta, trace


def predict(net, X):
    """Batched forward pass over the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != net.n_in:
        raise ValueError(f"input has dimension {X.shape[1]}, network expects {net.n_in}")
    eta = X * net.scale + net.offset
    last = net.n_layers - 1
    for ell, (W, b) in enumerate(zip(net.weights, net.biases)):
        psi = eta @ W.T + b
        if ell < last:
            eta = np.tanh(psi)
        elif net.output == "softmax":
            eta = softmax(psi, axis=1)
        else:
            eta = psi
    return eta


def input_jacobian(net, x):
    """Closed-form ``dh/dx`` of a linear-output network (``n_out x n_in``).

    Back to front: ``W_L diag(1 - tanh^2(psi_{L-1})) W_{L-1} ... diag(scale)``.
    """
    if net.output != "linear":
        raise ValueError("input Jacobian is only defined here for linear output units")
    _, trace = forward(net, x)
    J = net.weights[-1]
    for ell in range(net.n_layers - 1, 0, -1):
        dphi = 1.0 - trace.post[ell] ** 2
        J = (J * dphi) @ net.weights[ell - 1]
    return J * net.scale


def scalar_gradient(net, x):
    if net.n_out != 1:
        raise ValueError("scalar_gradient requires a single-output network")
    return input_jacobian(net, x)[0]


def value_and_gradient(net, x):
    """Output and input gradient of a scalar linear-output net in one pass."""
    if net.n_out != 1 or net.output != "linear":
        raise ValueError("value_and_gradient requires a scalar linear-output network")
    y, trace = forward(net, x)
    J = net.weights[-1]
    for ell in range(net.n_layers - 1, 0, -1):
        J = (J * (1.0 - trace.post[ell] ** 2)) @ net.weights[ell - 1]
    return float(y[0]), (J * net.scale)[0]


def param_jacobian(net, X):
    """Per-sample Jacobian of the outputs w.r.t. the flattened parameters.

    Returns ``(Y, J)`` with ``Y`` of shape ``(q, n_out)`` and ``J`` of shape
    ``(q, n_out, n_params)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    q = X.shape[0]
    etas = [X * net.scale + net.offset]
    last = net.n_layers - 1
    for ell, (W, b) in enumerate(zip(net.weights, net.biases)):
        psi = etas[-1] @ W.T + b
        if ell < last:
            etas.append(np.tanh(psi))
        elif net.output == "softmax":
            etas.append(softmax(psi, axis=1))
        else:
            etas.append(psi)
    Y = etas[-1]
    m = net.n_out
    if net.output == "softmax":
        # d p_o / d psi_i = p_o (delta_oi - p_i)
        delta = Y[:, :, None] * (np.eye(m)[None] - Y[:, None, :])
    else:
        delta = np.broadcast_to(np.eye(m), (q, m, m))
    dW = [None] * net.n_layers
    db = [None] * net.n_layers
    for ell in range(last, -1, -1):
        dW[ell] = np.einsum("qoi,qj->qoij", delta, etas[ell]).reshape(q, m, -1)
        db[ell] = delta
        if ell > 0:
            delta = (delta @ net.weights[ell]) * (1.0 - etas[ell] ** 2)[:, None, :]
    return Y, np.concatenate(dW + db, axis=2)


def param_gradient(net, x, upstream):
    """Gradient of ``upstream @ h(x)`` w.r.t. the flattened parameters."""
    upstream = np.asarray(upstream, dtype=float).reshape(-1)
    if upstream.size != net.n_out:
        raise ValueError(f"upstream has length {upstream.size}, network has {net.n_out} outputs")
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != net.n_in:
        raise ValueError(f"input has dimension {x.size}, network expects {net.n_in}")
    _, J = param_jacobian(net, x[None])
    return upstream @ J[0]
