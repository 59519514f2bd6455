"""MLP backbone with a linear regression head.

The last hidden activations double as the embedding fed to the rank loss,
so both heads share every backbone parameter.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ndgrad as nd
from .ndgrad import Node

CHECKPOINT_VERSION = 1
_ACTIVATIONS = {"tanh": nd.tanh, "relu": nd.relu}


@dataclass
class MlpRegressor:
    layer_dims: list[int]
    activation: str
    weights: list[Node]
    biases: list[Node]
    head_weight: Node
    head_bias: Node

    @property
    def embedding_dim(self) -> int:
        return self.layer_dims[-1]

    def parameters(self) -> list[Node]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out + [self.head_weight, self.head_bias]

    def zero_grad(self) -> None:
        nd.zero_grad(self.parameters())

    def forward(self, inputs) -> tuple[Node, Node]:
        """Map an m x d input matrix to (predictions (m,), embeddings (m, k))."""
        x = np.asarray(inputs, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.layer_dims[0]:
            raise nd.ShapeError("model input", x.shape, (None, self.layer_dims[0]))
        act = _ACTIVATIONS[self.activation]
        h = Node(x)
        for w, b in zip(self.weights, self.biases):
            h = act(nd.add_bias(h @ w, b))
        pred = nd.reshape(h @ self.head_weight, (x.shape[0],)) + self.head_bias
        return pred, h

    __call__ = forward

    def predict(self, inputs) -> np.ndarray:
        return np.array(self.forward(inputs)[0].value)

    def state_arrays(self) -> list[np.ndarray]:
        return [p.value for p in self.parameters()]

    def save(self, path) -> None:
        meta = {"version": CHECKPOINT_VERSION, "layer_dims": self.layer_dims,
                "activation": self.activation}
        arrays = {f"p{i:03d}": a for i, a in enumerate(self.state_arrays())}
        with open(path, "wb") as fh:
            np.savez(fh, meta=np.array(json.dumps(meta)), **arrays)

    @classmethod
    def load(cls, path) -> "MlpRegressor":
        with np.load(Path(path), allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("version") != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
            arrays = [z[k] for k in sorted(k for k in z.files if k.startswith("p"))]
        model = init(meta["layer_dims"], meta["activation"], seed=0)
        params = model.parameters()
        if len(arrays) != len(params):
            raise ValueError("checkpoint parameter count mismatch")
        for p, a in zip(params, arrays):
            if p.shape != a.shape:
                raise nd.ShapeError("checkpoint", p.shape, a.shape)
            p.value = nd.as_array(a)
            p.zero_grad()
        return model


def init(layer_dims, activation: str = "tanh", seed: int = 0) -> MlpRegressor:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or min(dims) < 1:
        raise ValueError(f"invalid layer_dims {layer_dims!r}")
    if activation not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)

    def uniform(fan_in, shape):
        bound = 1.0 / np.sqrt(fan_in)
        return nd.param(rng.uniform(-bound, bound, size=shape))

    weights = [uniform(a, (a, b)) for a, b in zip(dims[:-1], dims[1:])]
    biases = [nd.param(np.zeros(b)) for b in dims[1:]]
    return MlpRegressor(
        layer_dims=dims,
        activation=activation,
        weights=weights,
        biases=biases,
        head_weight=uniform(dims[-1], (dims[-1], 1)),
        head_bias=nd.param(0.0),
    )
