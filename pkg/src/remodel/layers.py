"""Context layers of the relation model.

Every layer maps the ``n x d`` word vectors of a sentence to ``n x output_dim``
context-aware vectors and back-propagates a gradient on those outputs to its
own parameters. Parameters live in a flat ``name -> array`` dict shared with
the rest of the model.
"""

from abc import ABC, abstractmethod
from typing import Any, Dict, Tuple

import numpy as np
from scipy.special import expit

Params = Dict[str, np.ndarray]

# gate blocks inside the stacked LSTM weights, in this order
LSTM_GATES = ("i", "f", "o", "c")
LSTM_DIRECTIONS = ("fwd", "bwd")


class ContextLayer(ABC):
    """Abstract base class for context layers."""

    kind: str = ""

    @property
    @abstractmethod
    def output_dim(self) -> int:
        """Size of each per-token output vector."""

    @abstractmethod
    def init_params(self, rng: np.random.Generator, scale: float) -> Params:
        """Freshly initialised parameters of this layer."""

    @abstractmethod
    def forward(self, params: Params, inputs: np.ndarray) -> Tuple[np.ndarray, Any]:
        """Compute the hidden vectors.

        Args:
            params: Model parameters (only this layer's entries are read)
            inputs: ``n x d`` word vectors, ``n >= 1``

        Returns:
            (``n x output_dim`` hidden vectors, cache for ``backward``)
        """

    @abstractmethod
    def backward(self, params: Params, cache: Any, grad_hidden: np.ndarray) -> Params:
        """Gradients of this layer's parameters given ``dLoss/dHidden``."""


class PassThroughLayer(ContextLayer):
    """No context layer: word vectors go straight to the summarization layer."""

    kind = "pass_through"

    def __init__(self, word_dim: int):
        self.word_dim = word_dim

    @property
    def output_dim(self) -> int:
        return self.word_dim

    def init_params(self, rng: np.random.Generator, scale: float) -> Params:
        return {}

    def forward(self, params: Params, inputs: np.ndarray) -> Tuple[np.ndarray, Any]:
        return inputs, None

    def backward(self, params: Params, cache: Any, grad_hidden: np.ndarray) -> Params:
        return {}


class BiLSTMLayer(ContextLayer):
    """Forward and backward LSTMs whose hidden states are concatenated.

    Per direction the gate weights are stacked as ``W`` (``4h x d``), ``U``
    (``4h x h``) and ``b`` (``4h``) in the order input, forget, output, cell.
    """

    kind = "bilstm"

    def __init__(self, word_dim: int, hidden_dim: int):
        self.word_dim = word_dim
        self.hidden_dim = hidden_dim

    @property
    def output_dim(self) -> int:
        return 2 * self.hidden_dim

    def init_params(self, rng: np.random.Generator, scale: float) -> Params:
        h, d = self.hidden_dim, self.word_dim
        params = {}
        for direction in LSTM_DIRECTIONS:
            params[f"{direction}.W"] = rng.uniform(-scale, scale, size=(4 * h, d))
            params[f"{direction}.U"] = rng.uniform(-scale, scale, size=(4 * h, h))
            bias = np.zeros(4 * h)
            bias[h:2 * h] = 1.0  # forget gate
            params[f"{direction}.b"] = bias
        return params

    def _run(self, W, U, b, inputs):
        n, h = inputs.shape[0], self.hidden_dim
        pre = inputs @ W.T + b
        gates = np.zeros((n, 4 * h))
        cells = np.zeros((n + 1, h))
        hidden = np.zeros((n + 1, h))
        for t in range(n):
            a = pre[t] + U @ hidden[t]
            gates[t, :3 * h] = expit(a[:3 * h])
            gates[t, 3 * h:] = np.tanh(a[3 * h:])
            i, f, o, g = np.split(gates[t], 4)
            cells[t + 1] = f * cells[t] + i * g
            hidden[t + 1] = o * np.tanh(cells[t + 1])
        return hidden, cells, gates

    def _backprop(self, W, U, inputs, hidden, cells, gates, grad_out):
        n, h = inputs.shape[0], self.hidden_dim
        grad_pre = np.zeros((n, 4 * h))
        dh_next = np.zeros(h)
        dc_next = np.zeros(h)
        for t in reversed(range(n)):
            i, f, o, g = np.split(gates[t], 4)
            tanh_c = np.tanh(cells[t + 1])
            dh = grad_out[t] + dh_next
            dc = dh * o * (1.0 - tanh_c ** 2) + dc_next
            grad_pre[t] = np.concatenate([
                dc * g * i * (1.0 - i),
                dc * cells[t] * f * (1.0 - f),
                dh * tanh_c * o * (1.0 - o),
                dc * i * (1.0 - g ** 2),
            ])
            dc_next = dc * f
            dh_next = U.T @ grad_pre[t]
        return grad_pre.T @ inputs, grad_pre.T @ hidden[:n], grad_pre.sum(axis=0)

    def forward(self, params: Params, inputs: np.ndarray) -> Tuple[np.ndarray, Any]:
        outputs, cache = [], {}
        for direction in LSTM_DIRECTIONS:
            seq = inputs if direction == "fwd" else inputs[::-1]
            hidden, cells, gates = self._run(
                params[f"{direction}.W"], params[f"{direction}.U"], params[f"{direction}.b"], seq
            )
            cache[direction] = (seq, hidden, cells, gates)
            out = hidden[1:]
            outputs.append(out if direction == "fwd" else out[::-1])
        return np.hstack(outputs), cache

    def backward(self, params: Params, cache: Any, grad_hidden: np.ndarray) -> Params:
        h = self.hidden_dim
        grads = {}
        for direction in LSTM_DIRECTIONS:
            seq, hidden, cells, gates = cache[direction]
            if direction == "fwd":
                grad_out = grad_hidden[:, :h]
            else:
                grad_out = grad_hidden[::-1, h:]
            dW, dU, db = self._backprop(
                params[f"{direction}.W"], params[f"{direction}.U"], seq, hidden, cells, gates,
                grad_out,
            )
            grads[f"{direction}.W"] = dW
            grads[f"{direction}.U"] = dU
            grads[f"{direction}.b"] = db
        return grads


class CNNLayer(ContextLayer):
    """``h_t = tanh(W z_t + b)`` over zero-padded windows of ``k`` word vectors."""

    kind = "cnn"

    def __init__(self, word_dim: int, hidden_dim: int, window: int = 3):
        if window < 1 or window % 2 == 0:
            raise ValueError(f"CNN window must be a positive odd number, got {window}")
        self.word_dim = word_dim
        self.hidden_dim = hidden_dim
        self.window = window

    @property
    def output_dim(self) -> int:
        return self.hidden_dim

    def init_params(self, rng: np.random.Generator, scale: float) -> Params:
        return {
            "cnn.W": rng.uniform(-scale, scale, size=(self.hidden_dim, self.window * self.word_dim)),
            "cnn.b": np.zeros(self.hidden_dim),
        }

    def windows(self, inputs: np.ndarray) -> np.ndarray:
        """``n x kd`` matrix whose row ``t`` concatenates the window centred at ``t``."""
        n = inputs.shape[0]
        half = (self.window - 1) // 2
        padded = np.vstack([np.zeros((half, self.word_dim)), inputs, np.zeros((half, self.word_dim))])
        return np.hstack([padded[j:j + n] for j in range(self.window)])

    def forward(self, params: Params, inputs: np.ndarray) -> Tuple[np.ndarray, Any]:
        z = self.windows(inputs)
        hidden = np.tanh(z @ params["cnn.W"].T + params["cnn.b"])
        return hidden, (z, hidden)

    def backward(self, params: Params, cache: Any, grad_hidden: np.ndarray) -> Params:
        z, hidden = cache
        grad_pre = grad_hidden * (1.0 - hidden ** 2)
        return {"cnn.W": grad_pre.T @ z, "cnn.b": grad_pre.sum(axis=0)}


def get_context_layer(
    kind: str, word_dim: int, hidden_dim: int = 0, window: int = 3
) -> ContextLayer:
    """Get a context layer instance.

    Args:
        kind: pass_through, bilstm or cnn
        word_dim: Word embedding dimension d
        hidden_dim: Hidden size (per direction for the Bi-LSTM)
        window: CNN window size k

    Returns:
        ContextLayer instance
    """
    kind = kind.lower()
    if kind in ("pass_through", "pass"):
        return PassThroughLayer(word_dim)
    elif kind == "bilstm":
        return BiLSTMLayer(word_dim, hidden_dim)
    elif kind == "cnn":
        return CNNLayer(word_dim, hidden_dim, window)
    else:
        raise ValueError(f"Unknown context layer: {kind}. Choose: pass_through, bilstm, or cnn")
