"""Layer implementations: forward passes, exact backward passes, init.

Conventions
-----------
* Everything is float64; a single example at a time.
* Convolutional-front-end activations are shaped (channels, length);
  the LSTM consumes that layout directly and emits its final hidden
  state as a flat vector for the dense head.
* ``forward(x, train=..., rng=...)`` caches whatever the matching
  ``backward(dout)`` needs; backward must follow a forward on the same
  instance and returns the gradient w.r.t. the layer input while
  filling ``self.grads`` (same keys/shapes as ``self.params``).
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError


def _he_uniform(rng, shape, fan_in):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Layer:
    """Common surface: params/grads dicts, forward/backward, spec dict."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x, train=False, rng=None):
        raise NotImplementedError

    def backward(self, dout):
        raise NotImplementedError

    def spec(self) -> dict:
        raise NotImplementedError

    def _shape_error(self, got, expected):
        raise ContractError(f"{self!r}: expected input shape {expected}, got {got}")


class Conv1D(Layer):
    """Valid (no padding) 1-D convolution over (channels, length) input."""

    def __init__(self, in_channels, out_channels, kernel, stride=1, rng=None):
        super().__init__()
        if min(in_channels, out_channels, kernel, stride) < 1:
            raise ContractError("conv dimensions and stride must be >= 1")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        rng = rng or np.random.default_rng(0)
        fan_in = in_channels * kernel
        self.params = {
            "w": _he_uniform(rng, (out_channels, in_channels, kernel), fan_in),
            "b": np.zeros(out_channels),
        }

    def __repr__(self):
        return (
            f"Conv1D({self.in_channels}->{self.out_channels}, "
            f"k={self.kernel}, s={self.stride})"
        )

    def out_length(self, length):
        return (length - self.kernel) // self.stride + 1

    def forward(self, x, train=False, rng=None):
        if x.ndim != 2 or x.shape[0] != self.in_channels:
            self._shape_error(x.shape, f"({self.in_channels}, L)")
        length = x.shape[1]
        l_out = self.out_length(length)
        if l_out < 1:
            raise ContractError(
                f"{self!r}: input length {length} shorter than kernel {self.kernel}"
            )
        # cols[c, j, t] = x[c, t*stride + j]
        idx = np.arange(self.kernel)[:, None] + self.stride * np.arange(l_out)[None, :]
        cols = x[:, idx]
        out = (
            np.tensordot(self.params["w"], cols, axes=([1, 2], [0, 1]))
            + self.params["b"][:, None]
        )
        self._cache = (cols, x.shape)
        return out

    def backward(self, dout):
        cols, in_shape = self._cache
        w = self.params["w"]
        flat = cols.reshape(self.in_channels * self.kernel, -1)  # (C*K, T)
        self.grads = {
            "w": (dout @ flat.T).reshape(w.shape),
            "b": dout.sum(axis=1),
        }
        dcols = (w.reshape(self.out_channels, -1).T @ dout).reshape(cols.shape)
        dx = np.zeros(in_shape)
        l_out = dout.shape[1]
        for j in range(self.kernel):
            dx[:, j : j + l_out * self.stride : self.stride] += dcols[:, j, :]
        return dx

    def spec(self):
        return {
            "kind": "conv1d",
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel": self.kernel,
            "stride": self.stride,
        }


class ReLU(Layer):
    def __repr__(self):
        return "ReLU()"

    def forward(self, x, train=False, rng=None):
        self._cache = x > 0
        return np.where(self._cache, x, 0.0)

    def backward(self, dout):
        self.grads = {}
        return dout * self._cache

    def spec(self):
        return {"kind": "relu"}


class MaxPool1D(Layer):
    """Max pooling over the length axis; ties go to the earliest index."""

    def __init__(self, kernel, stride):
        super().__init__()
        if kernel < 1 or stride < 1:
            raise ContractError("pool kernel and stride must be >= 1")
        self.kernel = kernel
        self.stride = stride

    def __repr__(self):
        return f"MaxPool1D(k={self.kernel}, s={self.stride})"

    def out_length(self, length):
        return (length - self.kernel) // self.stride + 1

    def forward(self, x, train=False, rng=None):
        if x.ndim != 2:
            self._shape_error(x.shape, "(C, L)")
        l_out = self.out_length(x.shape[1])
        if l_out < 1:
            raise ContractError(
                f"{self!r}: input length {x.shape[1]} shorter than kernel"
            )
        idx = self.stride * np.arange(l_out)[:, None] + np.arange(self.kernel)[None, :]
        windows = x[:, idx]  # (C, l_out, k)
        arg = windows.argmax(axis=2)  # first max wins ties
        out = np.take_along_axis(windows, arg[:, :, None], axis=2)[:, :, 0]
        self._cache = (arg, x.shape)
        return out

    def backward(self, dout):
        arg, in_shape = self._cache
        self.grads = {}
        dx = np.zeros(in_shape)
        channels = np.arange(in_shape[0])[:, None]
        positions = self.stride * np.arange(dout.shape[1])[None, :] + arg
        np.add.at(dx, (channels, positions), dout)
        return dx

    def spec(self):
        return {"kind": "maxpool1d", "kernel": self.kernel, "stride": self.stride}


class Dropout(Layer):
    """Inverted dropout: scales by 1/(1-p) in train mode, identity in eval."""

    def __init__(self, p):
        super().__init__()
        if not (0.0 <= p < 1.0):
            raise ContractError(f"dropout probability must be in [0, 1), got {p}")
        self.p = p

    def __repr__(self):
        return f"Dropout(p={self.p})"

    def forward(self, x, train=False, rng=None):
        if not train or self.p == 0.0:
            self._cache = None
            return x
        if rng is None:
            raise ContractError("train-mode dropout needs a random generator")
        mask = (rng.random(x.shape) >= self.p) / (1.0 - self.p)
        self._cache = mask
        return x * mask

    def backward(self, dout):
        self.grads = {}
        return dout if self._cache is None else dout * self._cache

    def spec(self):
        return {"kind": "dropout", "p": self.p}


class LSTM(Layer):
    """Unidirectional LSTM over a (features, timesteps) activation map.

    Processes timesteps left to right from zero initial state and
    returns the final hidden state; gate pre-activations are packed
    [input, forget, candidate, output].  Initial weights are uniform
    +-1/sqrt(fan_in) and the forget-gate bias starts at 1.
    """

    def __init__(self, input_size, hidden_size, rng=None):
        super().__init__()
        if input_size < 1 or hidden_size < 1:
            raise ContractError("LSTM sizes must be >= 1")
        self.input_size = input_size
        self.hidden_size = hidden_size
        rng = rng or np.random.default_rng(0)
        h = hidden_size
        bound_x = 1.0 / np.sqrt(input_size)
        bound_h = 1.0 / np.sqrt(h)
        bias = np.zeros(4 * h)
        bias[h : 2 * h] = 1.0
        self.params = {
            "wx": rng.uniform(-bound_x, bound_x, size=(input_size, 4 * h)),
            "wh": rng.uniform(-bound_h, bound_h, size=(h, 4 * h)),
            "b": bias,
        }

    def __repr__(self):
        return f"LSTM({self.input_size}->{self.hidden_size})"

    def forward(self, x, train=False, rng=None):
        if x.ndim != 2 or x.shape[0] != self.input_size:
            self._shape_error(x.shape, f"({self.input_size}, T)")
        if x.shape[1] == 0:
            raise ContractError(f"{self!r}: empty input sequence")
        h_size = self.hidden_size
        wx, wh, b = self.params["wx"], self.params["wh"], self.params["b"]
        h = np.zeros(h_size)
        c = np.zeros(h_size)
        steps = []
        for t in range(x.shape[1]):
            x_t = x[:, t]
            gates = x_t @ wx + h @ wh + b
            i = _sigmoid(gates[:h_size])
            f = _sigmoid(gates[h_size : 2 * h_size])
            g = np.tanh(gates[2 * h_size : 3 * h_size])
            o = _sigmoid(gates[3 * h_size :])
            c_new = f * c + i * g
            tanh_c = np.tanh(c_new)
            steps.append((x_t, h, c, i, f, g, o, tanh_c))
            h = o * tanh_c
            c = c_new
        self._cache = (steps, x.shape)
        return h

    def backward(self, dout):
        steps, in_shape = self._cache
        h_size = self.hidden_size
        wx, wh = self.params["wx"], self.params["wh"]
        n_steps = len(steps)
        dgates_all = np.empty((n_steps, 4 * h_size))
        dx = np.zeros(in_shape)
        dh = dout.copy()
        dc = np.zeros(h_size)
        for t in range(n_steps - 1, -1, -1):
            x_t, h_prev, c_prev, i, f, g, o, tanh_c = steps[t]
            do = dh * tanh_c
            dc = dc + dh * o * (1.0 - tanh_c**2)
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dgates = dgates_all[t]
            dgates[:h_size] = di * i * (1.0 - i)
            dgates[h_size : 2 * h_size] = df * f * (1.0 - f)
            dgates[2 * h_size : 3 * h_size] = dg * (1.0 - g**2)
            dgates[3 * h_size :] = do * o * (1.0 - o)
            dx[:, t] = wx @ dgates
            dh = wh @ dgates
            dc = dc * f
        xs = np.stack([s[0] for s in steps])       # (T, in)
        hs = np.stack([s[1] for s in steps])       # (T, hidden), pre-step states
        self.grads = {
            "wx": xs.T @ dgates_all,
            "wh": hs.T @ dgates_all,
            "b": dgates_all.sum(axis=0),
        }
        return dx

    def spec(self):
        return {
            "kind": "lstm",
            "input_size": self.input_size,
            "hidden_size": self.hidden_size,
        }


class Dense(Layer):
    """Fully connected layer on a flat vector."""

    def __init__(self, in_features, out_features, rng=None):
        super().__init__()
        if in_features < 1 or out_features < 1:
            raise ContractError("dense sizes must be >= 1")
        self.in_features = in_features
        self.out_features = out_features
        rng = rng or np.random.default_rng(0)
        self.params = {
            "w": _he_uniform(rng, (in_features, out_features), in_features),
            "b": np.zeros(out_features),
        }

    def __repr__(self):
        return f"Dense({self.in_features}->{self.out_features})"

    def forward(self, x, train=False, rng=None):
        flat = np.ravel(x)
        if flat.shape[0] != self.in_features:
            self._shape_error(x.shape, f"({self.in_features},)")
        self._cache = (flat, x.shape)
        return flat @ self.params["w"] + self.params["b"]

    def backward(self, dout):
        flat, in_shape = self._cache
        self.grads = {
            "w": np.outer(flat, dout),
            "b": dout.copy(),
        }
        return (dout @ self.params["w"].T).reshape(in_shape)

    def spec(self):
        return {"kind": "dense", "in": self.in_features, "out": self.out_features}


_LAYER_KINDS = {
    "conv1d": lambda s, rng: Conv1D(
        s["in_channels"], s["out_channels"], s["kernel"], s["stride"], rng=rng
    ),
    "relu": lambda s, rng: ReLU(),
    "maxpool1d": lambda s, rng: MaxPool1D(s["kernel"], s["stride"]),
    "dropout": lambda s, rng: Dropout(s["p"]),
    "lstm": lambda s, rng: LSTM(s["input_size"], s["hidden_size"], rng=rng),
    "dense": lambda s, rng: Dense(s["in"], s["out"], rng=rng),
}


def layer_from_spec(spec: dict, rng=None) -> Layer:
    """Rebuild a layer from its ``spec()`` dict (checkpoint loading)."""
    try:
        factory = _LAYER_KINDS[spec["kind"]]
    except KeyError:
        raise ContractError(f"unknown layer kind {spec.get('kind')!r}") from None
    return factory(spec, rng)


class Network:
    """An ordered layer stack with single-example forward/backward.

    ``input_len`` optionally declares the window length the stack was
    built for; layers themselves accept any length their kernels allow,
    so consumers that require a fixed window check this attribute.
    """

    def __init__(self, layers, input_len=None):
        self.layers = list(layers)
        self.input_len = input_len

    def __repr__(self):
        return "Network[" + ", ".join(repr(l) for l in self.layers) + "]"

    def forward(self, x, train=False, rng=None):
        out = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            out = layer.forward(out, train=train, rng=rng)
        return out

    def backward(self, dout):
        """Backpropagate from the output gradient; returns the grad bundle.

        Must follow a forward pass on this instance; every gradient is
        checked shape-congruent with its parameter.
        """
        grad = dout
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        bundle = self.gradients()
        params = self.parameters()
        for key, g in bundle.items():
            if g.shape != params[key].shape:
                raise ContractError(f"gradient/parameter shape mismatch at {key}")
        return bundle

    def parameters(self) -> dict[str, np.ndarray]:
        """All trainable tensors keyed ``<layer index>.<name>``."""
        return {
            f"{i}.{name}": arr
            for i, layer in enumerate(self.layers)
            for name, arr in layer.params.items()
        }

    def gradients(self) -> dict[str, np.ndarray]:
        """Gradients from the latest backward, keyed like parameters()."""
        return {
            f"{i}.{name}": arr
            for i, layer in enumerate(self.layers)
            for name, arr in layer.grads.items()
        }

    def set_parameters(self, bundle: dict):
        for key, value in bundle.items():
            idx, _, name = key.partition(".")
            layer = self.layers[int(idx)]
            if name not in layer.params:
                raise ContractError(f"no parameter {key!r} in this network")
            if layer.params[name].shape != value.shape:
                raise ContractError(f"shape mismatch loading {key!r}")
            layer.params[name] = np.array(value, dtype=np.float64)

    def specs(self) -> list[dict]:
        return [layer.spec() for layer in self.layers]
