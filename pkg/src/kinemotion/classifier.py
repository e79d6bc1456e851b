"""Movement classifier: architecture assembly, training loop, evaluation.

The network is a four-layer convolutional front end over the raw
(3, W) acceleration epoch, with max-pool + dropout after the first and
after the fourth convolution only, followed by one unidirectional LSTM
whose final hidden state feeds a dense 4-class head through a dropout.

Vocabulary note: ``Epoch`` always means a fixed-length signal window;
a full pass over the training data is spelled out as "training epoch".
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .dataset import KEY_MOVEMENTS, augment_shift, label_index
from .errors import ConfigError, ContractError, TrainingDiverged
from .nn import (
    LSTM,
    Adam,
    Conv1D,
    Dense,
    Dropout,
    MaxPool1D,
    Network,
    ReLU,
    softmax,
    softmax_cross_entropy,
)

N_CLASSES = 4


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; widths are tunable, the shape is not.

    There are always exactly four convolution layers and two
    pool+dropout blocks (after conv 1 and conv 4); ``toy()`` gives a
    narrow variant of the same shape that fits short inputs, handy for
    gradient checking.
    """

    input_len: int = 128
    in_channels: int = 3
    conv_channels: tuple[int, ...] = (32, 64, 64, 64)
    conv_kernels: tuple[int, ...] = (8, 4, 4, 4)
    conv_strides: tuple[int, ...] = (2, 1, 1, 1)
    pool_kernels: tuple[int, int] = (4, 2)
    pool_strides: tuple[int, int] = (4, 2)
    dropout: float = 0.5
    lstm_hidden: int = 64

    def __post_init__(self):
        for name in ("conv_channels", "conv_kernels", "conv_strides"):
            if len(getattr(self, name)) != 4:
                raise ConfigError(f"{name} must list exactly four conv layers")
        if len(self.pool_kernels) != 2 or len(self.pool_strides) != 2:
            raise ConfigError("exactly two pool blocks (after conv 1 and conv 4)")
        if min(self.conv_channels + self.conv_kernels + self.conv_strides) < 1:
            raise ConfigError("conv channels, kernels and strides must be >= 1")
        if min(self.pool_kernels + self.pool_strides) < 1:
            raise ConfigError("pool kernels and strides must be >= 1")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lstm_hidden < 1 or self.input_len < 1 or self.in_channels < 1:
            raise ConfigError("sizes must be >= 1")

    @classmethod
    def toy(cls, input_len=64):
        """Same architecture at narrow width, for fast exact verification.

        Unit strides keep a short input alive through all four
        convolutions (the default strides need input_len >= 94) and
        leave the LSTM a sequence long enough that every recurrent
        weight carries a well-sized gradient.
        """
        return cls(
            input_len=input_len,
            conv_channels=(8, 8, 8, 8),
            conv_kernels=(8, 4, 4, 4),
            conv_strides=(1, 1, 1, 1),
            pool_kernels=(2, 2),
            pool_strides=(2, 2),
            lstm_hidden=8,
        )


def feature_length(cfg: ModelConfig, input_len=None) -> int:
    """Sequence length surviving the conv/pool stack (may be < 1 = invalid)."""
    length = cfg.input_len if input_len is None else input_len
    for i in range(4):
        length = (length - cfg.conv_kernels[i]) // cfg.conv_strides[i] + 1
        if i == 0:
            length = (length - cfg.pool_kernels[0]) // cfg.pool_strides[0] + 1
        if length < 1:
            return length
    return (length - cfg.pool_kernels[1]) // cfg.pool_strides[1] + 1


def min_input_length(cfg: ModelConfig) -> int:
    """Smallest input length the conv/pool stack accepts."""
    w = 1
    while feature_length(cfg, w) < 1:
        w += 1
        if w > 1 << 20:
            raise ConfigError("conv stack never yields a non-empty sequence")
    return w


def build_model(cfg: ModelConfig, seed: int) -> Network:
    """Initialize the full network; deterministic in the seed."""
    if feature_length(cfg) < 1:
        raise ConfigError(
            f"input_len {cfg.input_len} is too short for the conv stack; "
            f"minimum is {min_input_length(cfg)}"
        )
    rng = np.random.default_rng(seed)
    ch, ks, ss = cfg.conv_channels, cfg.conv_kernels, cfg.conv_strides
    layers = [
        Conv1D(cfg.in_channels, ch[0], ks[0], ss[0], rng=rng),
        ReLU(),
        MaxPool1D(cfg.pool_kernels[0], cfg.pool_strides[0]),
        Dropout(cfg.dropout),
        Conv1D(ch[0], ch[1], ks[1], ss[1], rng=rng),
        ReLU(),
        Conv1D(ch[1], ch[2], ks[2], ss[2], rng=rng),
        ReLU(),
        Conv1D(ch[2], ch[3], ks[3], ss[3], rng=rng),
        ReLU(),
        MaxPool1D(cfg.pool_kernels[1], cfg.pool_strides[1]),
        Dropout(cfg.dropout),
        LSTM(ch[3], cfg.lstm_hidden, rng=rng),
        Dropout(cfg.dropout),
        Dense(cfg.lstm_hidden, N_CLASSES, rng=rng),
    ]
    return Network(layers, input_len=cfg.input_len)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 16
    lr: float = 1e-3
    augment_max_frac: float = 0.2
    seed: int = 0
    class_weights: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if len(self.class_weights) != N_CLASSES:
            raise ConfigError(f"class_weights must have {N_CLASSES} entries")
        if min(self.class_weights) <= 0:
            raise ConfigError("class_weights must be positive")


@dataclass
class TrainLog:
    """Per-training-epoch curves plus the final test confusion matrix."""

    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    test_acc: list[float] = field(default_factory=list)
    confusion: np.ndarray = field(default_factory=lambda: np.zeros((4, 4), dtype=int))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("epoch,train_loss,train_acc,test_acc\n")
        rows = zip(self.train_loss, self.train_acc, self.test_acc)
        for e, (loss, tr, te) in enumerate(rows, start=1):
            buf.write(f"{e},{loss!r},{tr!r},{te!r}\n")
        return buf.getvalue()

    def confusion_to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("true\\pred," + ",".join(KEY_MOVEMENTS) + "\n")
        for i, label in enumerate(KEY_MOVEMENTS):
            buf.write(label + "," + ",".join(str(c) for c in self.confusion[i]) + "\n")
        return buf.getvalue()


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    confusion: np.ndarray  # rows = true class, cols = predicted


def _as_input(epoch_values):
    # stored epochs are (W, 3) rows of samples; the network wants (3, W)
    return np.ascontiguousarray(epoch_values.T)


def predict(net: Network, epoch):
    """Class probabilities and argmax label for one epoch (eval mode)."""
    if net.input_len is not None and len(epoch) != net.input_len:
        raise ContractError(
            f"epoch length {len(epoch)} does not match the model window "
            f"{net.input_len}"
        )
    scores = net.forward(_as_input(epoch.values), train=False)
    probs = softmax(scores)
    return probs, KEY_MOVEMENTS[int(np.argmax(probs))]


def evaluate(net: Network, test_set) -> EvalResult:
    """Accuracy and 4x4 confusion matrix over a labelled epoch set."""
    test_set = list(test_set)
    if not test_set:
        raise ContractError("cannot evaluate on an empty set")
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=int)
    for item in test_set:
        _, predicted = predict(net, item.epoch)
        confusion[label_index(item.label), label_index(predicted)] += 1
    return EvalResult(
        accuracy=float(np.trace(confusion)) / len(test_set), confusion=confusion
    )


def train(net: Network, train_set, test_set, cfg: TrainConfig) -> TrainLog:
    """Mini-batch Adam with fresh time-shift augmentation each training epoch.

    Every training epoch re-augments each stored example once (the
    stored data is never mutated; the augmented view is what gets
    batched), shuffles, and steps Adam on batch-averaged gradients.
    Fully deterministic given (seed, data, config).  Raises
    :class:`TrainingDiverged` on a non-finite loss.
    """
    train_set, test_set = list(train_set), list(test_set)
    if not train_set or not test_set:
        raise ContractError("train and test sets must be non-empty")
    weights = np.asarray(cfg.class_weights, dtype=np.float64)
    optimizer = Adam(lr=cfg.lr)
    params = net.parameters()
    log = TrainLog()

    for epoch_no in range(1, cfg.epochs + 1):
        rng = np.random.default_rng([cfg.seed, epoch_no])
        view = [augment_shift(ex, cfg.augment_max_frac, rng) for ex in train_set]
        order = rng.permutation(len(view))

        total_loss = 0.0
        correct = 0
        for batch_no, start in enumerate(range(0, len(order), cfg.batch_size)):
            batch = [view[i] for i in order[start : start + cfg.batch_size]]
            accum = {k: np.zeros_like(p) for k, p in params.items()}
            for example in batch:
                scores = net.forward(
                    _as_input(example.epoch.values), train=True, rng=rng
                )
                loss, dscores = softmax_cross_entropy(
                    scores, label_index(example.label), weights
                )
                if not np.isfinite(loss):
                    raise TrainingDiverged(epoch_no, batch_no)
                total_loss += loss
                correct += int(np.argmax(scores) == label_index(example.label))
                for key, g in net.backward(dscores).items():
                    accum[key] += g
            for key in accum:
                accum[key] /= len(batch)
            optimizer.step(params, accum)

        result = evaluate(net, test_set)
        log.train_loss.append(total_loss / len(view))
        log.train_acc.append(correct / len(view))
        log.test_acc.append(result.accuracy)
        log.confusion = result.confusion

    return log
