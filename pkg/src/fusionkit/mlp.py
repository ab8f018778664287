"""Learned fusion: a one-hidden-layer MLP over concatenated classifier outputs.

The N per-classifier distributions of a frame are concatenated into a 10N
input vector; the network (rectified-linear hidden layer, softmax output)
is trained by mini-batch gradient descent on mean NLL plus a squared-weight
regularizer (biases excluded), with a linearly decaying learning rate.
"""

import math
from dataclasses import dataclass

import numpy as np

from fusionkit.ensemble import NUM_CLASSES, stack_outputs
from fusionkit.errors import SchemaError


@dataclass
class TrainSchedule:
    initial_lr: float = 1e-2
    final_lr: float = 1e-4
    epochs: int = 30
    batch_size: int = 50

    def __post_init__(self):
        if not self.initial_lr > self.final_lr > 0:
            raise ValueError("need initial_lr > final_lr > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")

    def learning_rate(self, epoch):
        step = (self.initial_lr - self.final_lr) / self.epochs
        return self.initial_lr - epoch * step


@dataclass
class MLPFuser:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    reg_lambda: float
    classifier_names: tuple | None = None

    @property
    def input_dim(self):
        return self.w1.shape[1]

    @property
    def hidden(self):
        return self.w1.shape[0]


def _check_inputs(fuser, inputs):
    inputs = np.asarray(inputs, dtype=np.float64)
    squeeze = inputs.ndim == 1
    if squeeze:
        inputs = inputs[None, :]
    if inputs.ndim != 2 or inputs.shape[1] != fuser.input_dim:
        raise ValueError(
            f"input length {inputs.shape[-1]} does not match model input "
            f"dimension {fuser.input_dim}"
        )
    return inputs, squeeze


def _log_softmax(z):
    m = z.max(axis=1, keepdims=True)
    shifted = z - m
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def forward(fuser, inputs):
    """Class distribution(s) for one (10N,) vector or an (n, 10N) batch."""
    inputs, squeeze = _check_inputs(fuser, inputs)
    hidden = np.maximum(0.0, inputs @ fuser.w1.T + fuser.b1)
    logits = hidden @ fuser.w2.T + fuser.b2
    probs = np.exp(_log_softmax(logits))
    return probs[0] if squeeze else probs


def loss(fuser, inputs, truths):
    """Mean NLL plus ``reg_lambda`` times the squared weight magnitudes."""
    inputs, _ = _check_inputs(fuser, inputs)
    truths = np.asarray(truths)
    hidden = np.maximum(0.0, inputs @ fuser.w1.T + fuser.b1)
    logits = hidden @ fuser.w2.T + fuser.b2
    logp = _log_softmax(logits)
    data_term = -logp[np.arange(truths.shape[0]), truths].mean()
    reg = np.sum(fuser.w1 ** 2) + np.sum(fuser.w2 ** 2)
    return float(data_term + fuser.reg_lambda * reg)


def gradient(fuser, inputs, truths):
    """Exact gradients of :func:`loss` over the batch, keyed by parameter."""
    inputs, _ = _check_inputs(fuser, inputs)
    truths = np.asarray(truths)
    n = inputs.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    z1 = inputs @ fuser.w1.T + fuser.b1
    hidden = np.maximum(0.0, z1)
    logits = hidden @ fuser.w2.T + fuser.b2
    probs = np.exp(_log_softmax(logits))

    d_logits = probs.copy()
    d_logits[np.arange(n), truths] -= 1.0
    d_logits /= n
    d_w2 = d_logits.T @ hidden + 2.0 * fuser.reg_lambda * fuser.w2
    d_b2 = d_logits.sum(axis=0)
    d_hidden = (d_logits @ fuser.w2) * (z1 > 0.0)
    d_w1 = d_hidden.T @ inputs + 2.0 * fuser.reg_lambda * fuser.w1
    d_b1 = d_hidden.sum(axis=0)
    return {"w1": d_w1, "b1": d_b1, "w2": d_w2, "b2": d_b2}


def records_to_inputs(records):
    """Concatenate each record's classifier distributions into (n, 10N)."""
    outputs, truths, names = stack_outputs(records)
    return outputs.reshape(outputs.shape[0], -1), truths, names


INIT_SCALE = 0.05


def train(records, schedule=None, seed=0, reg_lambda=1e-3, hidden=32):
    """Train a fuser on prediction records by mini-batch gradient descent.

    Parameters are initialized uniformly in [-0.05, 0.05]; batches are
    reshuffled each epoch and the learning rate decays linearly from
    ``initial_lr`` by ``(initial_lr - final_lr)/epochs`` per epoch.
    Deterministic for a fixed seed.
    """
    schedule = schedule or TrainSchedule()
    inputs, truths, names = records_to_inputs(records)
    n, dim = inputs.shape
    rng = np.random.default_rng(seed)
    fuser = MLPFuser(
        w1=rng.uniform(-INIT_SCALE, INIT_SCALE, (hidden, dim)),
        b1=rng.uniform(-INIT_SCALE, INIT_SCALE, hidden),
        w2=rng.uniform(-INIT_SCALE, INIT_SCALE, (NUM_CLASSES, hidden)),
        b2=rng.uniform(-INIT_SCALE, INIT_SCALE, NUM_CLASSES),
        reg_lambda=reg_lambda,
        classifier_names=names,
    )
    for epoch in range(schedule.epochs):
        lr = schedule.learning_rate(epoch)
        perm = rng.permutation(n)
        for start in range(0, n, schedule.batch_size):
            batch = perm[start : start + schedule.batch_size]
            grads = gradient(fuser, inputs[batch], truths[batch])
            fuser.w1 -= lr * grads["w1"]
            fuser.b1 -= lr * grads["b1"]
            fuser.w2 -= lr * grads["w2"]
            fuser.b2 -= lr * grads["b2"]
    return fuser


def predict(fuser, records):
    """Fused distributions for a record list, validating classifier order."""
    inputs, _, names = records_to_inputs(records)
    if fuser.classifier_names is not None and names != tuple(fuser.classifier_names):
        raise ValueError(
            f"log classifiers {names} do not match model {fuser.classifier_names}"
        )
    return forward(fuser, inputs)


MODEL_MAGIC = "fusionkit-mlp v1"


def save_mlp(fuser, path):
    lines = [
        MODEL_MAGIC,
        "classifiers " + " ".join(fuser.classifier_names or ()),
        f"input_dim {fuser.input_dim}",
        f"hidden {fuser.hidden}",
        f"reg_lambda {fuser.reg_lambda!r}",
    ]
    for name in ("w1", "b1", "w2", "b2"):
        arr = getattr(fuser, name)
        lines.append(f"{name} " + " ".join(repr(float(v)) for v in arr.ravel()))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_mlp(path):
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    if not lines or lines[0] != MODEL_MAGIC:
        raise SchemaError(f"not an MLP model file: {path}")
    fields = {}
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        fields[key] = rest
    try:
        names = tuple(fields["classifiers"].split()) or None
        dim = int(fields["input_dim"])
        hidden = int(fields["hidden"])
        reg_lambda = float(fields["reg_lambda"])
        shapes = {
            "w1": (hidden, dim),
            "b1": (hidden,),
            "w2": (NUM_CLASSES, hidden),
            "b2": (NUM_CLASSES,),
        }
        arrays = {}
        for name, shape in shapes.items():
            values = np.array([float(v) for v in fields[name].split()])
            if values.size != math.prod(shape):
                raise SchemaError(f"field {name} has {values.size} values, "
                                  f"expected {math.prod(shape)}")
            arrays[name] = values.reshape(shape)
    except KeyError as exc:
        raise SchemaError(f"missing field {exc} in MLP file {path}") from None
    return MLPFuser(reg_lambda=reg_lambda, classifier_names=names, **arrays)
