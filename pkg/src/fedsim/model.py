"""Multi-layer perceptron with exact gradients on top of the kernel backend.

A model is its layer widths, hidden activation, and a flat `ParamVector`
holding every weight and bias. The flat layout, in order: for each
consecutive layer pair (n_in, n_out), the weight matrix row-major with the
input index major, then that layer's biases. The vector's ``shape_id``
(e.g. ``"mlp:24-32-10:tanh"``) encodes the architecture, so a bare parameter
vector is self-describing and anyone holding one can rebuild the model with
`model_for` and score it on local data.

Everything here is a pure function of its inputs plus an explicit seed;
training returns the parameter delta and leaves the input model untouched.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import backend
from .errors import ConfigError, DatasetError, ShapeMismatchError
from .params import ParamVector
from .seeding import as_rng

_ACTIVATIONS = ("tanh", "relu")


def _shape_id(layer_sizes, activation):
    return "mlp:" + "-".join(str(s) for s in layer_sizes) + ":" + activation


@dataclass(frozen=True)
class MlpModel:
    """Layer widths, hidden activation, and the current flat parameters."""

    layer_sizes: tuple
    activation: str = "tanh"
    params: ParamVector = None

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise ConfigError("layer_sizes needs an input and an output layer")
        if any(s < 1 for s in sizes):
            raise ConfigError(f"layer sizes must be positive, got {sizes}")
        if self.activation not in _ACTIVATIONS:
            raise ConfigError(
                f"unknown activation {self.activation!r}; expected one of {_ACTIVATIONS}"
            )
        object.__setattr__(self, "layer_sizes", sizes)
        if self.params is not None:
            if self.params.shape_id != self.shape_id:
                raise ShapeMismatchError(
                    f"params carry shape id {self.params.shape_id!r}, "
                    f"model is {self.shape_id!r}"
                )
            expected = param_count(sizes)
            if self.params.values.shape[0] != expected:
                raise ShapeMismatchError(
                    f"{self.shape_id} needs {expected} parameters, "
                    f"got {self.params.values.shape[0]}"
                )

    @property
    def n_features(self):
        return self.layer_sizes[0]

    @property
    def n_classes(self):
        return self.layer_sizes[-1]

    @property
    def shape_id(self):
        return _shape_id(self.layer_sizes, self.activation)


def param_count(layer_sizes):
    """Total number of weights and biases for the given layer widths."""
    sizes = tuple(int(s) for s in layer_sizes)
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


def init_model(layer_sizes, activation, seed):
    """Fresh model: Glorot-uniform weights, zero biases, drawn layer by layer.

    Each weight block is one uniform draw on
    [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]; biases consume no
    randomness. Draw order (layer 0 weights, layer 1 weights, ...) is part of
    the determinism contract.
    """
    model = MlpModel(layer_sizes, activation)
    rng = as_rng(seed)
    blocks = []
    for n_in, n_out in zip(model.layer_sizes[:-1], model.layer_sizes[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        blocks.append(rng.uniform(-limit, limit, size=n_in * n_out))
        blocks.append(np.zeros(n_out))
    params = ParamVector(np.concatenate(blocks), model.shape_id)
    return replace(model, params=params)


def model_for(params):
    """Rebuild the model a `ParamVector` belongs to from its shape id."""
    parts = params.shape_id.split(":")
    if len(parts) != 3 or parts[0] != "mlp":
        raise ShapeMismatchError(f"not an MLP shape id: {params.shape_id!r}")
    try:
        sizes = tuple(int(s) for s in parts[1].split("-"))
    except ValueError:
        raise ShapeMismatchError(
            f"bad layer sizes in shape id: {params.shape_id!r}"
        ) from None
    return MlpModel(layer_sizes=sizes, activation=parts[2], params=params)


def apply_update(model, delta):
    """New model at params + delta; the input model is unchanged."""
    return replace(model, params=model.params + delta)


@dataclass(frozen=True)
class SgdConfig:
    """Local-training hyperparameters."""

    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    local_epochs: int = 5

    def __post_init__(self):
        # learning_rate 0 is legal (a no-op update); negative is not.
        if not self.learning_rate >= 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.local_epochs < 1:
            raise ConfigError(f"local_epochs must be >= 1, got {self.local_epochs}")


def _require_params(model):
    if model.params is None:
        raise ShapeMismatchError("model has no parameters; initialize it first")
    return model.params.values


def _sizes_array(model):
    return np.asarray(model.layer_sizes, dtype=np.int64)


def _check_features(model, features):
    features = np.ascontiguousarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.n_features:
        raise ShapeMismatchError(
            f"features must be (n, {model.n_features}), got {features.shape}"
        )
    return features


def _labels0(model, labels):
    """Validate 1-based labels and convert to the kernels' 0-based form."""
    labels = np.asarray(labels)
    if labels.shape[0] and (labels.min() < 1 or labels.max() > model.n_classes):
        raise DatasetError(
            f"labels must lie in [1, {model.n_classes}], "
            f"got range [{labels.min()}, {labels.max()}]"
        )
    return np.ascontiguousarray(labels, dtype=np.int64) - 1


def forward(model, x):
    """Softmax class probabilities.

    A single feature vector gives a probability vector; a feature matrix
    gives one row of probabilities per sample.
    """
    values = _require_params(model)
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    features = _check_features(model, x[None, :] if single else x)
    act = backend.ACTIVATION_IDS[model.activation]
    probs = backend.forward_probs(values, _sizes_array(model), act, features)
    return probs[0] if single else probs


def dataset_loss(model, data):
    """Mean cross-entropy of the model on a labeled dataset."""
    values = _require_params(model)
    features = _check_features(model, data.features)
    if features.shape[0] == 0:
        raise DatasetError("cannot evaluate loss on an empty dataset")
    labels0 = _labels0(model, data.labels)
    act = backend.ACTIVATION_IDS[model.activation]
    return float(
        backend.mean_loss(values, _sizes_array(model), act, features, labels0)
    )


def evaluate(model, data):
    """(mean loss, accuracy); argmax ties resolve to the lower class index."""
    loss = dataset_loss(model, data)
    probs = forward(model, data.features)
    pred0 = np.argmax(probs, axis=1)
    accuracy = float(np.mean(pred0 == _labels0(model, data.labels)))
    return loss, accuracy


def gradient(model, batch):
    """Exact gradient of the mean cross-entropy as a `ParamVector`."""
    values = _require_params(model)
    features = _check_features(model, batch.features)
    if features.shape[0] == 0:
        raise DatasetError("cannot take a gradient on an empty dataset")
    labels0 = _labels0(model, batch.labels)
    act = backend.ACTIVATION_IDS[model.activation]
    grad = backend.mean_grad(values, _sizes_array(model), act, features, labels0)
    return ParamVector(grad, model.shape_id)


def train_local(model, data, cfg, seed):
    """Local SGD with momentum; returns the update delta, model untouched.

    One permutation of the sample indices is drawn per epoch, in epoch order,
    before any training; both kernel backends then consume identical visit
    orders. The momentum buffer starts at zero and follows
    v <- momentum*v + g, delta <- delta - learning_rate*v, with gradients
    taken at params + delta; the final incomplete batch is used.
    """
    values = _require_params(model)
    features = _check_features(model, data.features)
    n = features.shape[0]
    if n == 0:
        raise DatasetError("cannot train on an empty dataset")
    labels0 = _labels0(model, data.labels)
    rng = as_rng(seed)
    perms = np.stack([rng.permutation(n) for _ in range(cfg.local_epochs)])
    act = backend.ACTIVATION_IDS[model.activation]
    delta = backend.sgd_train(
        values,
        _sizes_array(model),
        act,
        features,
        labels0,
        np.ascontiguousarray(perms, dtype=np.int64),
        cfg.batch_size,
        cfg.learning_rate,
        cfg.momentum,
    )
    return ParamVector(delta, model.shape_id)
