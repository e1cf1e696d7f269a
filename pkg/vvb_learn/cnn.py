"""
Small convolutional classifier with hand-written backpropagation.

Arrays are ``NCHW`` float64. The network reads the ``s1, s2, s3`` planes of a
Stokes image. Layers hold no parameters themselves: a :class:`CNNModel`
keeps one parameter dict per layer and every pass receives them explicitly,
so forward and predict are pure.
"""

# Standard Library
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

# Scientific
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# This module
from .dataset import Dataset
from .errors import (
    DomainError,
    FormatError,
    ShapeMismatchError,
    TrainingDivergedError,
)
from .fileformat import ModelFile
from .noise import stage_rng
from .optics import StokesImage


logger = logging.getLogger(__name__)

INPUT_CHANNELS = 3

DEFAULT_EPOCHS = 30
DEFAULT_BATCH_SIZE = 32
DEFAULT_LEARNING_RATE = 0.01
DEFAULT_MOMENTUM = 0.9

GRADIENT_STEP = 1e-5
# Gradients smaller than this are compared absolutely.
GRADIENT_FLOOR = 1e-5

PREDICT_CHUNK = 256


class Layer:
    """Base layer: no parameters, identity shape."""

    def __init__(self, **options):
        self.options = options

    def param_shapes(self) -> dict:
        return {}

    @property
    def fan_in(self) -> int:
        return 1

    def output_shape(self, shape: tuple) -> tuple:
        return shape

    def forward(self, params: dict, x: np.ndarray):
        raise NotImplementedError

    def backward(self, params: dict, cache, dout: np.ndarray):
        raise NotImplementedError


class Conv2D(Layer):
    def __init__(self, in_channels, out_channels, kernel=3, padding=1):
        super().__init__(
            in_channels=in_channels,
            out_channels=out_channels,
            kernel=kernel,
            padding=padding,
        )
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.padding = padding

    def param_shapes(self):
        k = self.kernel
        return {
            'w': (self.out_channels, self.in_channels, k, k),
            'b': (self.out_channels,),
        }

    @property
    def fan_in(self):
        return self.in_channels * self.kernel ** 2

    def output_shape(self, shape):
        channels, height, width = shape
        if channels != self.in_channels:
            raise ShapeMismatchError(
                'Conv expects {} channels, got {}'.format(
                    self.in_channels, channels
                )
            )
        grow = 2 * self.padding - self.kernel + 1
        return self.out_channels, height + grow, width + grow

    def _windows(self, x, pad):
        padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        k = self.kernel
        return sliding_window_view(padded, (k, k), axis=(2, 3))

    def forward(self, params, x):
        windows = self._windows(x, self.padding)
        out = np.einsum(
            'nchwij,ocij->nohw', windows, params['w'], optimize=True
        )
        out += params['b'][np.newaxis, :, np.newaxis, np.newaxis]
        return out, windows

    def backward(self, params, windows, dout):
        grads = {
            'w': np.einsum('nchwij,nohw->ocij', windows, dout, optimize=True),
            'b': dout.sum(axis=(0, 2, 3)),
        }
        # Full convolution of the output gradient with the flipped kernel.
        flipped = params['w'][:, :, ::-1, ::-1]
        dout_windows = self._windows(dout, self.kernel - 1 - self.padding)
        dx = np.einsum(
            'nohwij,ocij->nchw', dout_windows, flipped, optimize=True
        )
        return dx, grads


class ReLU(Layer):
    def forward(self, params, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, params, mask, dout):
        return dout * mask, {}


class MaxPool2D(Layer):
    """
    Non-overlapping 2 x 2 max pooling.

    Ties send the whole gradient to the first maximum in row-major order.
    """

    size = 2

    def output_shape(self, shape):
        channels, height, width = shape
        if height % self.size or width % self.size:
            raise ShapeMismatchError(
                'Pooling needs even spatial sizes, got {}x{}'.format(
                    height, width
                )
            )
        return channels, height // self.size, width // self.size

    def _blocks(self, x):
        n, c, h, w = x.shape
        s = self.size
        blocks = x.reshape(n, c, h // s, s, w // s, s)
        blocks = blocks.transpose(0, 1, 2, 4, 3, 5)
        return blocks.reshape(n, c, h // s, w // s, s * s)

    def forward(self, params, x):
        blocks = self._blocks(x)
        winner = np.argmax(blocks, axis=-1)[..., np.newaxis]
        out = np.take_along_axis(blocks, winner, axis=-1)[..., 0]
        return out, (winner, x.shape)

    def backward(self, params, cache, dout):
        winner, shape = cache
        n, c, h, w = shape
        s = self.size
        blocks = np.zeros((n, c, h // s, w // s, s * s))
        np.put_along_axis(blocks, winner, dout[..., np.newaxis], axis=-1)
        dx = blocks.reshape(n, c, h // s, w // s, s, s)
        dx = dx.transpose(0, 1, 2, 4, 3, 5)
        return dx.reshape(shape), {}


class Flatten(Layer):
    def output_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, params, x):
        return x.reshape(len(x), -1), x.shape

    def backward(self, params, shape, dout):
        return dout.reshape(shape), {}


class Dense(Layer):
    def __init__(self, in_features, out_features):
        super().__init__(in_features=in_features, out_features=out_features)
        self.in_features = in_features
        self.out_features = out_features

    def param_shapes(self):
        return {
            'w': (self.out_features, self.in_features),
            'b': (self.out_features,),
        }

    @property
    def fan_in(self):
        return self.in_features

    def output_shape(self, shape):
        if shape != (self.in_features,):
            raise ShapeMismatchError(
                'Dense expects {} features, got {}'.format(
                    self.in_features, shape
                )
            )
        return (self.out_features,)

    def forward(self, params, x):
        return x @ params['w'].T + params['b'], x

    def backward(self, params, x, dout):
        grads = {'w': dout.T @ x, 'b': dout.sum(axis=0)}
        return dout @ params['w'], grads


LAYER_TYPES = {
    'conv': Conv2D,
    'relu': ReLU,
    'maxpool': MaxPool2D,
    'flatten': Flatten,
    'dense': Dense,
}


def build_layer(spec: dict) -> Layer:
    options = dict(spec)
    kind = options.pop('type')
    try:
        return LAYER_TYPES[kind](**options)
    except KeyError:
        raise DomainError(
            'Unknown layer type "{}"; known: {}'.format(
                kind, ', '.join(sorted(LAYER_TYPES))
            )
        )


def default_architecture(resolution: int, n_classes: int) -> list:
    """Two conv/relu/pool stages (8 and 16 maps), dense 64, relu, dense C."""
    if resolution % 4:
        raise ShapeMismatchError(
            'Resolution {} is not divisible by 4'.format(resolution)
        )
    flat = 16 * (resolution // 4) ** 2
    return [
        {'type': 'conv', 'in_channels': 3, 'out_channels': 8},
        {'type': 'relu'},
        {'type': 'maxpool'},
        {'type': 'conv', 'in_channels': 8, 'out_channels': 16},
        {'type': 'relu'},
        {'type': 'maxpool'},
        {'type': 'flatten'},
        {'type': 'dense', 'in_features': flat, 'out_features': 64},
        {'type': 'relu'},
        {'type': 'dense', 'in_features': 64, 'out_features': n_classes},
    ]


def small_architecture(resolution: int, n_classes: int) -> list:
    """One conv block and two dense layers, for gradient checks."""
    if resolution % 2:
        raise ShapeMismatchError('Resolution {} is odd'.format(resolution))
    flat = 4 * (resolution // 2) ** 2
    return [
        {'type': 'conv', 'in_channels': 3, 'out_channels': 4},
        {'type': 'relu'},
        {'type': 'maxpool'},
        {'type': 'flatten'},
        {'type': 'dense', 'in_features': flat, 'out_features': 8},
        {'type': 'relu'},
        {'type': 'dense', 'in_features': 8, 'out_features': n_classes},
    ]


@dataclass(frozen=True, eq=False)
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float


@dataclass(frozen=True, eq=False)
class CNNModel:
    architecture: tuple
    params: tuple
    resolution: int
    n_classes: int
    task: str = None
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        layers = self.layers
        if len(self.params) != len(layers):
            raise ShapeMismatchError('One parameter dict per layer required')

        shape = (INPUT_CHANNELS, self.resolution, self.resolution)
        for layer, params in zip(layers, self.params):
            expected = layer.param_shapes()
            actual = {name: value.shape for name, value in params.items()}
            if actual != expected:
                raise ShapeMismatchError(
                    'Layer {} parameters {} do not match {}'.format(
                        type(layer).__name__, actual, expected
                    )
                )
            shape = layer.output_shape(shape)
        if shape != (self.n_classes,):
            raise ShapeMismatchError(
                'Network ends in {} outputs for {} classes'.format(
                    shape, self.n_classes
                )
            )

    @property
    def layers(self) -> list:
        return [build_layer(spec) for spec in self.architecture]

    @property
    def parameter_count(self) -> int:
        return sum(v.size for params in self.params for v in params.values())

    def with_params(self, params) -> 'CNNModel':
        return replace(self, params=tuple(params))

    def to_file(self) -> ModelFile:
        tensors = {}
        for index, params in enumerate(self.params):
            for name, value in params.items():
                tensors['{}.{}'.format(index, name)] = value
        return ModelFile(
            'cnn',
            {
                'architecture': list(self.architecture),
                'resolution': self.resolution,
                'n_classes': self.n_classes,
                'task': self.task,
                'hyperparameters': self.hyperparameters,
            },
            tensors,
        )

    @classmethod
    def from_file(cls, model: ModelFile) -> 'CNNModel':
        if model.kind != 'cnn':
            raise FormatError(
                'Expected a cnn model, got {}'.format(model.kind)
            )
        meta = model.metadata
        architecture = tuple(meta['architecture'])
        params = [{} for _ in architecture]
        for key, value in model.tensors.items():
            index, name = key.split('.', 1)
            params[int(index)][name] = value
        return cls(
            architecture=architecture,
            params=tuple(params),
            resolution=int(meta['resolution']),
            n_classes=int(meta['n_classes']),
            task=meta.get('task'),
            hyperparameters=meta.get('hyperparameters', {}),
        )


def init_model(
    resolution: int,
    n_classes: int,
    seed: int = 0,
    architecture=None,
    task: str = None,
) -> CNNModel:
    """
    Fresh network with weights uniform in ``+-sqrt(6 / fan_in)``.

    Biases start at zero. Each layer draws from its own seeded generator.

    """
    if architecture is None:
        architecture = default_architecture(resolution, n_classes)

    params = []
    for index, spec in enumerate(architecture):
        layer = build_layer(spec)
        rng = stage_rng(seed, index, 'init')
        limit = math.sqrt(6.0 / layer.fan_in)
        values = {}
        for name, shape in layer.param_shapes().items():
            if name == 'b':
                values[name] = np.zeros(shape)
            else:
                values[name] = rng.uniform(-limit, limit, shape)
        params.append(values)

    return CNNModel(
        architecture=tuple(dict(spec) for spec in architecture),
        params=tuple(params),
        resolution=resolution,
        n_classes=n_classes,
        task=task,
        hyperparameters={'init_seed': seed},
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _inputs(model: CNNModel, data) -> np.ndarray:
    if isinstance(data, Dataset):
        x = data.planes[:, :INPUT_CHANNELS]
    elif isinstance(data, StokesImage):
        x = data.planes()[np.newaxis, :INPUT_CHANNELS]
    else:
        x = np.asarray(data)
        if x.ndim == 3:
            x = x[np.newaxis]
        if x.ndim == 4 and x.shape[1] == 4:
            x = x[:, :INPUT_CHANNELS]

    expected = (INPUT_CHANNELS, model.resolution, model.resolution)
    if x.ndim != 4 or x.shape[1:] != expected:
        raise ShapeMismatchError(
            'Model expects inputs of shape (N, {}, {}, {}), got {}'.format(
                *expected, x.shape
            )
        )
    return np.asarray(x, dtype=np.float64)


def _forward(model: CNNModel, x: np.ndarray, keep_caches: bool = False):
    caches = []
    for layer, params in zip(model.layers, model.params):
        x, cache = layer.forward(params, x)
        if keep_caches:
            caches.append(cache)
    return x, caches


def predict_proba(model: CNNModel, data) -> np.ndarray:
    """``(N, C)`` class probabilities, computed in chunks."""
    x = _inputs(model, data)
    chunks = [
        _softmax(_forward(model, x[start : start + PREDICT_CHUNK])[0])
        for start in range(0, len(x), PREDICT_CHUNK)
    ]
    if not chunks:
        return np.zeros((0, model.n_classes))
    return np.concatenate(chunks)


def cnn_forward(model: CNNModel, img) -> np.ndarray:
    """
    Class probabilities for one image.

    Args:
        model: Network.
        img: :class:`StokesImage` or ``(3, R, R)`` / ``(4, R, R)`` planes.

    Returns:
        Length-``C`` probability vector.

    Raises:
        ShapeMismatchError: resolution differs from the model's.

    """
    return predict_proba(model, img)[0]


def cnn_predict(model: CNNModel, data) -> np.ndarray:
    return np.argmax(predict_proba(model, data), axis=1)


def loss_and_grads(model: CNNModel, x: np.ndarray, y: np.ndarray):
    """
    Mean cross-entropy of a batch and its parameter gradients.

    Returns:
        ``(loss, grads, probabilities)`` with ``grads`` shaped like
        ``model.params``.

    """
    logits, caches = _forward(model, x, keep_caches=True)
    probs = _softmax(logits)
    n = len(y)
    picked = probs[np.arange(n), y]
    loss = float(-np.mean(np.log(np.maximum(picked, 1e-300))))

    dout = probs.copy()
    dout[np.arange(n), y] -= 1
    dout /= n

    grads = [None] * len(caches)
    layers = model.layers
    for index in range(len(layers) - 1, -1, -1):
        dout, grads[index] = layers[index].backward(
            model.params[index], caches[index], dout
        )
    return loss, grads, probs


def _parallel_loss_and_grads(model, x, y, jobs):
    parts = [p for p in np.array_split(np.arange(len(y)), jobs) if len(p)]
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        results = list(
            pool.map(lambda p: loss_and_grads(model, x[p], y[p]), parts)
        )

    n = len(y)
    loss = sum(r[0] * len(p) for r, p in zip(results, parts)) / n
    grads = []
    for index, layer_grads in enumerate(results[0][1]):
        grads.append(
            {
                name: sum(
                    r[1][index][name] * len(p) for r, p in zip(results, parts)
                )
                / n
                for name in layer_grads
            }
        )
    probs = np.concatenate([r[2] for r in results])
    return loss, grads, probs


def sgd_step(
    model: CNNModel,
    velocity,
    x,
    y,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    momentum: float = DEFAULT_MOMENTUM,
    jobs: int = 1,
):
    """
    One momentum SGD update ``v <- mu v - lr g; p <- p + v``.

    Returns:
        ``(model, velocity, loss, probabilities)`` after the step; the loss
        and probabilities belong to the parameters before it.

    """
    x = _inputs(model, x)
    y = np.asarray(y, dtype=np.int64)
    if velocity is None:
        velocity = [
            {name: np.zeros_like(v) for name, v in params.items()}
            for params in model.params
        ]

    if jobs > 1 and len(y) > 1:
        loss, grads, probs = _parallel_loss_and_grads(model, x, y, jobs)
    else:
        loss, grads, probs = loss_and_grads(model, x, y)

    new_params, new_velocity = [], []
    for params, vel, grad in zip(model.params, velocity, grads):
        step = {
            name: momentum * vel[name] - learning_rate * grad[name]
            for name in params
        }
        new_velocity.append(step)
        new_params.append({name: params[name] + step[name] for name in params})

    return model.with_params(new_params), new_velocity, loss, probs


def _check_labels(model: CNNModel, ds: Dataset):
    if len(ds) == 0:
        raise DomainError('Cannot train on an empty dataset')
    if int(ds.labels.max()) >= model.n_classes:
        raise DomainError(
            'Label {} out of range for a {}-class network'.format(
                int(ds.labels.max()), model.n_classes
            )
        )


def cnn_train(
    model: CNNModel,
    train: Dataset,
    val: Dataset = None,
    epochs: int = DEFAULT_EPOCHS,
    batch_size: int = DEFAULT_BATCH_SIZE,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    momentum: float = DEFAULT_MOMENTUM,
    seed: int = 0,
    jobs: int = 1,
    on_epoch=None,
):
    """
    Mini-batch momentum SGD on cross-entropy.

    Each epoch visits the training set in an order drawn from
    ``(seed, epoch)``. With ``jobs == 1`` the run is bit-reproducible; larger
    values split every batch across threads and sum the partial gradients.

    Args:
        model: Initial network.
        train: Training images.
        val: Optional validation images, scored after every epoch.
        epochs: Passes over ``train``.
        batch_size: Images per update.
        learning_rate: SGD step.
        momentum: Velocity decay.
        seed: Shuffle seed.
        jobs: Threads per batch.
        on_epoch: Called with every :class:`EpochMetrics`.

    Returns:
        ``(trained model, list of EpochMetrics)``.

    Raises:
        DomainError: empty training set or labels beyond the class count.
        TrainingDivergedError: the loss became NaN or infinite.

    """
    _check_labels(model, train)
    if batch_size < 1 or epochs < 1:
        raise DomainError('epochs and batch_size must be >= 1')

    x_all = train.planes[:, :INPUT_CHANNELS]
    y_all = train.labels.astype(np.int64)
    velocity = None
    history = []

    for epoch in range(1, epochs + 1):
        order = stage_rng(seed, epoch, 'shuffle').permutation(len(y_all))
        total_loss = 0.0
        correct = 0
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            y = y_all[batch]
            model, velocity, loss, probs = sgd_step(
                model,
                velocity,
                x_all[batch],
                y,
                learning_rate,
                momentum,
                jobs,
            )
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    'Loss is {} at epoch {}, batch starting at {}; '
                    'try a smaller learning rate'.format(loss, epoch, start)
                )
            total_loss += loss * len(batch)
            correct += int(np.sum(np.argmax(probs, axis=1) == y))

        val_acc = float('nan')
        if val is not None and len(val):
            val_acc = float(np.mean(cnn_predict(model, val) == val.labels))

        metrics = EpochMetrics(
            epoch, total_loss / len(y_all), correct / len(y_all), val_acc
        )
        history.append(metrics)
        logger.info(
            'Epoch %d: loss %.4f train acc %.4f val acc %.4f',
            epoch,
            metrics.train_loss,
            metrics.train_acc,
            metrics.val_acc,
        )
        if on_epoch is not None:
            on_epoch(metrics)

    if epochs > 1 and history[-1].train_loss >= history[0].train_loss:
        logger.warning(
            'Training loss did not fall over %d epochs (%.4f -> %.4f)',
            epochs,
            history[0].train_loss,
            history[-1].train_loss,
        )

    hyperparameters = dict(
        model.hyperparameters,
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=learning_rate,
        momentum=momentum,
        seed=seed,
    )
    return replace(model, hyperparameters=hyperparameters), history


def gradient_check(model: CNNModel, img, label: int, step=GRADIENT_STEP):
    """
    Largest relative gap between backprop and central finite differences.

    Every parameter is perturbed by ``+-step``. The relative error is
    ``|a - n| / max(|a| + |n|, GRADIENT_FLOOR)``.

    """
    x = _inputs(model, img)
    y = np.array([label], dtype=np.int64)
    _, analytic, _ = loss_and_grads(model, x, y)

    worst = 0.0
    for index, params in enumerate(model.params):
        for name, value in params.items():
            for position in np.ndindex(value.shape):
                original = value[position]
                value[position] = original + step
                plus = loss_and_grads(model, x, y)[0]
                value[position] = original - step
                minus = loss_and_grads(model, x, y)[0]
                value[position] = original

                numeric = (plus - minus) / (2 * step)
                exact = analytic[index][name][position]
                scale = max(abs(exact) + abs(numeric), GRADIENT_FLOOR)
                worst = max(worst, abs(exact - numeric) / scale)

    return worst
