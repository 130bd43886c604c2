""" Learnable models, SGD updates and model averaging.

Both model kinds are binary classifiers trained with mean cross-entropy:

- logistic regression: params = [w (dim), b]
- two-layer MLP with tanh hidden units: params = [W1 (hidden x dim), b1 (hidden),
  w2 (hidden), b2]
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from hetsync.exceptions import DimensionMismatchError, NumericalError
from hetsync.training.data import DatasetShardSet, Examples
from hetsync.utils.streams import philox

_INIT_STREAM = 3


class ModelKind(Enum):
    LOGISTIC_REGRESSION = 'logistic_regression'
    TWO_LAYER_MLP = 'two_layer_mlp'

    @classmethod
    def parse(cls, name: str) -> 'ModelKind':
        try:
            return cls(name)
        except ValueError:
            raise ValueError(f'model kind must be one of: {[k.value for k in cls]}, '
                             f'got {name!r}') from None


@dataclass(frozen=True, eq=False)
class ModelState:
    """An immutable parameter vector and the local iterations behind it."""
    params: np.ndarray
    step_count: int = 0

    def __post_init__(self):
        params = np.array(self.params, dtype=np.float64)
        if params.ndim != 1:
            raise ValueError(f'params must be a vector, got shape {params.shape}')
        if self.step_count < 0:
            raise ValueError(f'step_count must be non-negative, got {self.step_count}')
        params.flags.writeable = False
        object.__setattr__(self, 'params', params)

    def same_as(self, other: 'ModelState') -> bool:
        """Bit-identical params (step counts are bookkeeping only)."""
        return (self.params.shape == other.params.shape
                and self.params.tobytes() == other.params.tobytes())


@dataclass(frozen=True, eq=False)
class TrainingTask:
    """What every worker trains: model kind, sharded data and SGD settings.

    Args:
        kind (ModelKind): Model family.
        dimension (int): Feature dimension of the dataset.
        dataset (DatasetShardSet): One shard per worker.
        learning_rate (float): SGD step size eta.
        batch_size (int): Examples per local iteration.
        seed (int): Seed for the dataset and the initial parameters.
        hidden_units (int): Width of the MLP hidden layer.
    """
    kind: ModelKind
    dimension: int
    dataset: DatasetShardSet
    learning_rate: float
    batch_size: int
    seed: int
    hidden_units: int = 16

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f'learning_rate must be positive, got {self.learning_rate}')
        if self.batch_size < 1:
            raise ValueError(f'batch_size must be positive, got {self.batch_size}')
        if self.batch_size > min(self.dataset.sizes):
            raise ValueError(f'batch_size {self.batch_size} exceeds the smallest shard '
                             f'({min(self.dataset.sizes)} examples)')
        if self.dimension != self.dataset.feature_dim:
            raise ValueError(f'dimension {self.dimension} does not match the dataset '
                             f'feature dimension {self.dataset.feature_dim}')
        if self.hidden_units < 1:
            raise ValueError(f'hidden_units must be positive, got {self.hidden_units}')

    @property
    def param_count(self) -> int:
        if self.kind is ModelKind.LOGISTIC_REGRESSION:
            return self.dimension + 1
        return self.hidden_units * (self.dimension + 2) + 1


def initial_model(task: TrainingTask) -> ModelState:
    """Zeros for logistic regression; small seeded weights for the MLP."""
    if task.kind is ModelKind.LOGISTIC_REGRESSION:
        return ModelState(np.zeros(task.param_count))
    rng = philox(task.seed, _INIT_STREAM)
    h, d = task.hidden_units, task.dimension
    w1 = rng.standard_normal(h * d) / np.sqrt(d)
    w2 = rng.standard_normal(h) / np.sqrt(h)
    return ModelState(np.concatenate([w1, np.zeros(h), w2, np.zeros(1)]))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _check_shapes(model: ModelState, examples: Examples, task: TrainingTask) -> None:
    if examples.feature_dim != task.dimension:
        raise DimensionMismatchError(f'examples have {examples.feature_dim} features, '
                                     f'the task expects {task.dimension}')
    if model.params.shape != (task.param_count,):
        raise DimensionMismatchError(f'model has {model.params.shape[0]} params, '
                                     f'{task.kind.value} needs {task.param_count}')


def _unpack_mlp(params: np.ndarray, task: TrainingTask):
    h, d = task.hidden_units, task.dimension
    w1 = params[:h * d].reshape(h, d)
    b1 = params[h * d:h * d + h]
    w2 = params[h * d + h:h * d + 2 * h]
    b2 = params[-1]
    return w1, b1, w2, b2


def logits(params: np.ndarray, features: np.ndarray, task: TrainingTask) -> np.ndarray:
    if task.kind is ModelKind.LOGISTIC_REGRESSION:
        return features @ params[:-1] + params[-1]
    w1, b1, w2, b2 = _unpack_mlp(params, task)
    return np.tanh(features @ w1.T + b1) @ w2 + b2


def _cross_entropy(z: np.ndarray, labels: np.ndarray) -> float:
    # log(1 + e^z) - y z, stable for large |z|
    return float(np.mean(np.logaddexp(0.0, z) - labels * z))


def loss_and_gradient(model: ModelState,
                      batch: Examples,
                      task: TrainingTask) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy over `batch` and its exact gradient w.r.t. the params.

    Raises:
        DimensionMismatchError: The batch or the params do not fit the task.
    """
    if len(batch) == 0:
        raise ValueError('cannot compute a gradient on an empty batch')
    _check_shapes(model, batch, task)
    x, y, params = batch.features, batch.labels, model.params
    n = len(batch)

    if task.kind is ModelKind.LOGISTIC_REGRESSION:
        z = x @ params[:-1] + params[-1]
        dz = (_sigmoid(z) - y) / n
        grad = np.concatenate([x.T @ dz, [dz.sum()]])
        return _cross_entropy(z, y), grad

    w1, b1, w2, b2 = _unpack_mlp(params, task)
    hidden = np.tanh(x @ w1.T + b1)
    z = hidden @ w2 + b2
    dz = (_sigmoid(z) - y) / n
    d_hidden = np.outer(dz, w2) * (1.0 - hidden**2)
    grad = np.concatenate([(d_hidden.T @ x).ravel(),
                           d_hidden.sum(axis=0),
                           hidden.T @ dz,
                           [dz.sum()]])
    return _cross_entropy(z, y), grad


def apply_gradient(model: ModelState, gradient: np.ndarray, learning_rate: float) -> ModelState:
    """params - learning_rate * gradient, one more local step.

    Raises:
        NumericalError: The update produced NaN or inf.
    """
    gradient = np.asarray(gradient, dtype=np.float64)
    if gradient.shape != model.params.shape:
        raise DimensionMismatchError(f'gradient shape {gradient.shape} does not match '
                                     f'params shape {model.params.shape}')
    params = model.params - learning_rate * gradient
    if not np.all(np.isfinite(params)):
        raise NumericalError(f'SGD update at step {model.step_count + 1} produced non-finite '
                             f'params (learning rate {learning_rate})')
    return ModelState(params, model.step_count + 1)


def sgd_step(model: ModelState, batch: Examples, task: TrainingTask) -> ModelState:
    """One local SGD iteration on `batch`."""
    _, gradient = loss_and_gradient(model, batch, task)
    return apply_gradient(model, gradient, task.learning_rate)


def average_models(models: Sequence[ModelState],
                   weights: Optional[Sequence[float]] = None) -> ModelState:
    """Entrywise mean of the params; the step count is the largest input's.

    Args:
        models (Sequence[ModelState]): Models to average, equal lengths.
        weights (Optional[Sequence[float]]): Per-model weights. Uniform when None.

    Returns:
        ModelState: The averaged model.
    """
    if not models:
        raise ValueError('cannot average an empty list of models')
    lengths = {m.params.shape for m in models}
    if len(lengths) != 1:
        raise DimensionMismatchError(f'cannot average models with param shapes {sorted(lengths)}')
    step_count = max(m.step_count for m in models)
    if len(models) == 1:
        return ModelState(models[0].params, step_count)

    # offsets from the first model, so identical inputs come back bit-identical
    base = models[0].params
    offsets = np.stack([m.params - base for m in models])
    if weights is None:
        params = base + offsets.mean(axis=0)
    else:
        if len(weights) != len(models) or min(weights) <= 0:
            raise ValueError(f'need one positive weight per model, got {list(weights)}')
        params = base + np.average(offsets, axis=0, weights=np.asarray(weights, dtype=np.float64))
    return ModelState(params, step_count)


def evaluate(model: ModelState, dataset: Examples, task: TrainingTask) -> Tuple[float, float]:
    """Mean loss and 0/1 accuracy on the whole of `dataset`.

    A logit of exactly zero predicts the negative class.
    """
    if len(dataset) == 0:
        raise ValueError('cannot evaluate on an empty dataset')
    _check_shapes(model, dataset, task)
    z = logits(model.params, dataset.features, task)
    accuracy = float(np.mean((z > 0) == (dataset.labels > 0.5)))
    return _cross_entropy(z, dataset.labels), accuracy
