""" Synthetic datasets, proportional sharding and batch cursors. """

from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from hetsync.utils.streams import philox

# stream ids under a dataset seed
_TRUE_WEIGHTS_STREAM = 0
_FEATURES_STREAM = 1
_NOISE_STREAM = 2

LABEL_NOISE_STD = 1.0


@dataclass(frozen=True, eq=False)
class Examples:
    """A list of labeled examples stored as a feature matrix and a label vector.

    Labels are 0.0 or 1.0.
    """
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.float64)
        if features.ndim != 2:
            raise ValueError(f'features must be a matrix, got shape {features.shape}')
        if labels.shape != (features.shape[0],):
            raise ValueError(f'expected {features.shape[0]} labels, got shape {labels.shape}')
        features.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)

    def __len__(self) -> int:
        return self.labels.shape[0]

    def __getitem__(self, index: Union[slice, np.ndarray]) -> 'Examples':
        return Examples(self.features[index], self.labels[index])

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @classmethod
    def concatenate(cls, parts: Sequence['Examples']) -> 'Examples':
        return cls(np.concatenate([p.features for p in parts]),
                   np.concatenate([p.labels for p in parts]))

    def same_as(self, other: 'Examples') -> bool:
        """Bit-identical comparison."""
        return (self.features.shape == other.features.shape
                and self.features.tobytes() == other.features.tobytes()
                and self.labels.tobytes() == other.labels.tobytes())


@dataclass(frozen=True, eq=False)
class DatasetShardSet:
    """Disjoint per-worker shards of one dataset, in worker order."""
    shards: Tuple[Examples, ...]
    feature_dim: int

    def __post_init__(self):
        object.__setattr__(self, 'shards', tuple(self.shards))
        if not self.shards:
            raise ValueError('a shard set needs at least one shard')
        for i, shard in enumerate(self.shards):
            if len(shard) == 0:
                raise ValueError(f'shard {i} is empty')
            if shard.feature_dim != self.feature_dim:
                raise ValueError(f'shard {i} has {shard.feature_dim} features, '
                                 f'expected {self.feature_dim}')

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(len(s) for s in self.shards)

    @property
    def full(self) -> Examples:
        """All shards concatenated back in worker order."""
        return Examples.concatenate(self.shards)


def generate_synthetic_dataset(n: int, dim: int, seed: int) -> Examples:
    """Draw a linearly separable-with-noise binary classification dataset.

    Features are i.i.d. standard normal, a true weight vector comes from the same
    seed, and labels are 1 where w_true . x + noise is positive.

    Args:
        n (int): Number of examples, at least 10.
        dim (int): Feature dimension, at least 2.
        seed (int): Dataset seed.

    Returns:
        Examples: The unsharded dataset, identical for identical arguments.
    """
    if n < 10:
        raise ValueError(f'n must be at least 10, got {n}')
    if dim < 2:
        raise ValueError(f'dim must be at least 2, got {dim}')

    w_true = philox(seed, _TRUE_WEIGHTS_STREAM).standard_normal(dim)
    features = philox(seed, _FEATURES_STREAM).standard_normal((n, dim))
    noise = philox(seed, _NOISE_STREAM).normal(0.0, LABEL_NOISE_STD, n)
    labels = (features @ w_true + noise > 0).astype(np.float64)
    return Examples(features, labels)


def shard_sizes(n: int, weights: Sequence[int]) -> Tuple[int, ...]:
    """floor(n * w_i / sum(w)) each, remainder handed out one per shard in order."""
    total = sum(weights)
    if total < 1 or min(weights) < 1:
        raise ValueError(f'weights must be positive integers, got {list(weights)}')
    sizes = [n * w // total for w in weights]
    for i in range(n - sum(sizes)):
        sizes[i % len(sizes)] += 1
    return tuple(sizes)


def partition(dataset: Examples, weights: Sequence[int]) -> DatasetShardSet:
    """Split `dataset` into contiguous shards proportional to `weights`.

    Raises:
        ValueError: Any shard would be empty.
    """
    if len(dataset) < len(weights):
        raise ValueError(f'cannot split {len(dataset)} examples over {len(weights)} workers')
    sizes = shard_sizes(len(dataset), weights)
    if min(sizes) == 0:
        raise ValueError(f'weights {list(weights)} leave an empty shard (sizes {sizes})')
    bounds = np.cumsum((0,) + sizes)
    shards = [dataset[int(lo):int(hi)] for lo, hi in zip(bounds[:-1], bounds[1:])]
    return DatasetShardSet(shards=tuple(shards), feature_dim=dataset.feature_dim)


def next_batch(shard: Examples, cursor: int, batch_size: int) -> Tuple[Examples, int]:
    """Take `batch_size` examples from `cursor` on, wrapping around the shard.

    Returns:
        Tuple[Examples, int]: The batch and the advanced cursor.
    """
    indices = (cursor + np.arange(batch_size)) % len(shard)
    return shard[indices], (cursor + batch_size) % len(shard)
