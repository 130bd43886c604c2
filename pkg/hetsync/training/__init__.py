from .data import DatasetShardSet, Examples, generate_synthetic_dataset, next_batch, partition
from .models import (ModelKind, ModelState, TrainingTask, apply_gradient, average_models, evaluate,
                     initial_model, loss_and_gradient, sgd_step)
