"""scikit-learn style wrappers around the training loops."""
from __future__ import annotations

import numpy as np
import torch
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..augment import AugmentationSpec
from ..datagen.dataset import PdeDataset
from ..operators import ModelConfig, build_model
from .loops import evaluate, finetune_one, pretrain, rollout
from .spec import TrainSpec


def check_trajectories(X, min_frames=32):
    """Validate a ``[N, n_t, n_x, n_y]`` stack of finite trajectories."""
    X = check_array(X, allow_nd=True, dtype=np.float32, ensure_2d=False)
    if X.ndim != 4:
        raise ValueError(f"expected a [N, n_t, n_x, n_y] array, got shape {X.shape}")
    if X.shape[1] < min_frames:
        raise ValueError(f"trajectories need {min_frames} frames, got {X.shape[1]}")
    return X


class NeuralOperatorRegressor(RegressorMixin, BaseEstimator):
    """Fit a neural operator on whole trajectories.

    ``predict`` returns the target frame (fixed-future) or the rolled-out
    horizon (autoregressive); ``score`` is the negated mean validation error.
    """

    def __init__(self, family="fno", task="fixed_future", epochs=200, batch_size=32, lr=1e-3,
                 weight_decay=1e-6, augmentation="none", random_state=0, warm_start_model=None):
        self.family = family
        self.task = task
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.augmentation = augmentation
        self.random_state = random_state
        self.warm_start_model = warm_start_model

    def _spec(self):
        return TrainSpec(phase="finetune", task=self.task, epochs=self.epochs, batch_size=self.batch_size,
                         lr=self.lr, weight_decay=self.weight_decay,
                         augmentation=AugmentationSpec(self.augmentation), seeds=(self.random_state,))

    def fit(self, X, y=None):
        X = check_trajectories(X)
        spec = self._spec()
        seed = int(self.random_state)
        if self.warm_start_model is not None:
            import copy

            model = copy.deepcopy(self.warm_start_model)
        else:
            model = build_model(ModelConfig(self.family, out_frames=spec.out_frames), seed=seed)
        ds = PdeDataset(X, np.full((len(X), 4), np.nan), ["heat"] * len(X), _grid_for(X))
        self.model_, self.history_ = finetune_one(model, ds, spec, seed)
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = torch.from_numpy(check_trajectories(X, min_frames=8))
        spec = self._spec()
        w = spec.rollout.window
        self.model_.eval()
        with torch.no_grad():
            if self.task == "fixed_future":
                out = self.model_(X[:, :w])
            else:
                out = rollout(self.model_, X[:, :w], spec)
        return out.numpy()

    def score(self, X, y=None, sample_weight=None):
        check_is_fitted(self, "model_")
        X = torch.from_numpy(check_trajectories(X))
        errs = evaluate(self.model_, X, self._spec())
        return -float(np.average(errs, weights=sample_weight))


class PretextPretrainer(BaseEstimator):
    """Pretrain a backbone on one strategy; ``model_`` holds the headless result."""

    def __init__(self, family="fno", strategy="binary", task="autoregressive", epochs=None,
                 batch_size=32, lr=1e-3, weight_decay=1e-6, augmentation="none", tau=1.0, random_state=0):
        self.family = family
        self.strategy = strategy
        self.task = task
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.augmentation = augmentation
        self.tau = tau
        self.random_state = random_state

    def fit(self, dataset: PdeDataset, y=None):
        if not isinstance(dataset, PdeDataset):
            raise TypeError("PretextPretrainer.fit expects a PdeDataset (coefficients are needed)")
        check_trajectories(dataset.u)
        spec = TrainSpec(phase="pretrain", strategy=self.strategy, task=self.task, epochs=self.epochs,
                         batch_size=self.batch_size, lr=self.lr, weight_decay=self.weight_decay,
                         augmentation=AugmentationSpec(self.augmentation), tau=self.tau)
        model = build_model(ModelConfig(self.family, out_frames=spec.out_frames), seed=self.random_state)
        result = pretrain(model, self.strategy, dataset, spec, seed=self.random_state)
        self.model_ = result.model
        self.history_ = result.history
        return self


def _grid_for(X):
    from ..datagen.types import GridSpec

    return GridSpec(n_t=X.shape[1], n_x=X.shape[2], n_y=X.shape[3])
