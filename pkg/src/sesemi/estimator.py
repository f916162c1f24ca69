"""scikit-learn style wrappers around the training loop and preprocessing."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .datasets import Dataset, SplitDataset
from .experiments import matched_epochs
from .models import convnet_spec, mlp_spec
from .tensor import softmax
from .training import TrainConfig, train_sesemi
from .transforms import gcn, zca_apply, zca_fit

UNLABELED = -1


class SesemiClassifier(ClassifierMixin, BaseEstimator):
    """Dual-head network trained with a self-supervised transform-prediction loss.

    Rows of ``y`` equal to ``-1`` are unlabeled; they join the unlabeled pool
    together with the labeled rows.  Inputs are 2-D ``(n, d)`` for the MLP or
    4-D ``(n, c, h, w)`` for the ConvNet.

    Parameters
    ----------
    mode : {"ssl", "asl", "supervised"}
        ``ssl`` learns the proxy task on every row, ``asl`` on labeled rows
        only, ``supervised`` drops the self-supervised branch.
    w : float
        Weight of the self-supervised loss.
    epochs : int
        Passes over the unlabeled pool (or over the labeled rows when
        there is none).
    match_steps : bool
        In supervised mode, stretch ``epochs`` to the step budget the
        semi-supervised run would take on the same data.
    """

    def __init__(self, mode="ssl", w=1.0, hidden=(100, 100, 100), widths=(32, 64, 128),
                 epochs=20, batch_size=16, base_lr=0.05, momentum=0.9, weight_decay=5e-4,
                 dropout=0.0, lr_power=0.5, augment_noise=0.0, augment_translate=2,
                 augment_hflip=True, match_steps=True, dtype="float32", random_state=0):
        self.mode = mode
        self.w = w
        self.hidden = hidden
        self.widths = widths
        self.epochs = epochs
        self.batch_size = batch_size
        self.base_lr = base_lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.dropout = dropout
        self.lr_power = lr_power
        self.augment_noise = augment_noise
        self.augment_translate = augment_translate
        self.augment_hflip = augment_hflip
        self.match_steps = match_steps
        self.dtype = dtype
        self.random_state = random_state

    def _train_config(self, n_all, n_labeled):
        cfg = TrainConfig(
            mode=self.mode, batch_size_labeled=self.batch_size, w=self.w, base_lr=self.base_lr,
            momentum=self.momentum, weight_decay=self.weight_decay, dropout=self.dropout,
            epochs=self.epochs, lr_power=self.lr_power, seed=self.random_state,
            aug_translate=self.augment_translate, aug_hflip=self.augment_hflip,
            aug_noise=self.augment_noise,
        )
        if self.mode == "supervised" and self.match_steps:
            cfg.epochs = matched_epochs(cfg, n_all, n_labeled)
        return cfg

    def fit(self, X, y):
        X, y = check_X_y(X, y, allow_nd=True, dtype=np.float64)
        if X.ndim not in (2, 4):
            raise ValueError(f"X must be 2-D or 4-D, got {X.ndim}-D")
        labeled = y != UNLABELED
        if not labeled.any():
            raise ValueError("y has no labeled rows (all -1)")
        self.classes_ = unique_labels(y[labeled])
        encoded = np.searchsorted(self.classes_, y[labeled])
        C = len(self.classes_)
        if C < 2:
            raise ValueError("need at least two classes among the labeled rows")
        self.n_features_in_ = int(np.prod(X.shape[1:]))

        train = Dataset(X[labeled].astype(self.dtype), encoded, C)
        if self.mode == "ssl":
            unlabeled = X.astype(self.dtype)
        elif self.mode == "asl":
            unlabeled = train.inputs
        else:
            unlabeled = X[:0].astype(self.dtype)
        split = SplitDataset(train, unlabeled, None, self.mode, np.flatnonzero(labeled))
        if X.ndim == 2:
            spec = mlp_spec(C, X.shape[1], tuple(self.hidden), dropout=self.dropout, dtype=self.dtype)
        else:
            spec = convnet_spec(C, X.shape[1:], tuple(self.widths), dropout=self.dropout, dtype=self.dtype)
        cfg = self._train_config(len(X), int(labeled.sum()))
        self.model_, self.metrics_ = train_sesemi(split, spec, cfg)
        return self

    def _inputs(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, allow_nd=True, dtype=np.float64)
        if tuple(X.shape[1:]) != tuple(self.model_.spec.input_shape):
            raise ValueError(
                f"X has per-row shape {X.shape[1:]}, model expects {tuple(self.model_.spec.input_shape)}"
            )
        return X.astype(self.dtype)

    def decision_function(self, X):
        """Supervised-head logits, shape ``(n, n_classes)``."""
        X = self._inputs(X)
        self.model_.eval()
        return self.model_.predict_logits(X)

    def predict_proba(self, X):
        return softmax(self.decision_function(X))

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]


class GlobalContrastNormalizer(TransformerMixin, BaseEstimator):
    """Per-row mean removal and unit L2 norm.  Stateless; ``fit`` only validates."""

    def fit(self, X, y=None):
        X = check_array(X, allow_nd=True)
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, allow_nd=True, dtype=np.float64)
        return gcn(X.reshape(len(X), -1)).reshape(X.shape)


class ZCAWhitener(TransformerMixin, BaseEstimator):
    """ZCA whitening fitted on training rows; 4-D inputs are flattened per row."""

    def __init__(self, epsilon=1e-2):
        self.epsilon = epsilon

    def fit(self, X, y=None):
        X = check_array(X, allow_nd=True, dtype=np.float64)
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        self.state_ = zca_fit(X.reshape(len(X), -1), self.epsilon)
        return self

    def transform(self, X):
        check_is_fitted(self, "state_")
        X = check_array(X, allow_nd=True, dtype=np.float64)
        return zca_apply(self.state_, X.reshape(len(X), -1)).reshape(X.shape)
