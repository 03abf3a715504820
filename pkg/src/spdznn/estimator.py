"""scikit-learn style front end for secure training and inference."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import numtheory as nt
from .fixedpoint import FxParams, fx_decode, fx_encode, signed
from .training import (LayerSpec, PlainModel, TrainConfig, predict_session, train_session)


class SecureMLPClassifier(ClassifierMixin, BaseEstimator):
    """A ReLU multilayer perceptron trained by n parties on secret-shared data.

    Training runs every party in-process over the simulated network (or
    loopback TCP) with preprocessing from a seeded dealer. Features must lie
    strictly inside the fixed-point range (|x| < 2^(e-1)).

    Args:
        hidden: sizes of the hidden layers.
        epochs: passes over the training set.
        batch_size: mini-batch size.
        lr_shift: learning rate 2^-lr_shift (summed, not averaged, gradients).
        dropout: drop probability after each hidden ReLU (0 disables).
        n_parties: number of computing parties.
        e, f, kappa: fixed-point integer bits, fraction bits, statistical
            security parameter; Q is the next prime above 2^(e+f+kappa+11).
        transport: "sim" or "tcp".
        seed: seeds weights, parties, the dealer and the row order.
        shuffle: permute the training rows once before training. Batches of
            a class-sorted set otherwise hold a single class.
        secure_predict: run predict as a secure session (else evaluate the
            opened fixed-point model in the clear).
    """

    def __init__(self, hidden=(8,), epochs=5, batch_size=20, lr_shift=5, dropout=0.0,
                 n_parties=3, e=4, f=8, kappa=8, transport="sim", seed=0,
                 secure_predict=True, shuffle=True):
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr_shift = lr_shift
        self.dropout = dropout
        self.n_parties = n_parties
        self.e = e
        self.f = f
        self.kappa = kappa
        self.transport = transport
        self.seed = seed
        self.secure_predict = secure_predict
        self.shuffle = shuffle

    def _params(self) -> FxParams:
        Q = nt.next_prime(2 ** (self.e + self.f + self.kappa + 11))
        return FxParams(self.e, self.f, Q, self.kappa).validate()

    def _config(self, n_features: int, n_classes: int) -> TrainConfig:
        sizes = [n_features, *self.hidden, n_classes]
        layers = []
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            layers.append(LayerSpec("linear", (a, b)))
            if i < len(sizes) - 2:
                layers.append(LayerSpec("relu"))
                if self.dropout:
                    layers.append(LayerSpec("dropout", (float(self.dropout),)))
        return TrainConfig(layers, self.epochs, self.batch_size, self.lr_shift, self.seed)

    def _check_range(self, X) -> None:
        bound = 2.0 ** (self.e - 1)
        if np.any(np.abs(X) >= bound):
            raise ValueError(f"features must satisfy |x| < {bound} for e={self.e}")

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        check_classification_targets(y)
        self._check_range(X)
        if self.transport not in ("sim", "tcp"):
            raise ValueError("transport must be 'sim' or 'tcp'")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        self.n_features_in_ = X.shape[1]
        if self.shuffle:
            order = np.random.default_rng(self.seed).permutation(len(X))
            X, y_idx = X[order], y_idx[order]
        params = self._params()
        config = self._config(X.shape[1], len(self.classes_))
        session, metrics, weights = train_session(
            X, y_idx, len(self.classes_), config, params, n=self.n_parties, seed=self.seed,
            transport=self.transport)
        self.params_, self.config_ = params, config
        self.weights_ = weights
        self.metrics_ = metrics
        self.rounds_ = session.rounds
        self.coefs_ = [None if w is None else (fx_decode(w[0], params), fx_decode(w[1], params))
                       for w in weights]
        return self

    def predict(self, X):
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        self._check_range(X)
        if self.secure_predict:
            idx = predict_session(X, self.weights_, self.config_, self.params_,
                                  n=self.n_parties, seed=self.seed)
        else:
            idx = self._plain_model().predict(_encode_signed(X, self.params_))
        return self.classes_[np.asarray(idx, dtype=int)]

    def decision_function(self, X):
        """Fixed-point logits of the opened model, evaluated in the clear."""
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=np.float64)
        self._check_range(X)
        logits = self._plain_model().forward(_encode_signed(X, self.params_), train=False)
        return np.vectorize(float)(logits) / 2.0 ** self.f

    def _plain_model(self) -> PlainModel:
        model = PlainModel(self.config_, self.params_)
        model.weights = [None if w is None else [signed(w[0], self.params_.Q),
                                                  signed(w[1], self.params_.Q)]
                         for w in self.weights_]
        return model


def _encode_signed(X, params: FxParams):
    return signed(fx_encode(X, params), params.Q)
