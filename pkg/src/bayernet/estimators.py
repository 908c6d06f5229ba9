"""scikit-learn style wrappers around the mosaicking and demosaicking steps.

Images are passed as lists (sizes may differ) or as a single array; a single
array in gives a single array out.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .hqli import hqli
from .image import BayerLayout, clip, mean_psnr, mosaic, psnr_report
from .nn import network as N
from .pipeline import DemosaicModel, demosaic_batch
from .train import TrainConfig, build_dataset, train
from .validation import check_mosaic_list, check_rgb_list


class BayerMosaicker(TransformerMixin, BaseEstimator):
    """Sample RGB images through a Bayer CFA; the output is the 2-D CFA plane."""

    def __init__(self, layout="RGGB"):
        self.layout = layout

    def fit(self, X=None, y=None):
        self.layout_ = BayerLayout.parse(self.layout)
        return self

    def transform(self, X):
        layout = BayerLayout.parse(self.layout)
        single = isinstance(X, np.ndarray) and X.ndim == 3
        out = [mosaic(im, layout).cfa for im in check_rgb_list(X)]
        return out[0] if single else out


class HQLIDemosaicker(TransformerMixin, BaseEstimator):
    """Linear interpolation baseline (no learned parameters).

    Parameters
    ----------
    layout : str
        Bayer layout of the incoming CFA planes.
    method : {"hqli", "bilinear"}
    clip : bool
        Clip the output to [0, 255].
    """

    def __init__(self, layout="RGGB", method="hqli", clip=True):
        self.layout = layout
        self.method = method
        self.clip = clip

    def fit(self, X=None, y=None):
        self.layout_ = BayerLayout.parse(self.layout)
        return self

    def transform(self, X):
        single = isinstance(X, np.ndarray) and X.ndim == 2
        out = []
        for m in check_mosaic_list(X, self.layout):
            rgb = np.stack(hqli(m, method=self.method), axis=-1)
            out.append(clip(rgb) if self.clip else rgb)
        return out[0] if single else out

    predict = transform


class ChannelDemosaicker(BaseEstimator):
    """Residual CNN demosaicker: one network per green / green-red / green-blue plane.

    ``fit`` takes ground-truth RGB images, simulates their Bayer mosaics and
    trains the three networks independently.  ``predict`` maps CFA planes to
    RGB images.

    Parameters
    ----------
    layout : str
        Bayer layout used for training and assumed for bare CFA planes.
    architecture : {"default", "reduced"}
        Full-size networks, or plain ``hidden``-layer networks of ``width``
        channels for desk-scale experiments.
    hidden, width : int
        Size of the reduced architecture.
    epochs, batch_size, learning_rate, patch_size, discard, train_fraction
        Training settings; see :class:`bayernet.train.TrainConfig`.
    dtype : str
        Floating point type used while training.
    random_state : int
        Seed for shuffling and initialisation.
    """

    def __init__(
        self,
        layout="RGGB",
        architecture="default",
        hidden=3,
        width=32,
        epochs=30,
        batch_size=128,
        learning_rate=0.005,
        patch_size=50,
        discard=1792,
        train_fraction=0.95,
        dtype="float32",
        random_state=0,
    ):
        self.layout = layout
        self.architecture = architecture
        self.hidden = hidden
        self.width = width
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.patch_size = patch_size
        self.discard = discard
        self.train_fraction = train_fraction
        self.dtype = dtype
        self.random_state = random_state

    def _specs(self):
        if self.architecture == "default":
            return {n: N.default_spec(n) for n in N.NETWORK_NAMES}
        if self.architecture == "reduced":
            return {n: N.reduced_spec(n, self.hidden, self.width) for n in N.NETWORK_NAMES}
        raise ValueError(f"unknown architecture {self.architecture!r}")

    def _config(self) -> TrainConfig:
        lr = float(self.learning_rate)
        return TrainConfig(
            batch_size=self.batch_size,
            initial_lr=lr,
            lr_floor=lr / 64,
            epochs=self.epochs,
            seed=self.random_state,
            layout=BayerLayout.parse(self.layout).value,
            patch_size=self.patch_size,
            train_fraction=self.train_fraction,
            discard=self.discard,
            dtype=self.dtype,
        )

    def fit(self, X, y=None):
        images = check_rgb_list(X, min_size=5)
        cfg = self._config()
        specs = self._specs()
        weights, history = {}, {}
        for name in N.NETWORK_NAMES:
            tr, va = build_dataset(images, name, cfg.layout, cfg)
            result = train(specs[name], tr, va, cfg)
            weights[name] = result.weights
            history[name] = result.trace
        self.model_ = DemosaicModel(specs, weights)
        self.history_ = history
        return self

    @classmethod
    def from_model(cls, model: DemosaicModel, **params) -> "ChannelDemosaicker":
        est = cls(**params)
        est.model_ = model
        est.history_ = {}
        return est

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("ChannelDemosaicker is not fitted yet; call fit or from_model")

    def predict(self, X, n_jobs: int = 1):
        self._check_fitted()
        single = isinstance(X, np.ndarray) and X.ndim == 2
        mosaics = check_mosaic_list(X, self.layout)
        res = demosaic_batch(mosaics, self.model_, parallelism=n_jobs)
        if res.errors:
            idx, exc = next(iter(res.errors.items()))
            raise ValueError(f"image {idx} failed: {exc}") from exc
        return res.images[0] if single else res.images

    transform = predict

    def score(self, X, y=None) -> float:
        """Mean CPSNR on ground-truth RGB images mosaicked with ``layout``."""
        self._check_fitted()
        truth = check_rgb_list(X, min_size=5)
        cfas = [mosaic(t, self.layout).cfa for t in truth]
        est = self.predict(cfas)
        return mean_psnr(psnr_report(t, e).cpsnr for t, e in zip(truth, est))

    def save(self, path) -> None:
        self._check_fitted()
        self.model_.save(path)

    @classmethod
    def load(cls, path, **params) -> "ChannelDemosaicker":
        return cls.from_model(DemosaicModel.load(path), **params)
