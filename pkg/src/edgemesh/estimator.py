"""Scikit-learn style estimators wrapping the reconstruction pipeline.

``EdgeDistanceRegressor`` is a conventional fit/predict regressor over edge
embeddings. ``MeshReconstructor`` composes the whole pipeline: fit on
(cloud, mesh) pairs, then predict a triangle mesh for a new cloud. Both
expose ``get_params``/``set_params`` so they compose with sklearn tooling
(grid search over ``distance_threshold``, cloning, pipelines).
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .assembly import AssemblyConfig, AssemblyDiagnostics, reconstruct
from .embedding import symmetric_embedding
from .geometry import PointCloud, TriMesh
from .labels import TrainingSet, build_training_set, merge_training_sets
from .network import (
    Architecture,
    TrainConfig,
    predict_batch,
    train,
)


class EdgeDistanceRegressor(BaseEstimator, RegressorMixin):
    """MLP regressor from edge embeddings to edge-to-surface distances.

    X rows are flattened local neighbor coordinates (length 3n). When
    ``embedding="canonical"`` the symmetric twin of each row is derived by
    flipping the x/y coordinates; with ``embedding="raw"`` the twin is the row
    itself. Predictions are clamped to be non-negative.
    """

    def __init__(
        self,
        feature_widths=(256, 256, 256),
        head_widths=(128, 64),
        learning_rate=1e-5,
        lr_decay=0.3,
        milestones=None,
        batch_size=256,
        epochs=200,
        seed=0,
        embedding="canonical",
    ):
        self.feature_widths = feature_widths
        self.head_widths = head_widths
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.milestones = milestones
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.embedding = embedding

    def _twin(self, X: np.ndarray) -> np.ndarray:
        if self.embedding == "canonical":
            return symmetric_embedding(X)
        if self.embedding == "raw":
            return X.copy()
        raise ValueError(f"embedding must be 'canonical' or 'raw', got {self.embedding!r}")

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            lr_decay=self.lr_decay,
            milestones=None if self.milestones is None else tuple(self.milestones),
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
        )

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if X.ndim != 2 or len(X) != len(y):
            raise ValueError("X must be (n_samples, n_features) matching y")
        dataset = TrainingSet(
            edges=np.zeros((len(y), 2), dtype=np.int64) + [0, 1],
            embeddings=X,
            embeddings_sym=self._twin(X),
            labels=y,
            meta={"source": "EdgeDistanceRegressor.fit"},
        )
        return self.fit_training_set(dataset)

    def fit_training_set(self, dataset: TrainingSet):
        """Fit from a prebuilt :class:`TrainingSet` (stored embedding pairs)."""
        arch = Architecture(
            input_dim=dataset.dim,
            feature_widths=tuple(self.feature_widths),
            head_widths=tuple(self.head_widths),
        )
        self.params_, self.loss_history_ = train(dataset, self._train_config(), arch=arch)
        self.n_features_in_ = dataset.dim
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "params_"):
            raise NotFittedError("fit this regressor before calling predict")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"X must have shape (n, {self.n_features_in_})")
        return predict_batch(self.params_, X, self._twin(X))


class MeshReconstructor(BaseEstimator):
    """End-to-end estimator: fit on (cloud, ground-truth mesh) pairs, then
    turn new clouds into triangle meshes.

    Clouds and meshes must already live in unit-cube-normalized coordinates
    (see :func:`edgemesh.geometry.normalize_cloud`), otherwise the distance
    threshold and the learned scale are meaningless.
    """

    def __init__(
        self,
        k_neighbors=32,
        patch_size=50,
        distance_threshold=0.014,
        length_factor=1.5,
        ring_max=8,
        circumball_filter=True,
        canonical=True,
        regressor=None,
        max_train_samples=None,
        seed=0,
    ):
        self.k_neighbors = k_neighbors
        self.patch_size = patch_size
        self.distance_threshold = distance_threshold
        self.length_factor = length_factor
        self.ring_max = ring_max
        self.circumball_filter = circumball_filter
        self.canonical = canonical
        self.regressor = regressor
        self.max_train_samples = max_train_samples
        self.seed = seed

    def _make_regressor(self) -> EdgeDistanceRegressor:
        from sklearn.base import clone

        if self.regressor is None:
            reg = EdgeDistanceRegressor(seed=self.seed)
        else:
            reg = clone(self.regressor)
        reg.set_params(embedding="canonical" if self.canonical else "raw")
        return reg

    def fit(self, clouds, meshes):
        """Label candidate edges of every cloud against its mesh and train."""
        if isinstance(clouds, PointCloud):
            clouds, meshes = [clouds], [meshes]
        if len(clouds) != len(meshes) or not clouds:
            raise ValueError("need matching, non-empty cloud/mesh lists")
        sets = [
            build_training_set(
                cloud, mesh, k=self.k_neighbors, n=self.patch_size, canonical=self.canonical
            )
            for cloud, mesh in zip(clouds, meshes)
        ]
        dataset = merge_training_sets(sets) if len(sets) > 1 else sets[0]
        if self.max_train_samples is not None:
            dataset = dataset.subsample(self.max_train_samples, seed=self.seed)
        self.regressor_ = self._make_regressor().fit_training_set(dataset)
        self.train_samples_ = len(dataset)
        return self

    def assembly_config(self) -> AssemblyConfig:
        return AssemblyConfig(
            distance_threshold=self.distance_threshold,
            length_factor=self.length_factor,
            ring_max=self.ring_max,
            circumball_filter=self.circumball_filter,
        )

    def reconstruct(self, cloud: PointCloud) -> tuple[TriMesh, AssemblyDiagnostics]:
        if not hasattr(self, "regressor_"):
            raise NotFittedError("fit this reconstructor before reconstructing")
        params = self.regressor_.params_

        def scorer(edges, emb, emb_sym):
            return predict_batch(params, emb, emb_sym)

        return reconstruct(
            cloud,
            scorer,
            self.assembly_config(),
            k_neighbors=self.k_neighbors,
            patch_size=self.patch_size,
            canonical=self.canonical,
        )

    def predict(self, cloud: PointCloud) -> TriMesh:
        """Alias for :meth:`reconstruct`, returning just the mesh."""
        return self.reconstruct(cloud)[0]
