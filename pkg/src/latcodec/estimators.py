"""Scikit-learn compatible wrappers for the array-in/array-out pieces.

These let the quantizer and the compander drop into sklearn pipelines;
the coder, bitstream and codec machinery stay plain modules.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from latcodec.companding import ScalarQuantMap, build_compander
from latcodec.lattice import LatticeKind, LatticeSpec, center_of, nearest_int_coords
from latcodec.validation import check_array, check_finite_scalar


class LatticeQuantizer(TransformerMixin, BaseEstimator):
    """Quantize feature vectors on a uniform lattice.

    Columns are packed into consecutive ``ndim``-wide groups (the feature
    count must be divisible by the lattice dimension); transform returns
    the nearest-center reconstruction.
    """

    def __init__(self, kind="hex", volume=1.0):
        self.kind = kind
        self.volume = volume

    def fit(self, X=None, y=None):
        check_finite_scalar(self.volume, "volume", minimum=0.0)
        self.lattice_ = LatticeSpec(LatticeKind.from_name(self.kind), float(self.volume))
        return self

    def _check_fitted(self):
        if not hasattr(self, "lattice_"):
            raise NotFittedError("call fit before transform")

    def transform(self, X):
        self._check_fitted()
        X = check_array(X)
        v = self.lattice_.ndim
        if X.shape[1] % v:
            raise ValueError(f"feature count {X.shape[1]} not divisible by lattice dimension {v}")
        packed = X.reshape(-1, v)
        centers = center_of(nearest_int_coords(packed, self.lattice_), self.lattice_)
        return centers.reshape(X.shape)

    def quantization_error(self, X):
        """Mean squared error per scalar introduced by transform."""
        X = check_array(X)
        return float(np.mean((X - self.transform(X)) ** 2))


class CompandingQuantizer(TransformerMixin, BaseEstimator):
    """Non-uniform scalar quantizer realized through its compander.

    transform maps values to the companded (uniform) axis, inverse_transform
    maps back, and reconstruct applies the full quantize-dequantize cycle
    (identical to direct non-uniform quantization).
    """

    def __init__(self, borders=None, centers=None):
        self.borders = borders
        self.centers = centers

    def fit(self, X=None, y=None):
        if self.borders is None or self.centers is None:
            raise ValueError("borders and centers are required")
        self.map_ = ScalarQuantMap(np.asarray(self.borders, dtype=float),
                                   np.asarray(self.centers, dtype=float))
        self.compander_ = build_compander(self.map_)
        return self

    def _check_fitted(self):
        if not hasattr(self, "compander_"):
            raise NotFittedError("call fit before transform")

    def transform(self, X):
        self._check_fitted()
        return self.compander_.forward(check_array(X))

    def inverse_transform(self, X):
        self._check_fitted()
        return self.compander_.inverse(check_array(X))

    def reconstruct(self, X):
        self._check_fitted()
        return self.compander_.reconstruct(check_array(X))
