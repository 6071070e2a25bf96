"""Estimator-style wrappers around the functional API.

``RingNetwork`` treats a batch of initial conditions as samples: ``predict``
maps each row to its state at time ``T`` and ``transform`` maps states to
their bump moments.  ``InvariantMeasureEstimator`` fits an occupation
measure to one or more recorded paths.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .config import RingConfig
from .deterministic import compute_moments, integrate, stationary_bump
from .ergodics import default_edges, detect_modes, empirical_measure
from .exceptions import PreconditionError


class RingNetwork(TransformerMixin, BaseEstimator):
    """Deterministic ring network as an estimator.

    Parameters mirror :class:`RingConfig` plus the integration horizon
    ``T`` and ``method``.  ``fit`` ignores its data apart from checking the
    width; it builds ``config_``, ``connectivity_`` and, when the cue and
    coupling allow one, ``bump_``.
    """

    def __init__(self, N=2, tau=1.0, delta=0.0, j0=0.0, lshift=0.0, rshift=0.0, V=None,
                 T=50.0, method="exact_event", h=1e-3):
        self.N = N
        self.tau = tau
        self.delta = delta
        self.j0 = j0
        self.lshift = lshift
        self.rshift = rshift
        self.V = V
        self.T = T
        self.method = method
        self.h = h

    def fit(self, X=None, y=None):
        self.config_ = RingConfig(N=self.N, tau=self.tau, delta=self.delta, j0=self.j0,
                                  lshift=self.lshift, rshift=self.rshift, V=self.V)
        if X is not None:
            X = check_array(X)
            if X.shape[1] != self.N:
                raise ValueError(f"X has {X.shape[1]} columns, expected N={self.N}")
        self.n_features_in_ = self.N
        self.connectivity_ = self.config_.connectivity
        self.bump_ = None
        V = self.config_.V
        if self.config_.is_reduced and np.count_nonzero(V) == 1 and V.max() > 0:
            try:
                self.bump_ = stationary_bump(self.N, self.delta, float(V.max()),
                                             cue_index=int(np.argmax(V)))
            except PreconditionError:
                pass
        return self

    def _check(self, X):
        check_is_fitted(self, "config_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected N={self.n_features_in_}")
        return X

    def predict(self, X):
        """State at time ``T`` for each initial condition (row) of ``X``."""
        X = self._check(X)
        kw = {"h": self.h} if self.method != "exact_event" else {}
        return np.array([integrate(r0, self.T, self.config_, self.method,
                                   t_eval=[0.0, self.T], **kw).final for r0 in X])

    def transform(self, X):
        """Columns ``m_x, m_y, R, phi`` of each state."""
        X = self._check(X)
        return np.column_stack(compute_moments(X))

    def score(self, X, y=None):
        """Negative mean sup-distance of the predicted endpoints to the bump."""
        if self.bump_ is None:
            raise PreconditionError("no stationary bump for this configuration")
        end = self.predict(X)
        return -float(np.mean(np.max(np.abs(end - self.bump_.rbar), axis=1)))


class InvariantMeasureEstimator(BaseEstimator):
    """Occupation measure of switching-diffusion paths.

    ``fit`` accepts a single path or a list; measures from several paths are
    merged, so the binning must be fixed (``bins`` as edges) or derived from
    ``cfg``.
    """

    def __init__(self, cfg=None, coordinate=0, bins=100, burn_in=None, threshold=0.05):
        self.cfg = cfg
        self.coordinate = coordinate
        self.bins = bins
        self.burn_in = burn_in
        self.threshold = threshold

    def fit(self, paths, y=None):
        if not isinstance(paths, (list, tuple)):
            paths = [paths]
        if not paths:
            raise ValueError("no paths given")
        N = paths[0].states.shape[1]
        bins = self.bins
        if isinstance(bins, (int, np.integer)) and self.cfg is not None and N == 2:
            bins = [default_edges(self.cfg, k, bins=int(bins)) for k in range(N)]
        measure = None
        for p in paths:
            m = empirical_measure(p, bins=bins, burn_in=self.burn_in,
                                  coords=range(N) if N <= 3 else [self.coordinate])
            if isinstance(bins, (int, np.integer)):
                bins = m.edges
            measure = m if measure is None else measure.merge(m)
        self.measure_ = measure
        self.modes_ = detect_modes(measure, self.coordinate, threshold=self.threshold)
        return self

    def transform(self, X):
        """Marginal mass of the fitted coordinate at the bins containing ``X``."""
        check_is_fitted(self, "measure_")
        x = np.asarray(X, dtype=float).ravel()
        edges = self.measure_.edges[self.measure_.coords.index(self.coordinate)]
        marg = self.measure_.marginal(self.coordinate)
        j = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, marg.size - 1)
        return marg[j]
