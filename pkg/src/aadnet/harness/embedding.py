"""Two-dimensional PCA view of the network's hidden-layer markers."""

from __future__ import annotations

import numpy as np

from ..baselines.pca import fit_pca
from ..model import network
from .training import EVAL_BATCH, as_network_input


def hidden_markers(params, x, batch=EVAL_BATCH):
    """Hidden-layer (64-unit) outputs in inference mode, one row per window."""
    x = as_network_input(x)
    chunks = [network.forward(params, x[i : i + batch], stop_at="hidden")[0]
              for i in range(0, len(x), batch)]
    return np.concatenate(chunks)


def export_embedding(params, x, labels, q=2):
    """Return ``(points (n, 2), labels, pca_model)`` for scatter plotting."""
    markers = hidden_markers(params, x)
    model = fit_pca(markers, q)
    return model.project(markers), np.asarray(labels), model


def class_separation(points, labels):
    """(centroid distance, mean within-class radius) of a labelled 2-D point cloud."""
    labels = np.asarray(labels)
    cents = [points[labels == c].mean(axis=0) for c in (0, 1)]
    radius = np.mean(np.concatenate([
        np.linalg.norm(points[labels == c] - cents[c], axis=1) for c in (0, 1)
    ]))
    return float(np.linalg.norm(cents[0] - cents[1])), float(radius)
