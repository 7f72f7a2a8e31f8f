"""Merging of weighted point masses with roundoff-tolerant coordinates."""

from __future__ import annotations

import numpy as np

MERGE_RTOL = 1e-12


def merge_atoms(points: np.ndarray, weights: np.ndarray,
                rtol: float = MERGE_RTOL) -> tuple[np.ndarray, np.ndarray]:
    """Combine atoms whose coordinates agree within ``rtol * max(1, |y|)``.

    Parameters
    ----------
    points : (m, n) float array
    weights : (m,) complex array

    Returns
    -------
    points, weights
        Lexicographically sorted, merged, with exactly-zero weights dropped.
    """
    points = np.asarray(points, dtype=float)
    weights = np.asarray(weights, dtype=complex)
    if points.ndim == 1:
        points = points[:, None]
    if points.shape[0] != weights.shape[0]:
        raise ValueError("points and weights differ in length")
    if points.shape[0] == 0:
        return points.reshape(0, points.shape[1]), weights.reshape(0)
    if not (np.all(np.isfinite(points)) and np.all(np.isfinite(weights))):
        raise ValueError("atoms must be finite")
    order = np.lexsort(points.T[::-1])
    points = points[order]
    weights = weights[order]
    gap = np.abs(np.diff(points, axis=0))
    close = np.all(gap <= rtol * np.maximum(1.0, np.abs(points[1:])), axis=1)
    # each run of mutually close neighbours becomes one atom
    group = np.concatenate([[0], np.cumsum(~close)])
    merged_w = np.zeros(group[-1] + 1, dtype=complex)
    np.add.at(merged_w, group, weights)
    first = np.concatenate([[True], ~close])
    merged_p = points[first]
    keep = merged_w != 0
    return merged_p[keep], merged_w[keep]


def cluster(values: np.ndarray, rtol: float = MERGE_RTOL) -> tuple[np.ndarray, np.ndarray]:
    """Group 1-D values that agree within ``rtol * max(1, |v|)``.

    Returns the sorted representatives and, for every input, the index of
    its group.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return values.copy(), np.zeros(0, dtype=int)
    order = np.argsort(values, kind="stable")
    v = values[order]
    close = np.abs(np.diff(v)) <= rtol * np.maximum(1.0, np.abs(v[1:]))
    group_sorted = np.concatenate([[0], np.cumsum(~close)])
    inverse = np.empty_like(group_sorted)
    inverse[order] = group_sorted
    reps = v[np.concatenate([[True], ~close])]
    return reps, inverse
