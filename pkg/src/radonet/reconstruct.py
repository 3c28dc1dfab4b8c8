"""Recover solutions on uniform grids from predicted graph knots."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GraphPrediction:
    """A discrete graph {(knots[j], values[j])} of a solution, ordered by the
    underlying computational coordinate."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.knots.shape != self.values.shape or self.knots.ndim != 1:
            raise ValueError(
                f"knots/values must be equal-length 1-d arrays, got "
                f"{self.knots.shape} and {self.values.shape}"
            )
        if self.knots.size < 2:
            raise ValueError("graph needs at least two knots")


def monotone_fix(knots: np.ndarray, domain: tuple[float, float]) -> np.ndarray:
    """Repair a predicted coordinate array into a strictly increasing mesh.

    Endpoints are pinned to the domain ends; interior knots are clipped to the
    domain and pushed apart by a cumulative-max sweep with a minimal separation
    eps = 1e-9 * domain length. Already valid input comes back unchanged.
    """
    y = np.asarray(knots, dtype=np.float64)
    lo, hi = float(domain[0]), float(domain[1])
    if y.ndim != 1 or y.size < 2:
        raise ValueError(f"knots must be a 1-d array with >= 2 entries, got shape {y.shape}")
    if not hi > lo:
        raise ValueError(f"empty domain ({lo}, {hi})")
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite knot coordinates")
    if y[0] == lo and y[-1] == hi and np.all(np.diff(y) > 0.0):
        return y
    eps = 1e-9 * (hi - lo)
    z = np.clip(y, lo, hi)
    z[0] = lo
    z[-1] = hi
    for i in range(1, z.size):
        if z[i] <= z[i - 1]:
            z[i] = z[i - 1] + eps
    # if the forward sweep overshot the right endpoint, sweep back down
    z[-1] = hi
    for i in range(z.size - 2, 0, -1):
        if z[i] >= z[i + 1]:
            z[i] = z[i + 1] - eps
    if not np.all(np.diff(z) > 0.0):
        raise ValueError("could not build a strictly increasing mesh (grid too large for eps)")
    return z


def interp_linear_1d(knots: np.ndarray, values: np.ndarray, queries: np.ndarray,
                     mode: str = "strict") -> np.ndarray:
    """Piecewise-linear interpolation on strictly increasing knots.

    mode controls out-of-range queries: "strict" raises, "clamp" holds the
    end values, "wrap" reduces queries into the knot span periodically.
    """
    x = np.asarray(knots, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    q = np.asarray(queries, dtype=np.float64)
    if x.ndim != 1 or x.shape != v.shape or x.size < 2:
        raise ValueError("knots/values must be equal-length 1-d arrays with >= 2 entries")
    if not np.all(np.diff(x) > 0.0):
        raise ValueError("knots must be strictly increasing")
    if mode == "wrap":
        span = x[-1] - x[0]
        q = x[0] + np.mod(q - x[0], span)
    elif mode == "strict":
        if q.size and (q.min() < x[0] or q.max() > x[-1]):
            raise ValueError(
                f"query outside knot range [{x[0]}, {x[-1]}]: "
                f"[{q.min()}, {q.max()}]"
            )
    elif mode != "clamp":
        raise ValueError(f"unknown mode {mode!r}")
    return np.interp(q, x, v)


def recover_uniform(graph: GraphPrediction, target_grid: np.ndarray,
                    domain: tuple[float, float], mode: str = "clamp") -> np.ndarray:
    """Turn a predicted graph into solution values on a fixed grid.

    Applies monotone_fix to the knots, then interpolates linearly. Queries
    outside the domain follow `mode` ("clamp" for bounded problems, "wrap"
    for periodic ones).
    """
    y = monotone_fix(graph.knots, domain)
    return interp_linear_1d(y, graph.values, target_grid, mode=mode)


def recover_spacetime(slices: list[GraphPrediction], slice_times: np.ndarray,
                      x_grid: np.ndarray, t_grid: np.ndarray,
                      domain: tuple[float, float], mode: str = "clamp") -> np.ndarray:
    """Recover a space-time field from per-time-slice graphs.

    Each slice is recovered onto x_grid, then values are linearly
    interpolated in time onto t_grid. Returns an array of shape
    (len(t_grid), len(x_grid)). A single slice gives a t-constant field.
    """
    times = np.asarray(slice_times, dtype=np.float64)
    if times.ndim != 1 or times.size != len(slices):
        raise ValueError(f"got {len(slices)} slices but {times.size} slice times")
    if times.size > 1 and not np.all(np.diff(times) > 0.0):
        raise ValueError("slice times must be strictly increasing")
    per_slice = np.stack([recover_uniform(g, x_grid, domain, mode=mode) for g in slices])
    t = np.asarray(t_grid, dtype=np.float64)
    if times.size == 1:
        return np.repeat(per_slice, t.size, axis=0)
    if t.min() < times[0] - 1e-12 or t.max() > times[-1] + 1e-12:
        raise ValueError(
            f"target times [{t.min()}, {t.max()}] outside slice span "
            f"[{times[0]}, {times[-1]}]"
        )
    out = np.empty((t.size, per_slice.shape[1]))
    for j in range(per_slice.shape[1]):
        out[:, j] = np.interp(t, times, per_slice[:, j])
    return out


def rel_l2_error(predictions: np.ndarray, references: np.ndarray) -> float:
    """Mean over samples of ||pred - ref|| / ||ref|| in the discrete RMS norm.

    Accepts (n_samples, ...) arrays; each sample's field is flattened. A
    reference with zero norm is rejected.
    """
    pred = np.asarray(predictions, dtype=np.float64)
    ref = np.asarray(references, dtype=np.float64)
    if pred.shape != ref.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {ref.shape}")
    if pred.ndim < 2:
        raise ValueError("expected (n_samples, ...) arrays")
    p = pred.reshape(pred.shape[0], -1)
    r = ref.reshape(ref.shape[0], -1)
    ref_norm = np.sqrt(np.mean(r * r, axis=1))
    if np.any(ref_norm == 0.0):
        raise ValueError("reference sample with zero norm")
    err_norm = np.sqrt(np.mean((p - r) ** 2, axis=1))
    return float(np.mean(err_norm / ref_norm))
