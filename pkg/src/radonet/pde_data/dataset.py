"""Dataset assembly and the on-disk dataset container.

A dataset is a directory holding a JSON manifest (problem, seed, counts,
generation parameters, format version) plus one little-endian .npy file per
split and array. Generation is deterministic: every sample draws from its
own seed substream, so rebuilding with the same seed reproduces the files
byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..nn import substream
from .advection import BoxWaveParams, advection_exact, encode_box_params, sample_box_params
from .burgers import burgers_solve
from .grf import grf_draw, grf_eval
from .riemann import euler_riemann_exact, sod_params_sample, total_energy

DATASET_VERSION = 1

_DEFAULTS: dict[str, dict] = {
    "advection": {
        "n_grid": 2048,
        "speed": 1.0,
        "final_time": 0.25,
        "period": 1.0,
        "height_range": (0.2, 0.8),
        "width_range": (0.05, 0.3),
        "shift_range": (0.0, 0.5),
    },
    "burgers": {
        "nu": 1e-3,
        "n_modes": 256,
        "dt": 1e-4,
        "sensors": 128,
        "final_time": 1.0,
        "grf_convention": "angular",
        "grf_modes": 63,
        "record_times": None,
    },
    "sod": {
        "n_grid": 2048,
        "domain": (-5.0, 5.0),
        "final_time": 1.5,
    },
}


@dataclass
class PdeDataset:
    """One split of generated operator data."""

    problem: str
    split: str
    inputs: np.ndarray
    outputs: np.ndarray
    x_grid: np.ndarray
    seed: int
    params: dict
    t_grid: np.ndarray | None = None

    def __post_init__(self):
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise ValueError(
                f"inputs ({self.inputs.shape[0]}) and outputs "
                f"({self.outputs.shape[0]}) disagree on sample count"
            )

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]


def _merge_params(problem: str, overrides: dict | None) -> dict:
    if problem not in _DEFAULTS:
        raise ValueError(f"unknown problem {problem!r}, expected one of {sorted(_DEFAULTS)}")
    params = dict(_DEFAULTS[problem])
    for key, value in (overrides or {}).items():
        if key not in params:
            raise ValueError(f"unknown {problem} parameter {key!r}")
        params[key] = value
    return params


def _build_advection(seed: int, split: str, n: int, p: dict) -> PdeDataset:
    x = np.arange(p["n_grid"]) / p["n_grid"] * p["period"]
    inputs = np.empty((n, 3))
    outputs = np.empty((n, p["n_grid"]))
    for i in range(n):
        rng = substream(seed, "advection", split, str(i))
        params = sample_box_params(rng, p["height_range"], p["width_range"], p["shift_range"])
        inputs[i] = encode_box_params(params)
        outputs[i] = advection_exact(params, x, p["speed"], p["final_time"], p["period"])
    return PdeDataset("advection", split, inputs, outputs, x, seed, p)


def _build_burgers(seed: int, split: str, n: int, p: dict) -> PdeDataset:
    solver_grid = np.arange(p["n_modes"]) / p["n_modes"]
    sensor_grid = np.arange(p["sensors"]) / p["sensors"]
    inputs = np.empty((n, p["sensors"]))
    u0 = np.empty((n, p["n_modes"]))
    for i in range(n):
        rng = substream(seed, "burgers", split, str(i))
        coeffs = grf_draw(rng, p["grf_modes"], p["grf_convention"])
        inputs[i] = grf_eval(coeffs, sensor_grid)
        u0[i] = grf_eval(coeffs, solver_grid)
    record = p["record_times"]
    if record is None:
        outputs = burgers_solve(u0, p["nu"], p["final_time"], dt=p["dt"])
        t_grid = None
    else:
        t_grid, outputs = burgers_solve(u0, p["nu"], p["final_time"], dt=p["dt"],
                                        record_times=np.asarray(record, dtype=np.float64))
    return PdeDataset("burgers", split, inputs, outputs, solver_grid, seed, p, t_grid=t_grid)


def _build_sod(seed: int, split: str, n: int, p: dict) -> PdeDataset:
    lo, hi = p["domain"]
    x = np.linspace(lo, hi, p["n_grid"])
    inputs = np.empty((n, 6))
    outputs = np.empty((n, p["n_grid"]))
    for i in range(n):
        rng = substream(seed, "sod", split, str(i))
        z, state = sod_params_sample(rng)
        inputs[i] = z
        rho, u, pres = euler_riemann_exact(state, x, p["final_time"])
        outputs[i] = total_energy(rho, u, pres, state.gamma)
    return PdeDataset("sod", split, inputs, outputs, x, seed, p)


_BUILDERS = {"advection": _build_advection, "burgers": _build_burgers, "sod": _build_sod}


def dataset_build(problem: str, seed: int, counts: dict[str, int],
                  params: dict | None = None) -> dict[str, PdeDataset]:
    """Generate every requested split of a problem deterministically."""
    merged = _merge_params(problem, params)
    if not counts:
        raise ValueError("need at least one split count")
    out = {}
    for split, n in counts.items():
        if n < 1:
            raise ValueError(f"split {split!r} needs a positive sample count, got {n}")
        out[split] = _BUILDERS[problem](seed, split, int(n), merged)
    return out


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, (tuple, list, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def save_dataset(path, datasets: dict[str, PdeDataset]) -> None:
    """Write splits as .npy arrays plus a manifest.json describing them."""
    if not datasets:
        raise ValueError("no splits to save")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    first = next(iter(datasets.values()))
    manifest = {
        "format_version": DATASET_VERSION,
        "problem": first.problem,
        "seed": first.seed,
        "params": _jsonable(first.params),
        "splits": {},
    }
    np.save(out / "x_grid.npy", np.ascontiguousarray(first.x_grid, dtype="<f8"))
    if first.t_grid is not None:
        np.save(out / "t_grid.npy", np.ascontiguousarray(first.t_grid, dtype="<f8"))
        manifest["t_grid"] = "t_grid.npy"
    for split, ds in datasets.items():
        if ds.problem != first.problem or ds.seed != first.seed:
            raise ValueError("all splits in a dataset must share problem and seed")
        np.save(out / f"inputs_{split}.npy", np.ascontiguousarray(ds.inputs, dtype="<f8"))
        np.save(out / f"outputs_{split}.npy", np.ascontiguousarray(ds.outputs, dtype="<f8"))
        manifest["splits"][split] = {"n_samples": int(ds.n_samples)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_dataset(path) -> dict[str, PdeDataset]:
    """Re-load every split from a dataset directory."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise ValueError(f"{root}: not a dataset directory (missing manifest.json)")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format_version") != DATASET_VERSION:
        raise ValueError(
            f"{root}: dataset format version {manifest.get('format_version')} unsupported"
        )
    x_grid = np.load(root / "x_grid.npy")
    t_grid = np.load(root / "t_grid.npy") if "t_grid" in manifest else None
    out = {}
    for split in manifest["splits"]:
        out[split] = PdeDataset(
            problem=manifest["problem"],
            split=split,
            inputs=np.load(root / f"inputs_{split}.npy"),
            outputs=np.load(root / f"outputs_{split}.npy"),
            x_grid=x_grid,
            seed=int(manifest["seed"]),
            params=manifest["params"],
            t_grid=t_grid,
        )
    return out
