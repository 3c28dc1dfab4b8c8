"""Branch/trunk operator networks and the two-net adaptive system.

A plain operator net predicts u(y) = sum_k branch_k(a) * trunk_k(y). The
shifted variant feeds each trunk component an affinely transformed query.
The adaptive system pairs a coordinate net (predicting mesh locations) with
a solution net (predicting values on that mesh) over a shared uniform
computational grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nn import MlpParams, mlp_backward, mlp_forward, load_checkpoint, save_checkpoint
from .reconstruct import GraphPrediction

BUNDLE_VERSION = 1


def _as_2d(arr: np.ndarray, d: int, what: str) -> np.ndarray:
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None] if d == 1 else a[None, :]
    if a.ndim != 2 or a.shape[1] != d:
        raise ValueError(f"{what} must have shape (N, {d}), got {np.shape(arr)}")
    return a


@dataclass
class DeepOnetModel:
    """Branch net encodes the input function, trunk net provides the basis."""

    branch: MlpParams
    trunk: MlpParams
    n_basis: int
    query_lo: np.ndarray
    query_hi: np.ndarray

    def __post_init__(self):
        self.query_lo = np.atleast_1d(np.asarray(self.query_lo, dtype=np.float64))
        self.query_hi = np.atleast_1d(np.asarray(self.query_hi, dtype=np.float64))
        if self.branch.layer_sizes[-1] != self.n_basis:
            raise ValueError(
                f"branch output size {self.branch.layer_sizes[-1]} != n_basis {self.n_basis}"
            )
        if self.trunk.layer_sizes[-1] != self.n_basis:
            raise ValueError(
                f"trunk output size {self.trunk.layer_sizes[-1]} != n_basis {self.n_basis}"
            )
        d = self.trunk.layer_sizes[0]
        if self.query_lo.shape != (d,) or self.query_hi.shape != (d,):
            raise ValueError(f"query bounds must have shape ({d},)")
        if not np.all(self.query_hi > self.query_lo):
            raise ValueError("query_hi must exceed query_lo componentwise")

    @property
    def d_query(self) -> int:
        return self.trunk.layer_sizes[0]

    def normalize_queries(self, queries: np.ndarray) -> np.ndarray:
        """Affine map of raw query coordinates onto [-1, 1]^d for the trunk."""
        q = _as_2d(queries, self.d_query, "queries")
        return 2.0 * (q - self.query_lo) / (self.query_hi - self.query_lo) - 1.0


def deeponet_forward_batch(model: DeepOnetModel, inputs: np.ndarray,
                           queries: np.ndarray) -> tuple[np.ndarray, tuple]:
    """Evaluate many input functions at many queries: (N1, N2) predictions."""
    a = _as_2d(inputs, model.branch.layer_sizes[0], "inputs")
    qn = model.normalize_queries(queries)
    b_out, b_cache = mlp_forward(model.branch, a)
    t_out, t_cache = mlp_forward(model.trunk, qn)
    return b_out @ t_out.T, (b_out, t_out, b_cache, t_cache)


def deeponet_backward_batch(model: DeepOnetModel, cache: tuple,
                            pred_grad: np.ndarray):
    """Backprop dLoss/dPred through the dot-product head into both nets."""
    b_out, t_out, b_cache, t_cache = cache
    branch_grads = mlp_backward(model.branch, b_cache, pred_grad @ t_out)
    trunk_grads = mlp_backward(model.trunk, t_cache, pred_grad.T @ b_out)
    return branch_grads, trunk_grads


def deeponet_eval(model: DeepOnetModel, a_enc: np.ndarray,
                  queries: np.ndarray) -> np.ndarray:
    """Predicted values of one input function at a batch of query points."""
    a = np.asarray(a_enc, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError(f"a_enc must be a single encoded input, got shape {a.shape}")
    pred, _ = deeponet_forward_batch(model, a[None, :], queries)
    return pred[0]


@dataclass
class ShiftDeepOnetModel:
    """Operator net whose trunk queries are scaled/shifted per basis function.

    scale_net maps the input encoding to n_basis (d x d) matrices A_k and
    shift_net to n_basis offsets; component k of the prediction evaluates the
    shared trunk at A_k y + gamma_k (y already normalized to [-1, 1]^d).
    """

    branch: MlpParams
    trunk: MlpParams
    scale_net: MlpParams
    shift_net: MlpParams
    n_basis: int
    query_lo: np.ndarray
    query_hi: np.ndarray

    def __post_init__(self):
        self.query_lo = np.atleast_1d(np.asarray(self.query_lo, dtype=np.float64))
        self.query_hi = np.atleast_1d(np.asarray(self.query_hi, dtype=np.float64))
        d = self.trunk.layer_sizes[0]
        n = self.n_basis
        checks = [
            (self.branch.layer_sizes[-1], n, "branch output"),
            (self.trunk.layer_sizes[-1], n, "trunk output"),
            (self.scale_net.layer_sizes[-1], n * d * d, "scale net output"),
            (self.shift_net.layer_sizes[-1], n * d, "shift net output"),
        ]
        for got, want, what in checks:
            if got != want:
                raise ValueError(f"{what} size {got} != {want}")
        if self.query_lo.shape != (d,) or self.query_hi.shape != (d,):
            raise ValueError(f"query bounds must have shape ({d},)")
        if not np.all(self.query_hi > self.query_lo):
            raise ValueError("query_hi must exceed query_lo componentwise")

    @property
    def d_query(self) -> int:
        return self.trunk.layer_sizes[0]

    def normalize_queries(self, queries: np.ndarray) -> np.ndarray:
        q = _as_2d(queries, self.d_query, "queries")
        return 2.0 * (q - self.query_lo) / (self.query_hi - self.query_lo) - 1.0


def shift_forward_batch(model: ShiftDeepOnetModel, inputs: np.ndarray,
                        queries: np.ndarray) -> tuple[np.ndarray, tuple]:
    """Batched forward pass; caches every intermediate needed for backward.

    Memory scales with N1 * n_basis * N2 trunk evaluations, so keep batches
    modest when training.
    """
    a = _as_2d(inputs, model.branch.layer_sizes[0], "inputs")
    qn = model.normalize_queries(queries)
    n1, n2, n, d = a.shape[0], qn.shape[0], model.n_basis, model.d_query

    b_out, b_cache = mlp_forward(model.branch, a)
    s_out, s_cache = mlp_forward(model.scale_net, a)
    g_out, g_cache = mlp_forward(model.shift_net, a)
    scales = s_out.reshape(n1, n, d, d)
    shifts = g_out.reshape(n1, n, d)

    # z[i, k, j, :] = scales[i, k] @ qn[j] + shifts[i, k]
    z = np.einsum("ikab,jb->ikja", scales, qn) + shifts[:, :, None, :]
    t_out, t_cache = mlp_forward(model.trunk, z.reshape(n1 * n * n2, d))
    tau = t_out.reshape(n1, n, n2, n)[:, np.arange(n), :, np.arange(n)]
    # fancy indexing puts the basis axis first: tau is (n, n1, n2)
    pred = np.einsum("ik,kij->ij", b_out, tau)
    cache = (b_out, tau, qn, b_cache, s_cache, g_cache, t_cache, (n1, n2, n, d))
    return pred, cache


def shift_backward_batch(model: ShiftDeepOnetModel, cache: tuple,
                         pred_grad: np.ndarray):
    """Gradients of a scalar loss w.r.t. all four subnetworks."""
    b_out, tau, qn, b_cache, s_cache, g_cache, t_cache, dims = cache
    n1, n2, n, d = dims
    branch_grads = mlp_backward(model.branch, b_cache, np.einsum("ij,kij->ik", pred_grad, tau))
    dtau = b_out.T[:, :, None] * pred_grad[None, :, :]  # (n, n1, n2)
    dt_out = np.zeros((n1, n, n2, n))
    kk = np.arange(n)
    dt_out[:, kk, :, kk] = dtau
    trunk_grads = mlp_backward(model.trunk, t_cache, dt_out.reshape(n1 * n * n2, n))
    dz = trunk_grads.inputs.reshape(n1, n, n2, d)
    shift_grads = mlp_backward(model.shift_net, g_cache, dz.sum(axis=2).reshape(n1, n * d))
    ds = np.einsum("ikja,jb->ikab", dz, qn)
    scale_grads = mlp_backward(model.scale_net, s_cache, ds.reshape(n1, n * d * d))
    return branch_grads, trunk_grads, scale_grads, shift_grads


def shift_deeponet_eval(model: ShiftDeepOnetModel, a_enc: np.ndarray,
                        queries: np.ndarray) -> np.ndarray:
    a = np.asarray(a_enc, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError(f"a_enc must be a single encoded input, got shape {a.shape}")
    pred, _ = shift_forward_batch(model, a[None, :], queries)
    return pred[0]


@dataclass
class RAdaptiveSystem:
    """Coordinate net + solution net sharing one uniform computational grid."""

    coord_net: DeepOnetModel
    sol_net: DeepOnetModel
    xi_grid: np.ndarray

    def __post_init__(self):
        self.xi_grid = np.asarray(self.xi_grid, dtype=np.float64)
        if self.xi_grid.ndim != 1 or self.xi_grid.size < 2:
            raise ValueError("xi_grid must be a 1-d array with >= 2 points")
        if not np.all(np.diff(self.xi_grid) > 0.0):
            raise ValueError("xi_grid must be strictly increasing")
        if self.coord_net.d_query != 1 or self.sol_net.d_query != 1:
            raise ValueError("adaptive system nets take scalar computational coordinates")


def radaptive_predict_graph(system: RAdaptiveSystem, a_enc: np.ndarray,
                            xi: np.ndarray | None = None) -> GraphPrediction:
    """Predict the solution graph {(y_j, u_j)} over a computational grid.

    Both nets are continuous in the computational coordinate, so the graph
    may be sampled on any grid, not just the one used in training; denser
    grids sharpen the recovered solution near steep features because the
    coordinate net compresses many query points into them.
    """
    if xi is None:
        xi = system.xi_grid
    y = deeponet_eval(system.coord_net, a_enc, xi)
    u = deeponet_eval(system.sol_net, a_enc, xi)
    return GraphPrediction(knots=y, values=u)


# ---------------------------------------------------------------------------
# on-disk bundles: manifest + one checkpoint per subnetwork


def _model_meta(model) -> dict:
    return {
        "n_basis": int(model.n_basis),
        "query_lo": [float(v) for v in model.query_lo],
        "query_hi": [float(v) for v in model.query_hi],
    }


def save_bundle(path, model, input_encoding: str = "", extra: dict | None = None) -> None:
    """Persist a model as a directory: manifest.json plus per-net checkpoints."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(model, DeepOnetModel):
        kind = "deeponet"
        nets = {"branch": model.branch, "trunk": model.trunk}
        meta = _model_meta(model)
    elif isinstance(model, ShiftDeepOnetModel):
        kind = "shift-deeponet"
        nets = {
            "branch": model.branch,
            "trunk": model.trunk,
            "scale": model.scale_net,
            "shift": model.shift_net,
        }
        meta = _model_meta(model)
    elif isinstance(model, RAdaptiveSystem):
        kind = "radaptive-system"
        save_bundle(out / "coord", model.coord_net, input_encoding)
        save_bundle(out / "sol", model.sol_net, input_encoding)
        np.save(out / "xi_grid.npy", np.ascontiguousarray(model.xi_grid, dtype="<f8"))
        nets = {}
        meta = {"n_xi_points": int(model.xi_grid.size)}
    else:
        raise TypeError(f"cannot bundle object of type {type(model).__name__}")
    for name, params in nets.items():
        save_checkpoint(out / f"{name}.npz", params)
    manifest = {
        "format_version": BUNDLE_VERSION,
        "kind": kind,
        "input_encoding": input_encoding,
        **meta,
        **(extra or {}),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_bundle(path):
    """Re-create a model object from a bundle directory."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise ValueError(f"{root}: not a model bundle (missing manifest.json)")
    manifest = json.loads(manifest_path.read_text())
    version = manifest.get("format_version")
    if version != BUNDLE_VERSION:
        raise ValueError(f"{root}: bundle format version {version} unsupported")
    kind = manifest.get("kind")
    if kind == "deeponet":
        return DeepOnetModel(
            branch=load_checkpoint(root / "branch.npz"),
            trunk=load_checkpoint(root / "trunk.npz"),
            n_basis=int(manifest["n_basis"]),
            query_lo=np.asarray(manifest["query_lo"], dtype=np.float64),
            query_hi=np.asarray(manifest["query_hi"], dtype=np.float64),
        )
    if kind == "shift-deeponet":
        return ShiftDeepOnetModel(
            branch=load_checkpoint(root / "branch.npz"),
            trunk=load_checkpoint(root / "trunk.npz"),
            scale_net=load_checkpoint(root / "scale.npz"),
            shift_net=load_checkpoint(root / "shift.npz"),
            n_basis=int(manifest["n_basis"]),
            query_lo=np.asarray(manifest["query_lo"], dtype=np.float64),
            query_hi=np.asarray(manifest["query_hi"], dtype=np.float64),
        )
    if kind == "radaptive-system":
        return RAdaptiveSystem(
            coord_net=load_bundle(root / "coord"),
            sol_net=load_bundle(root / "sol"),
            xi_grid=np.load(root / "xi_grid.npy"),
        )
    raise ValueError(f"{root}: unknown bundle kind {kind!r}")
