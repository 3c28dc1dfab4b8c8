import numpy as np
import pytest

from radonet.models import (
    DeepOnetModel,
    RAdaptiveSystem,
    ShiftDeepOnetModel,
    deeponet_backward_batch,
    deeponet_eval,
    deeponet_forward_batch,
    load_bundle,
    radaptive_predict_graph,
    save_bundle,
    shift_backward_batch,
    shift_deeponet_eval,
    shift_forward_batch,
)
from radonet.nn import mlp_init, substream

from oracles import (
    deeponet_forward_loops,
    flat_grad_rel_error,
    numerical_gradient,
    shift_forward_loops,
)


def make_deeponet(n_in=3, n_basis=5, d=1, seed=0, lo=0.0, hi=1.0):
    branch = mlp_init([n_in, 10, n_basis], activation="tanh", seed=seed)
    trunk = mlp_init([d, 10, n_basis], activation="relu", seed=seed + 1)
    return DeepOnetModel(branch=branch, trunk=trunk, n_basis=n_basis,
                         query_lo=[lo] * d, query_hi=[hi] * d)


def make_shift(n_in=3, n_basis=4, d=1, seed=0):
    branch = mlp_init([n_in, 8, n_basis], activation="tanh", seed=seed)
    trunk = mlp_init([d, 8, n_basis], activation="tanh", seed=seed + 1)
    scale = mlp_init([n_in, 8, n_basis * d * d], activation="tanh", seed=seed + 2)
    shift = mlp_init([n_in, 8, n_basis * d], activation="tanh", seed=seed + 3)
    return ShiftDeepOnetModel(branch=branch, trunk=trunk, scale_net=scale,
                              shift_net=shift, n_basis=n_basis,
                              query_lo=[0.0] * d, query_hi=[1.0] * d)


def test_deeponet_validates_sizes():
    branch = mlp_init([3, 8, 4], seed=0)
    trunk = mlp_init([1, 8, 5], seed=1)
    with pytest.raises(ValueError):
        DeepOnetModel(branch=branch, trunk=trunk, n_basis=4,
                      query_lo=[0.0], query_hi=[1.0])
    with pytest.raises(ValueError):
        DeepOnetModel(branch=mlp_init([3, 8, 5], seed=0), trunk=trunk, n_basis=5,
                      query_lo=[1.0], query_hi=[0.0])


def test_query_normalization_endpoints():
    model = make_deeponet(lo=-2.0, hi=6.0)
    qn = model.normalize_queries(np.array([[-2.0], [2.0], [6.0]]))
    np.testing.assert_allclose(qn[:, 0], [-1.0, 0.0, 1.0])


def test_deeponet_forward_matches_loop_reference():
    rng = substream(5, "don")
    for trial in range(5):
        model = make_deeponet(seed=40 + trial)
        a = rng.standard_normal((4, 3))
        q = rng.uniform(0.0, 1.0, size=(7, 1))
        pred, _ = deeponet_forward_batch(model, a, q)
        np.testing.assert_allclose(pred, deeponet_forward_loops(model, a, q),
                                   rtol=1e-12, atol=1e-12)


def test_deeponet_eval_single_input():
    model = make_deeponet(seed=2)
    a = np.array([0.5, 0.2, 0.1])
    q = np.linspace(0.0, 1.0, 9)
    single = deeponet_eval(model, a, q)
    batch, _ = deeponet_forward_batch(model, a[None, :], q.reshape(-1, 1))
    np.testing.assert_array_equal(single, batch[0])
    with pytest.raises(ValueError):
        deeponet_eval(model, a[None, :], q)


def test_deeponet_backward_matches_finite_differences():
    rng = substream(6, "don-grad")
    model = make_deeponet(n_in=2, n_basis=3, seed=77)
    a = rng.standard_normal((3, 2))
    q = rng.uniform(0.0, 1.0, size=(4, 1))
    target = rng.standard_normal((3, 4))

    pred, cache = deeponet_forward_batch(model, a, q)
    bg, tg = deeponet_backward_batch(model, cache, 2.0 * (pred - target))

    def branch_loss(p):
        probe = DeepOnetModel(branch=p, trunk=model.trunk, n_basis=model.n_basis,
                              query_lo=model.query_lo, query_hi=model.query_hi)
        out, _ = deeponet_forward_batch(probe, a, q)
        return float(np.sum((out - target) ** 2))

    def trunk_loss(p):
        probe = DeepOnetModel(branch=model.branch, trunk=p, n_basis=model.n_basis,
                              query_lo=model.query_lo, query_hi=model.query_hi)
        out, _ = deeponet_forward_batch(probe, a, q)
        return float(np.sum((out - target) ** 2))

    num_w, num_b = numerical_gradient(branch_loss, model.branch)
    assert flat_grad_rel_error(bg.weights, bg.biases, num_w, num_b) < 1e-7
    num_w, num_b = numerical_gradient(trunk_loss, model.trunk)
    assert flat_grad_rel_error(tg.weights, tg.biases, num_w, num_b) < 1e-7


def test_shift_forward_matches_loop_reference():
    rng = substream(8, "shift")
    for trial in range(3):
        model = make_shift(seed=60 + trial)
        a = rng.standard_normal((3, 3))
        q = rng.uniform(0.0, 1.0, size=(5, 1))
        pred, _ = shift_forward_batch(model, a, q)
        np.testing.assert_allclose(pred, shift_forward_loops(model, a, q),
                                   rtol=1e-11, atol=1e-11)


def test_shift_eval_single_input():
    model = make_shift(seed=13)
    a = np.array([0.1, -0.4, 0.9])
    q = np.linspace(0.0, 1.0, 6)
    single = shift_deeponet_eval(model, a, q)
    batch, _ = shift_forward_batch(model, a[None, :], q.reshape(-1, 1))
    np.testing.assert_array_equal(single, batch[0])


def test_shift_backward_matches_finite_differences():
    rng = substream(14, "shift-grad")
    model = make_shift(n_in=2, n_basis=2, seed=91)
    a = rng.standard_normal((2, 2))
    q = rng.uniform(0.0, 1.0, size=(3, 1))
    target = rng.standard_normal((2, 3))

    pred, cache = shift_forward_batch(model, a, q)
    grads = shift_backward_batch(model, cache, 2.0 * (pred - target))
    nets = ["branch", "trunk", "scale_net", "shift_net"]

    for name, g in zip(nets, grads):
        def loss(p, name=name):
            kwargs = {n: getattr(model, n) for n in nets}
            kwargs[name] = p
            probe = ShiftDeepOnetModel(n_basis=model.n_basis, query_lo=model.query_lo,
                                       query_hi=model.query_hi, **kwargs)
            out, _ = shift_forward_batch(probe, a, q)
            return float(np.sum((out - target) ** 2))

        num_w, num_b = numerical_gradient(loss, getattr(model, name))
        assert flat_grad_rel_error(g.weights, g.biases, num_w, num_b) < 1e-6, name


def test_radaptive_system_validation():
    coord = make_deeponet(seed=1)
    sol = make_deeponet(seed=2)
    xi = np.linspace(0.0, 1.0, 17)
    system = RAdaptiveSystem(coord_net=coord, sol_net=sol, xi_grid=xi)
    assert system.xi_grid.size == 17
    with pytest.raises(ValueError):
        RAdaptiveSystem(coord_net=coord, sol_net=sol, xi_grid=xi[::-1])


def test_radaptive_graph_default_and_custom_grid():
    system = RAdaptiveSystem(coord_net=make_deeponet(seed=3),
                             sol_net=make_deeponet(seed=4),
                             xi_grid=np.linspace(0.0, 1.0, 9))
    a = np.array([0.4, 0.1, 0.3])
    g_default = radaptive_predict_graph(system, a)
    assert g_default.knots.shape == (9,)
    xi_dense = np.linspace(0.0, 1.0, 33)
    g_dense = radaptive_predict_graph(system, a, xi=xi_dense)
    assert g_dense.knots.shape == (33,)
    # dense grid contains the default one every 4th point
    np.testing.assert_allclose(g_dense.knots[::4], g_default.knots, rtol=1e-12)
    np.testing.assert_allclose(g_dense.values[::4], g_default.values, rtol=1e-12)


@pytest.mark.parametrize("kind", ["deeponet", "shift", "radaptive"])
def test_bundle_roundtrip(tmp_path, kind):
    if kind == "deeponet":
        model = make_deeponet(seed=21)
    elif kind == "shift":
        model = make_shift(seed=22)
    else:
        model = RAdaptiveSystem(coord_net=make_deeponet(seed=23),
                                sol_net=make_deeponet(seed=24),
                                xi_grid=np.linspace(0.0, 1.0, 11))
    out = tmp_path / kind
    save_bundle(out, model, input_encoding="test-encoding")
    loaded = load_bundle(out)
    assert type(loaded) is type(model)
    a = np.array([0.3, 0.6, 0.2])
    q = np.linspace(0.0, 1.0, 5)
    if kind == "deeponet":
        np.testing.assert_array_equal(deeponet_eval(model, a, q),
                                      deeponet_eval(loaded, a, q))
    elif kind == "shift":
        np.testing.assert_array_equal(shift_deeponet_eval(model, a, q),
                                      shift_deeponet_eval(loaded, a, q))
    else:
        g1 = radaptive_predict_graph(model, a)
        g2 = radaptive_predict_graph(loaded, a)
        np.testing.assert_array_equal(g1.knots, g2.knots)
        np.testing.assert_array_equal(g1.values, g2.values)


def test_bundle_rejects_non_bundle_dir(tmp_path):
    with pytest.raises(ValueError):
        load_bundle(tmp_path)
