import math

import numpy as np
import pytest

from ddn.domains import DomainEmbedding
from ddn.domains.schema import DomainGroup, DomainPartition, SampleRecord
from ddn.dynnet import (
    ArchSpec,
    ControllerParams,
    ConvSpec,
    DynamicNetwork,
    ExpertLayer,
    StaticLayer,
    TrainConfig,
    build_dynamic_network,
    build_static_network,
    controller_alpha,
    embedding_fingerprint,
    export_factor_vector,
    fold_layer,
    fold_network,
    load_checkpoint,
    run_training,
    save_checkpoint,
    train_ddn,
)
from ddn.numerics import (
    ActivationKind,
    Parameter,
    ShapeError,
    Tensor,
    backward,
    softmax_cross_entropy,
)
from gradcheck import assert_grads_close

TINY_ARCH = ArchSpec(convs=(ConvSpec(8, 3, 2, 1), ConvSpec(16, 3, 2, 1)),
                     hidden=32, classes=4)


def make_controller(d=4, weight=None, bias=0.0):
    w = np.zeros(d) if weight is None else np.asarray(weight, dtype=float)
    return ControllerParams(weight=Parameter(w), bias=Parameter(np.asarray(bias, dtype=float)))


# -- controller ---------------------------------------------------------------

def test_controller_zero_theta():
    assert controller_alpha(make_controller(), np.ones(4)) == 0.5


def test_controller_sigmoid_ln3():
    ctrl = make_controller(weight=[1.0, 0.0, 0.0, 0.0])
    emb = np.array([math.log(3.0), 7.0, -2.0, 11.0])
    assert abs(controller_alpha(ctrl, emb) - 0.75) < 1e-12


def test_controller_saturation():
    assert controller_alpha(make_controller(bias=30.0), np.zeros(4)) >= 1 - 1e-9


def test_controller_dim_mismatch():
    with pytest.raises(ShapeError, match="embedding"):
        controller_alpha(make_controller(d=4), np.zeros(5))


def test_controller_strictly_in_unit_interval():
    rng = np.random.default_rng(0)
    for _ in range(50):
        ctrl = make_controller(weight=rng.uniform(-3, 3, size=4), bias=rng.uniform(-10, 10))
        alpha = controller_alpha(ctrl, rng.normal(size=4))
        assert 0.0 < alpha < 1.0


# -- fold_layer ---------------------------------------------------------------

def _dense_expert_layer(experts, biases, d=4):
    controllers = [make_controller(d=d, bias=b) for b in biases]
    return ExpertLayer("dense", [Parameter(e) for e in experts],
                       Parameter(np.zeros(len(experts[0]))), controllers,
                       act=ActivationKind.IDENTITY)


def test_fold_single_expert_half():
    w = np.array([[1.0, 2.0], [3.0, 4.0]])
    layer = _dense_expert_layer([w], [0.0])
    weight, alphas = fold_layer(layer, np.zeros(4))
    np.testing.assert_allclose(weight, 0.5 * w)
    assert alphas == [0.5]


def test_fold_identical_experts_saturated_pair():
    w = np.array([[1.0, -1.0], [0.5, 2.0]])
    layer = _dense_expert_layer([w, w], [40.0, -40.0])  # alphas 1 and 0
    weight, alphas = fold_layer(layer, np.zeros(4))
    assert abs(alphas[0] + alphas[1] - 1.0) < 1e-12
    np.testing.assert_allclose(weight, w, atol=1e-15)


def test_fold_forced_quarters():
    # bias -ln3 -> alpha 0.25, +ln3 -> alpha 0.75
    e1 = np.array([[1.0, 2.0], [3.0, 4.0]])
    e2 = np.array([[0.0, 1.0], [1.0, 0.0]])
    layer = _dense_expert_layer([e1, e2], [-math.log(3.0), math.log(3.0)])
    weight, alphas = fold_layer(layer, np.zeros(4))
    np.testing.assert_allclose(alphas, [0.25, 0.75], atol=1e-12)
    np.testing.assert_allclose(weight, [[0.25, 1.25], [1.5, 1.0]], atol=1e-12)


# -- fold_network -------------------------------------------------------------

def test_fold_deterministic_bitwise():
    net = build_dynamic_network(TINY_ARCH, k=2, embed_dim=8, seed=1)
    emb = np.random.default_rng(2).normal(size=8)
    a = fold_network(net, emb)
    b = fold_network(net, emb)
    assert a.provenance.fingerprint == b.provenance.fingerprint
    for la, lb in zip(a.layers, b.layers):
        assert la.weight.tobytes() == lb.weight.tobytes()
        assert la.bias.tobytes() == lb.bias.tobytes()


def test_folded_param_count_equals_static():
    net = build_dynamic_network(TINY_ARCH, k=4, embed_dim=8, seed=1)
    static = build_static_network(TINY_ARCH, seed=9)
    folded = fold_network(net, np.zeros(8))
    assert folded.total_params == static.total_params == net.inference_params


def test_param_accounting_identity():
    d = 8
    for k in (2, 4):
        net = build_dynamic_network(TINY_ARCH, k=k, embed_dim=d, seed=0)
        static = build_static_network(TINY_ARCH, seed=0)
        dyn_weights = sum(l.experts[0].data.size for l in net.dynamic_layers())
        n_dyn = len(net.dynamic_layers())
        expected = static.total_params + (k - 1) * dyn_weights + k * (d + 1) * n_dyn
        assert net.total_params == expected


def test_fold_zeroed_second_expert_matches_static():
    net = build_dynamic_network(TINY_ARCH, k=2, embed_dim=8, seed=3)
    static = build_static_network(TINY_ARCH, seed=3)
    # expert 1 := static weights, expert 2 := 0, controller 1 saturated at 1
    for dyn_layer, static_layer in zip(net.dynamic_layers(),
                                       [l for l in static.layers if l.kind == "conv"]):
        dyn_layer.experts[0].data = static_layer.weight.data.copy()
        dyn_layer.experts[1].data = np.zeros_like(dyn_layer.experts[1].data)
        dyn_layer.controllers[0].bias.data = np.asarray(500.0)
        dyn_layer.bias.data = static_layer.bias.data.copy()
    # share the head too
    for dyn_layer, static_layer in zip(net.layers[-2:], static.layers[-2:]):
        dyn_layer.weight.data = static_layer.weight.data.copy()
        dyn_layer.bias.data = static_layer.bias.data.copy()

    folded = fold_network(net, np.zeros(8))
    rng = np.random.default_rng(4)
    for _ in range(10):
        x = rng.uniform(size=(1, 3, 32, 32))
        np.testing.assert_allclose(folded.forward(x), static.forward_raw(x), atol=1e-12)


def test_folded_network_immutable():
    net = build_dynamic_network(TINY_ARCH, k=2, embed_dim=8, seed=1)
    folded = fold_network(net, np.zeros(8))
    with pytest.raises(ValueError):
        folded.layers[0].weight[0, 0, 0, 0] = 1.0


def test_equal_fingerprints_equal_weights():
    net = build_dynamic_network(TINY_ARCH, k=2, embed_dim=8, seed=5)
    rng = np.random.default_rng(6)
    for layer in net.dynamic_layers():
        for ctrl in layer.controllers:
            ctrl.weight.data = rng.normal(size=8)
    e1 = rng.normal(size=8)
    e2 = e1.copy()
    f1, f2 = fold_network(net, e1), fold_network(net, e2)
    assert f1.provenance.fingerprint == f2.provenance.fingerprint
    for la, lb in zip(f1.layers, f2.layers):
        assert la.weight.tobytes() == lb.weight.tobytes()
    e3 = e1 + 1e-9
    assert fold_network(net, e3).provenance.fingerprint != f1.provenance.fingerprint


# -- forward_dynamic -----------------------------------------------------------

def _randomized_controllers(net, seed):
    rng = np.random.default_rng(seed)
    for layer in net.dynamic_layers():
        for ctrl in layer.controllers:
            ctrl.weight.data = rng.normal(size=net.embed_dim) * 0.5
            ctrl.bias.data = np.asarray(rng.normal() * 0.5)


def test_fold_equivalence_quick():
    rng = np.random.default_rng(7)
    for seed in range(5):
        net = build_dynamic_network(TINY_ARCH, k=2, embed_dim=8, seed=seed)
        _randomized_controllers(net, seed)
        emb = rng.normal(size=8)
        x = rng.uniform(size=(2, 3, 32, 32))
        dynamic = net.forward_dynamic(emb, Tensor(x)).data
        folded = fold_network(net, emb).forward(x)
        assert np.max(np.abs(dynamic - folded)) <= 1e-10


def test_zero_input_zero_features():
    net = build_dynamic_network(TINY_ARCH, k=2, embed_dim=8, seed=8)
    x = np.zeros((1, 3, 32, 32))
    folded = fold_network(net, np.zeros(8))
    features = x
    for layer in folded.layers[:-2]:  # conv backbone only
        from ddn.numerics import conv2d_raw
        features = conv2d_raw(features, layer.weight, layer.bias,
                              layer.stride, layer.pad, layer.act)
    assert np.all(features == 0.0)


def test_embedding_changes_logits():
    net = build_dynamic_network(TINY_ARCH, k=2, embed_dim=8, seed=9)
    _randomized_controllers(net, 10)
    rng = np.random.default_rng(11)
    x = rng.uniform(size=(1, 3, 32, 32))
    a = net.forward_dynamic(rng.normal(size=8), Tensor(x)).data
    b = net.forward_dynamic(rng.normal(size=8), Tensor(x)).data
    assert not np.array_equal(a, b)


# -- gradients through the fold --------------------------------------------------

@pytest.mark.parametrize("seed", [0, 1])
def test_gradient_through_fold_dense(seed):
    rng = np.random.default_rng(seed)
    d = 3
    experts = [rng.normal(size=(3, 4)) * 0.5 for _ in range(2)]
    layer = ExpertLayer(
        "dense",
        [Parameter(e) for e in experts],
        Parameter(np.zeros(3)),
        [ControllerParams(Parameter(rng.normal(size=d) * 0.3), Parameter(np.asarray(0.1)))
         for _ in range(2)],
        act=ActivationKind.IDENTITY,
    )
    net = DynamicNetwork([layer], embed_dim=d,
                         arch=ArchSpec(convs=(ConvSpec(1),), hidden=1, classes=3), k=2)
    emb = rng.normal(size=d)
    x = rng.normal(size=(4, 4))
    labels = rng.integers(0, 3, size=4)

    def loss_fn():
        logits = net.forward_dynamic(emb, Tensor(x))
        return softmax_cross_entropy(logits, labels)[0]

    backward(loss_fn())
    assert_grads_close(lambda: loss_fn().item(), net.parameters(), tol=1e-4)


def _one_domain_partition(n):
    return DomainPartition(key_attrs=(), groups={0: DomainGroup(0, (), list(range(n)))})


def _tiny_dataset(n, classes, seed):
    rng = np.random.default_rng(seed)
    return [
        SampleRecord(image=rng.uniform(size=(3, 32, 32)),
                     label=int(rng.integers(0, classes)), attrs={})
        for _ in range(n)
    ]


def test_saturated_k1_reproduces_static_training():
    static = build_static_network(TINY_ARCH, seed=12)
    net = build_dynamic_network(TINY_ARCH, k=1, embed_dim=4, seed=12)
    for dyn_layer, st_layer in zip(net.dynamic_layers(),
                                   [l for l in static.layers if l.kind == "conv"]):
        dyn_layer.experts[0].data = st_layer.weight.data.copy()
        dyn_layer.controllers[0].bias.data = np.asarray(500.0)  # alpha == 1.0 exactly
    for dyn_layer, st_layer in zip(net.layers[-2:], static.layers[-2:]):
        dyn_layer.weight.data = st_layer.weight.data.copy()

    samples = _tiny_dataset(24, TINY_ARCH.classes, seed=13)
    part = _one_domain_partition(len(samples))
    embeddings = {0: DomainEmbedding(vector=np.zeros(4), count=len(samples))}
    cfg = TrainConfig(steps=20, batch_size=8, lr=0.05, momentum=0.9, seed=14,
                      log_every=0)

    ddn_history = train_ddn(net, samples, part, embeddings, cfg)

    from ddn.baselines import train_static
    _, static_history = train_static(samples, cfg, net=static)

    assert len(ddn_history.loss) == len(static_history.loss) == 20
    np.testing.assert_allclose(ddn_history.loss, static_history.loss, atol=1e-10)


def test_train_ddn_loss_decreases_small():
    arch = ArchSpec(convs=(ConvSpec(8, 3, 2, 1), ConvSpec(16, 3, 2, 1)),
                    hidden=16, classes=3)
    net = build_dynamic_network(arch, k=2, embed_dim=8, seed=15)
    samples = _tiny_dataset(60, 3, seed=16)
    part = _one_domain_partition(len(samples))
    embeddings = {0: DomainEmbedding(vector=np.random.default_rng(17).normal(size=8),
                                     count=60)}
    cfg = TrainConfig(steps=150, batch_size=16, lr=0.1, momentum=0.9, seed=18,
                      log_every=0)
    history = train_ddn(net, samples, part, embeddings, cfg)
    assert history.final_loss < 0.5 * history.initial_loss


def test_train_skips_empty_domain_under_uniform_sampling(caplog):
    samples = _tiny_dataset(10, 3, seed=19)
    part = DomainPartition(key_attrs=(), groups={
        0: DomainGroup(0, (), list(range(10))),
        1: DomainGroup(1, (), []),
    })
    arch = ArchSpec(convs=(ConvSpec(4, 3, 2, 1),), hidden=8, classes=3)
    net = build_dynamic_network(arch, k=2, embed_dim=4, seed=20)
    embeddings = {0: DomainEmbedding(vector=np.zeros(4), count=10)}
    cfg = TrainConfig(steps=30, batch_size=4, lr=0.05, momentum=0.0, seed=21,
                      uniform_domain_sampling=True, log_every=0)
    with caplog.at_level("WARNING"):
        history = train_ddn(net, samples, part, embeddings, cfg)
    assert len(history.loss) < 30  # some steps skipped
    assert any("empty domain" in rec.message for rec in caplog.records)


# -- factor export -----------------------------------------------------------------

def test_factor_vector_all_half_at_zero_theta():
    net = build_dynamic_network(TINY_ARCH, k=3, embed_dim=8, seed=22)
    vec = export_factor_vector(net, np.random.default_rng(23).normal(size=8))
    np.testing.assert_allclose(vec, 0.5)


def test_factor_vector_length():
    net = build_dynamic_network(TINY_ARCH, k=4, embed_dim=8, seed=24)
    vec = export_factor_vector(net, np.zeros(8))
    assert vec.shape == (len(net.dynamic_layers()) * 4,)


# -- checkpoints ---------------------------------------------------------------------

def test_checkpoint_round_trip_dynamic(tmp_path):
    net = build_dynamic_network(TINY_ARCH, k=2, embed_dim=8, seed=25)
    _randomized_controllers(net, 26)
    path = save_checkpoint(net, tmp_path / "model.ddn")
    loaded = load_checkpoint(path)
    assert loaded.k == 2 and loaded.embed_dim == 8
    for a, b in zip(net.parameters(), loaded.parameters()):
        assert a.data.tobytes() == b.data.tobytes()


def test_checkpoint_round_trip_static(tmp_path):
    net = build_static_network(TINY_ARCH, seed=27)
    loaded = load_checkpoint(save_checkpoint(net, tmp_path / "static.ddn"))
    for a, b in zip(net.parameters(), loaded.parameters()):
        assert a.data.tobytes() == b.data.tobytes()


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "junk.ddn"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError, match="magic"):
        load_checkpoint(path)


def test_fingerprint_distinguishes_dtype_and_values():
    a = np.zeros(4)
    assert embedding_fingerprint(a) == embedding_fingerprint(a.copy())
    assert embedding_fingerprint(a) != embedding_fingerprint(a.astype(np.float32))
    assert embedding_fingerprint(a) != embedding_fingerprint(a + 1e-12)
