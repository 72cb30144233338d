import dataclasses

import numpy as np
import pytest

from grnparse.autodiff import SgdConfig, Tensor, backward, cross_entropy_pixelwise, trace
from grnparse.errors import ConfigError, ContractViolation, DataError, FormatError
from grnparse.nets import (
    RectNetConfig,
    SegNetConfig,
    assemble_input,
    fit,
    init_rectnet,
    init_segnet,
    one_hot,
    predict_mask,
    rectify_forward,
    rectify_mask,
    seg_forward,
    train_rectifier,
    train_segmenter,
)
from tests.oracles import numpy_rectnet, numpy_segnet

C, SIZE = 4, 16
SHAPE = dict(c=C, size=SIZE, c_prime=4, d=6, n_high=2)
GRAPH_PARAMS = {
    *(f"gsm.{name}" for name in ("omega", "A_low", "W_low", "W_high", "V_low", "V_high")),
    *(f"lcm.{name}" for name in ("omega_l1", "omega_l2", "W_l")),
}


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(11)


@pytest.fixture
def image(rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(size=(3, SIZE, SIZE))


@pytest.fixture
def label(rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, C, size=(SIZE, SIZE)).astype(np.uint8)


@pytest.fixture
def probs(rng: np.random.Generator) -> np.ndarray:
    raw = rng.uniform(size=(C, SIZE, SIZE))
    return raw / raw.sum(axis=0)


@pytest.mark.parametrize("modules", [(False, False), (True, False), (True, True)])
def test_seg_forward_shape(modules, image: np.ndarray) -> None:
    with_lcm, with_gsm = modules
    p = init_segnet(SegNetConfig(**SHAPE, with_lcm=with_lcm, with_gsm=with_gsm))
    assert seg_forward(Tensor(image), p).shape == (C, SIZE, SIZE)
    names = set(p.parameters())
    assert ("lcm.W_l" in names) is with_lcm
    assert ("gsm.A_low" in names) is with_gsm


def test_predict_mask(image: np.ndarray) -> None:
    p = init_segnet(SegNetConfig(**SHAPE))
    probs, labels = predict_mask(image, p)
    assert labels.dtype == np.uint8
    np.testing.assert_allclose(probs.sum(axis=0), 1.0, atol=1e-12)
    np.testing.assert_array_equal(labels, np.argmax(probs, axis=0))


def test_segnet_rejects_bad_inputs() -> None:
    p = init_segnet(SegNetConfig(**SHAPE))
    with pytest.raises(ContractViolation):
        seg_forward(Tensor(np.zeros((3, 18, 16))), p)
    with pytest.raises(ContractViolation):
        seg_forward(Tensor(np.zeros((4, 16, 16))), p)
    with pytest.raises(ValueError):
        SegNetConfig(size=18)
    with pytest.raises(ValueError):
        SegNetConfig(c=3, n_high=3, with_gsm=True)


def test_init_is_seeded() -> None:
    a = init_segnet(SegNetConfig(**SHAPE), rng=5).state_dict()
    b = init_segnet(SegNetConfig(**SHAPE), rng=5).state_dict()
    assert a.keys() == b.keys()
    assert all(np.array_equal(a[k], b[k]) for k in a)


def test_checkpoint_round_trip(tmp_path, image: np.ndarray) -> None:
    config = SegNetConfig(**SHAPE, with_lcm=True, with_gsm=True)
    trained = init_segnet(config, rng=1)
    path = trained.save(tmp_path / "s.grn")
    restored = init_segnet(config, rng=2)
    restored.load(path)
    expected = seg_forward(Tensor(image), trained).data
    np.testing.assert_array_equal(seg_forward(Tensor(image), restored).data, expected)


def test_load_rejects_other_architecture(tmp_path) -> None:
    path = init_segnet(SegNetConfig(**SHAPE, with_lcm=True)).save(tmp_path / "s.grn")
    with pytest.raises(FormatError):
        init_segnet(SegNetConfig(**SHAPE)).load(path)


def test_one_hot() -> None:
    encoded = one_hot(np.array([[0, 2], [1, 2]]), 3)
    assert encoded.shape == (3, 2, 2)
    np.testing.assert_array_equal(encoded.sum(axis=0), 1.0)
    assert encoded[2, 0, 1] == 1.0
    with pytest.raises(DataError):
        one_hot(np.array([[3]]), 3)


def test_assemble_input(image: np.ndarray, probs: np.ndarray) -> None:
    x = assemble_input(image, probs)
    assert x.shape == (3 + C, SIZE, SIZE)
    np.testing.assert_array_equal(x.data[:3], image)
    with pytest.raises(DataError):
        assemble_input(image, probs * 2)
    with pytest.raises(DataError):
        assemble_input(image[:2], probs)
    with pytest.raises(DataError):
        assemble_input(image, probs[:, :8])


def test_rectify_forward_outputs(image: np.ndarray, probs: np.ndarray) -> None:
    p = init_rectnet(RectNetConfig(**SHAPE))
    out = rectify_forward(assemble_input(image, probs), p)
    assert out.logits.shape == (C, SIZE, SIZE)
    assert out.theta_l.shape == (C,)
    assert out.theta_g.shape == (C,)
    assert out.Z_g.shape == (C, 6)
    assert out.theta_l.data.sum() == pytest.approx(1.0)
    assert out.theta_g.data.sum() == pytest.approx(1.0)


def test_cascade_runs_local_before_global(image: np.ndarray, probs: np.ndarray) -> None:
    p = init_rectnet(RectNetConfig(**SHAPE))
    with trace() as record:
        rectify_forward(assemble_input(image, probs), p)
    local = record.find("relu", "lcm")
    glob = record.find("relu", "gsm")
    assist = record.find("relu", "assist")
    assert local and glob and assist
    assert max(local) < min(glob) < max(glob) < min(assist)
    assert record.find("relu", "assist.gsm")


def test_single_pass_without_assist(image: np.ndarray, probs: np.ndarray) -> None:
    p = init_rectnet(RectNetConfig(**SHAPE, two_pass_assist=False))
    with trace() as record:
        rectify_forward(assemble_input(image, probs), p)
    assert not [node for node in record if node.scope.startswith("assist")]


def test_unit_weights_match_disabled_modules(image: np.ndarray, probs: np.ndarray) -> None:
    """Ones in place of θ_l and θ_g give the module-free network bit for bit."""
    p = init_rectnet(RectNetConfig(**SHAPE))
    config = p.config.model_copy(update={"use_lcm": False, "use_gsm": False})
    bare = dataclasses.replace(p, config=config, lcm=None, gsm=None)
    x = assemble_input(image, probs)
    unit = rectify_forward(x, p, unit_weights=True)
    plain = rectify_forward(x, bare)
    assert unit.theta_l is None and unit.theta_g is None
    assert np.array_equal(unit.logits.data, plain.logits.data)


def test_module_switches(image: np.ndarray, probs: np.ndarray) -> None:
    p = init_rectnet(RectNetConfig(**SHAPE, use_lcm=False))
    out = rectify_forward(assemble_input(image, probs), p)
    assert out.theta_l is None
    assert out.theta_g is not None
    assert not any(name.startswith("lcm.") for name in p.parameters())


def test_seg_forward_matches_numpy(image: np.ndarray) -> None:
    p = init_segnet(SegNetConfig(**SHAPE, with_lcm=True, with_gsm=True), rng=5)
    logits = seg_forward(Tensor(image), p).data
    np.testing.assert_allclose(logits, numpy_segnet(image, p), rtol=0, atol=1e-9)


def test_rectify_forward_matches_numpy(image: np.ndarray, probs: np.ndarray) -> None:
    p = init_rectnet(RectNetConfig(**SHAPE), rng=5)
    x = assemble_input(image, probs)
    logits = rectify_forward(x, p).logits.data
    np.testing.assert_allclose(logits, numpy_rectnet(x.data, p), rtol=0, atol=1e-9)


def test_graph_parameters_receive_gradients(
    image: np.ndarray, probs: np.ndarray, label: np.ndarray
) -> None:
    seg = init_segnet(SegNetConfig(**SHAPE, with_lcm=True, with_gsm=True))
    rect = init_rectnet(RectNetConfig(**SHAPE))
    x = assemble_input(image, probs)
    for p, logits in (
        (seg, lambda: seg_forward(Tensor(image), seg)),
        (rect, lambda: rectify_forward(x, rect).logits),
    ):
        p.zero_grad()
        backward(cross_entropy_pixelwise(logits(), label))
        params = p.parameters()
        assert GRAPH_PARAMS <= set(params)
        for name in sorted(GRAPH_PARAMS):
            grad = params[name].grad
            assert grad is not None and np.any(grad != 0), name


def test_rectify_mask_hard(image: np.ndarray, probs: np.ndarray) -> None:
    p = init_rectnet(RectNetConfig(**SHAPE, hard_mask=True))
    soft = dataclasses.replace(
        p, config=p.config.model_copy(update={"hard_mask": False})
    )
    labels, _ = rectify_mask(image, probs, p)
    expected, _ = rectify_mask(image, one_hot(np.argmax(probs, axis=0), C), soft)
    assert labels.dtype == np.uint8
    np.testing.assert_array_equal(labels, expected)


def test_identity_lift_needs_matching_channels() -> None:
    with pytest.raises(ValueError):
        RectNetConfig(**{**SHAPE, "c_prime": 8}, lift="identity")


def test_fit_edge_cases(image: np.ndarray, label: np.ndarray) -> None:
    p = init_segnet(SegNetConfig(**SHAPE))
    before = p.state_dict()
    with pytest.raises(ConfigError):
        train_segmenter([], p, SgdConfig(), epochs=1)
    with pytest.raises(ConfigError):
        train_segmenter([(image, label)], p, SgdConfig(), epochs=-1)
    with pytest.raises(ConfigError):
        train_segmenter([(image, label)], p, SgdConfig(), epochs=1, batch_size=0)
    log = train_segmenter([(image, label)], p, SgdConfig(), epochs=0)
    assert log.epoch_losses == [] and log.iterations == 0
    after = p.state_dict()
    assert all(np.array_equal(before[k], after[k]) for k in before)


def test_fit_counts_iterations(image: np.ndarray, label: np.ndarray) -> None:
    p = init_segnet(SegNetConfig(**SHAPE))
    log = train_segmenter([(image, label)] * 3, p, SgdConfig(), epochs=2, batch_size=2)
    assert log.iterations == 4
    assert len(log.epoch_losses) == 2
    assert all(t.grad is None for t in p.parameters().values())


def test_segmenter_loss_decreases(image: np.ndarray, label: np.ndarray) -> None:
    p = init_segnet(SegNetConfig(**SHAPE, with_lcm=True, with_gsm=True))
    log = train_segmenter([(image, label)], p, SgdConfig(), epochs=10, batch_size=1)
    assert log.final < log.initial


def test_rectifier_loss_decreases(
    image: np.ndarray, probs: np.ndarray, label: np.ndarray
) -> None:
    p = init_rectnet(RectNetConfig(**SHAPE))
    log = train_rectifier([(image, probs, label)], p, SgdConfig(), epochs=10, batch_size=1)
    assert log.final < log.initial


def test_after_step_keeps_adjacency_symmetric(image: np.ndarray, label: np.ndarray) -> None:
    p = init_segnet(SegNetConfig(**SHAPE, with_gsm=True))
    train_segmenter([(image, label)], p, SgdConfig(), epochs=2, batch_size=1)
    A = p.gsm.A_low.data
    np.testing.assert_array_equal(A, A.T)


def test_fit_is_deterministic(image: np.ndarray, label: np.ndarray) -> None:
    def run() -> dict:
        p = init_segnet(SegNetConfig(**SHAPE), rng=3)
        fit_log = train_segmenter(
            [(image, label)] * 2, p, SgdConfig(), epochs=2, batch_size=1, rng=9
        )
        return {"losses": fit_log.epoch_losses, **p.state_dict()}

    a, b = run(), run()
    assert a["losses"] == b["losses"]
    assert all(np.array_equal(a[k], b[k]) for k in a if k != "losses")


def test_fit_accepts_any_network(image: np.ndarray, label: np.ndarray) -> None:
    p = init_segnet(SegNetConfig(**SHAPE))
    calls = []

    def loss(example, rng):
        calls.append(example)
        return cross_entropy_pixelwise(seg_forward(Tensor(example[0]), p), example[1])

    fit(p, [(image, label)], loss, SgdConfig(), epochs=1)
    assert len(calls) == 1
