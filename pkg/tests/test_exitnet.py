"""Multi-exit feedforward net: forward pass, cost model, weight file."""

import numpy as np
import pytest

from mood import (
    ExitCostModel,
    ExitNetWeights,
    ImageBuffer,
    InputError,
    MagicError,
    TruncatedError,
    analytic_cost_model,
    forward_all_exits,
    read_weights,
    write_weights,
)
from mood.errors import SchemaError


def tiny_net(w=1.0, b=0.0):
    """One block, one unit: input d0=1, head emits [h, -h]."""
    return ExitNetWeights(
        dims=(1, 1),
        num_classes=2,
        trunk_weights=(np.array([[w]]),),
        trunk_biases=(np.array([b]),),
        head_weights=(np.array([[1.0], [-1.0]]),),
        head_biases=(np.array([0.0, 0.0]),),
    )


def random_net(rng, dims=(12, 8, 5, 4), num_classes=3):
    k = len(dims) - 1
    return ExitNetWeights(
        dims=dims,
        num_classes=num_classes,
        trunk_weights=tuple(rng.normal(size=(dims[i + 1], dims[i])) for i in range(k)),
        trunk_biases=tuple(rng.normal(size=dims[i + 1]) for i in range(k)),
        head_weights=tuple(rng.normal(size=(num_classes, dims[i + 1])) for i in range(k)),
        head_biases=tuple(rng.normal(size=num_classes) for i in range(k)),
    )


def image_for(dims0, value=128):
    # Width dims0, height 1, single channel.
    return ImageBuffer(1, dims0, 1, bytes([value] * dims0))


class TestForward:
    def test_zero_weights_zero_logits(self):
        dims = (6, 4, 3)
        k, c = 2, 5
        net = ExitNetWeights(
            dims=dims,
            num_classes=c,
            trunk_weights=tuple(np.zeros((dims[i + 1], dims[i])) for i in range(k)),
            trunk_biases=tuple(np.zeros(dims[i + 1]) for i in range(k)),
            head_weights=tuple(np.zeros((c, dims[i + 1])) for i in range(k)),
            head_biases=tuple(np.zeros(c) for i in range(k)),
        )
        rec = forward_all_exits(net, image_for(6, value=200))
        assert np.array_equal(rec.logits, np.zeros((2, 5)))

    def test_hand_traced_single_unit(self):
        # Pixel byte 51 scales to 0.2; relu is identity for positive input.
        rec = forward_all_exits(tiny_net(), ImageBuffer(1, 1, 1, bytes([51])))
        assert rec.logits[0] == pytest.approx([0.2, -0.2], abs=1e-15)

    def test_relu_clamps_negative_preactivation(self):
        # bias -2 drives the unit negative for any pixel: h = 0, logits 0.
        rec = forward_all_exits(tiny_net(b=-2.0), ImageBuffer(1, 1, 1, bytes([255])))
        assert rec.logits[0] == pytest.approx([0.0, 0.0], abs=0)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InputError):
            forward_all_exits(tiny_net(), ImageBuffer(1, 2, 1, bytes(2)))

    def test_deterministic(self, rng):
        net = random_net(rng)
        img = ImageBuffer(1, 12, 1, bytes(rng.integers(0, 256, 12, dtype=np.uint8)))
        a = forward_all_exits(net, img)
        b = forward_all_exits(net, img)
        assert np.array_equal(a.logits, b.logits)

    def test_positive_homogeneity_at_exit_one_without_biases(self, rng):
        dims = (4, 3)
        net = ExitNetWeights(
            dims=dims, num_classes=2,
            trunk_weights=(rng.normal(size=(3, 4)),),
            trunk_biases=(np.zeros(3),),
            head_weights=(rng.normal(size=(2, 3)),),
            head_biases=(np.zeros(2),),
        )
        img1 = ImageBuffer(1, 4, 1, bytes([10, 20, 30, 40]))
        img3 = ImageBuffer(1, 4, 1, bytes([30, 60, 90, 120]))
        r1 = forward_all_exits(net, img1)
        r3 = forward_all_exits(net, img3)
        assert np.allclose(r3.logits[0], 3.0 * r1.logits[0], rtol=1e-12)

    def test_sample_id_and_label_pass_through(self):
        rec = forward_all_exits(tiny_net(), ImageBuffer(1, 1, 1, b"\x00"),
                                sample_id="abc", label=1)
        assert rec.sample_id == "abc"
        assert rec.label == 1


class TestAnalyticCostModel:
    def test_hand_counted_single_block(self):
        # trunk 2*2*4 = 16 plus head 2*3*2 = 12.
        net = ExitNetWeights(
            dims=(4, 2), num_classes=3,
            trunk_weights=(np.zeros((2, 4)),),
            trunk_biases=(np.zeros(2),),
            head_weights=(np.zeros((3, 2)),),
            head_biases=(np.zeros(3),),
        )
        assert analytic_cost_model(net).cumulative_flops == (28.0,)

    def test_doubling_classes_doubles_head_terms_only(self, rng):
        dims = (6, 5, 4)
        def build(c):
            return ExitNetWeights(
                dims=dims, num_classes=c,
                trunk_weights=tuple(np.zeros((dims[i + 1], dims[i])) for i in range(2)),
                trunk_biases=tuple(np.zeros(dims[i + 1]) for i in range(2)),
                head_weights=tuple(np.zeros((c, dims[i + 1])) for i in range(2)),
                head_biases=tuple(np.zeros(c) for i in range(2)),
            )
        base = analytic_cost_model(build(3)).cumulative_flops
        doubled = analytic_cost_model(build(6)).cumulative_flops
        for i, d in enumerate(dims[1:]):
            assert doubled[i] - base[i] == 2.0 * 3 * d

    def test_strictly_increasing(self, rng):
        costs = analytic_cost_model(random_net(rng)).cumulative_flops
        assert all(b > a for a, b in zip(costs, costs[1:]))

    def test_zero_width_rejected_by_weights(self):
        with pytest.raises(InputError):
            ExitNetWeights(dims=(4, 0), num_classes=2, trunk_weights=(np.zeros((0, 4)),),
                           trunk_biases=(np.zeros(0),), head_weights=(np.zeros((2, 0)),),
                           head_biases=(np.zeros(2),))


class TestExitCostModel:
    def test_monotonicity_enforced(self):
        with pytest.raises(InputError):
            ExitCostModel((2.0, 2.0))
        with pytest.raises(InputError):
            ExitCostModel((3.0, 1.0))

    def test_at_is_one_based(self):
        costs = ExitCostModel((1.0, 2.0, 4.0))
        assert costs.at(1) == 1.0
        assert costs.at(3) == 4.0
        with pytest.raises(InputError):
            costs.at(0)
        with pytest.raises(InputError):
            costs.at(4)


class TestWeightFile:
    def test_round_trip(self, rng, tmp_path):
        net = random_net(rng)
        path = tmp_path / "net.bin"
        write_weights(net, path)
        back = read_weights(path)
        assert back.dims == net.dims
        assert back.num_classes == net.num_classes
        for a, b in zip(back.trunk_weights, net.trunk_weights):
            assert np.array_equal(a, b)
        for a, b in zip(back.head_weights, net.head_weights):
            assert np.array_equal(a, b)
        img = ImageBuffer(1, 12, 1, bytes(rng.integers(0, 256, 12, dtype=np.uint8)))
        assert np.array_equal(
            forward_all_exits(net, img).logits, forward_all_exits(back, img).logits
        )

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTMAGIC" + bytes(64))
        with pytest.raises(MagicError):
            read_weights(path)

    def test_truncated(self, rng, tmp_path):
        net = random_net(rng)
        path = tmp_path / "net.bin"
        write_weights(net, path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 9])
        with pytest.raises(TruncatedError):
            read_weights(path)

    def test_trailing_garbage(self, rng, tmp_path):
        net = random_net(rng)
        path = tmp_path / "net.bin"
        write_weights(net, path)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(SchemaError):
            read_weights(path)

    def test_write_is_deterministic(self, rng, tmp_path):
        net = random_net(rng)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        write_weights(net, p1)
        write_weights(net, p2)
        assert p1.read_bytes() == p2.read_bytes()
