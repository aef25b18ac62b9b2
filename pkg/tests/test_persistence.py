import numpy as np
import pytest

from anomalens.contribution import ContributionConfig, estimate_contribution
from anomalens.detector import pca_fit, pca_score, train_detector
from anomalens.errors import DataError
from anomalens.multimodal import (
    MAETrainConfig,
    ModalitySchema,
    ModalityType,
    train_mae,
    wmse_score,
)
from anomalens.neuralnet import TrainConfig, forward, init_network
from anomalens.persistence import FORMAT_TAG, load_model, save_model
from anomalens.rng import PortableRng, derive_seed


def small_train(seed, n=40, dim=6):
    rng = PortableRng(derive_seed(seed, 0))
    base = rng.uniform(0, 1, n * 2).reshape(n, 2)
    mix = rng.uniform(-1, 1, 2 * dim).reshape(2, dim)
    return base @ mix + 3.0


class TestNetworkRoundTrip:
    def test_bit_exact_forward(self, tmp_path):
        net = init_network([4, 3, 4], ["relu", "identity"], seed=11)
        p = tmp_path / "net.json"
        save_model(p, net)
        back = load_model(p)
        x = PortableRng(derive_seed(11, 1)).uniform(0, 1, 4)
        np.testing.assert_array_equal(forward(back, x)[-1], forward(net, x)[-1])

    def test_layer_payload_preserved(self, tmp_path):
        net = init_network([3, 2, 3], ["sigmoid", "identity"], seed=12)
        p = tmp_path / "net.json"
        save_model(p, net)
        back = load_model(p)
        assert back.input_dim == net.input_dim
        for a, b in zip(back.layers, net.layers):
            np.testing.assert_array_equal(a.weights, b.weights)
            np.testing.assert_array_equal(a.biases, b.biases)
            assert a.activation == b.activation


class TestDetectorRoundTrip:
    def test_scores_survive_bit_exactly(self, tmp_path):
        train = small_train(1)
        det = train_detector(train, [2], ["sigmoid", "identity"], TrainConfig(epochs=5, batch_size=20, seed=3))
        p = tmp_path / "det.json"
        save_model(p, det)
        back = load_model(p)
        x = small_train(2, n=5)
        from anomalens.detector import mse_score_batch

        np.testing.assert_array_equal(mse_score_batch(back, x), mse_score_batch(det, x))
        assert back.threshold == det.threshold
        assert back.mse_mean == det.mse_mean and back.mse_std == det.mse_std

    def test_contribution_survives_bit_exactly(self, tmp_path):
        train = small_train(4)
        det = train_detector(train, [2], ["sigmoid", "identity"], TrainConfig(epochs=5, batch_size=20, seed=5))
        p = tmp_path / "det.json"
        save_model(p, det)
        back = load_model(p)
        x = small_train(5, n=1)[0] + 2.0
        cfg = ContributionConfig(max_iters=60)
        a = estimate_contribution(det, x, cfg)
        b = estimate_contribution(back, x, cfg)
        np.testing.assert_array_equal(a.eta, b.eta)
        assert a.lambda_used == b.lambda_used and a.iterations == b.iterations


class TestPcaRoundTrip:
    def test_scores_survive_bit_exactly(self, tmp_path):
        train = small_train(6)
        model = pca_fit(train, 2)
        p = tmp_path / "pca.json"
        save_model(p, model)
        back = load_model(p)
        x = small_train(7, n=3)
        got = [pca_score(back, r) for r in x]
        want = [pca_score(model, r) for r in x]
        assert got == want


class TestMaeRoundTrip:
    def test_wmse_survives_bit_exactly(self, tmp_path):
        schema = ModalitySchema(
            types=[ModalityType("a", 4, 3), ModalityType("b", 5, 3)],
            shared_size=2,
        )
        rng = PortableRng(derive_seed(8, 0))
        streams = [
            rng.uniform(0, 1, 30 * 4).reshape(30, 4),
            rng.uniform(0, 1, 30 * 5).reshape(30, 5),
        ]
        cfg = MAETrainConfig(epochs_pretrain=3, epochs_finetune=3, batch_size=10, seed=9)
        model = train_mae(streams, schema, cfg)
        p = tmp_path / "mae.json"
        save_model(p, model)
        back = load_model(p)
        test = [
            rng.uniform(0, 1, 4),
            rng.uniform(0, 1, 5),
        ]
        assert wmse_score(back, test) == wmse_score(model, test)
        np.testing.assert_array_equal(back.nu, model.nu)
        np.testing.assert_array_equal(back.weights, model.weights)
        assert back.threshold == model.threshold
        assert [t.name for t in back.schema.types] == ["a", "b"]


class TestFormatGuards:
    def test_format_tag_written(self, tmp_path):
        import json

        net = init_network([2, 1, 2], ["relu", "identity"], seed=1)
        p = tmp_path / "net.json"
        save_model(p, net)
        doc = json.loads(p.read_text())
        assert doc["format"] == FORMAT_TAG
        assert doc["kind"] == "dense_network"

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_model(tmp_path / "absent.json")

    def test_garbage_rejected(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(DataError, match="not valid"):
            load_model(p)

    def test_wrong_format_tag_rejected(self, tmp_path):
        p = tmp_path / "old.json"
        p.write_text('{"format": "anomalens/0", "kind": "dense_network"}')
        with pytest.raises(DataError, match="unsupported format"):
            load_model(p)

    def test_unknown_kind_rejected(self, tmp_path):
        p = tmp_path / "odd.json"
        p.write_text(f'{{"format": "{FORMAT_TAG}", "kind": "kazoo"}}')
        with pytest.raises(DataError, match="unknown model kind"):
            load_model(p)

    def test_unserializable_object_rejected(self, tmp_path):
        with pytest.raises(DataError, match="cannot serialize"):
            save_model(tmp_path / "x.json", object())
