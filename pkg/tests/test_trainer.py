import io
import math

import numpy as np
import pytest

import topoalign as ta
from topoalign.trainer import (
    ConfigError,
    Mode,
    PerturbationOp,
    TrainConfig,
    TrainState,
    _frozen_objective,
    _objective_grads,
    load_config,
    make_blob_dataset,
    read_report,
    run_experiment,
    train_step,
    write_config,
    write_report,
)
from topoalign.persistence import h0_persistence
from topoalign.pointcloud import PointCloud, pairwise_distances


# ---------------------------------------------------------------------------
# Independently coded plain margin trainer (loops, own derivation)
# ---------------------------------------------------------------------------

def plain_margin_step(weights, velocity, batch_x, labels, s, m, lr, mu):
    """One SGD step of unweighted margin softmax, written sample-by-sample."""
    w1, b1, w2, b2, cent = (weights[k] for k in ("w1", "b1", "w2", "b2", "centers"))
    n = batch_x.shape[0]
    grads = {k: np.zeros_like(v) for k, v in weights.items()}
    total_loss = 0.0
    for i in range(n):
        x = batch_x[i]
        a = w1 @ x + b1
        hid = np.tanh(a)
        f = w2 @ hid + b2
        fn = np.linalg.norm(f)
        u = f / fn
        cn = cent / np.linalg.norm(cent, axis=1, keepdims=True)
        cos = cn @ u
        y = labels[i]
        cy = min(max(cos[y], -1.0 + 1e-12), 1.0 - 1e-12)
        th = math.acos(cy)
        logit = s * cos.copy()
        logit[y] = s * math.cos(th + m)
        z = logit - logit.max()
        p = np.exp(z) / np.exp(z).sum()
        total_loss += -math.log(p[y])

        dlogit = p.copy()
        dlogit[y] -= 1.0
        dcos = s * dlogit
        dcos[y] *= math.sin(th + m) / math.sin(th)
        du = cn.T @ dcos
        dcn = np.outer(dcos, u)
        df = (du - (du @ u) * u) / fn
        for k in range(cent.shape[0]):
            ck = cent[k]
            ckn = np.linalg.norm(ck)
            g = dcn[k]
            grads["centers"][k] += (g - (g @ cn[k]) * cn[k]) / ckn
        dh = w2.T @ df
        da = dh * (1.0 - hid * hid)
        grads["w2"] += np.outer(df, hid)
        grads["b2"] += df
        grads["w1"] += np.outer(da, x)
        grads["b1"] += da
    for k in grads:
        grads[k] /= n
        velocity[k] = mu * velocity[k] + grads[k]
        weights[k] = weights[k] - lr * velocity[k]
    weights["centers"] /= np.linalg.norm(weights["centers"], axis=1, keepdims=True)
    return total_loss / n


def tiny_setup(seed=7, n=8, d=4, latent=2, k=2, hidden=5):
    rng = np.random.default_rng(seed)
    cfg = TrainConfig(hidden_dim=hidden, latent_dim=latent, batch_size=2,
                      learning_rate=0.05, epochs=1)
    params = ta.init_encoder_params(rng, d, hidden, latent, k)
    x = rng.normal(size=(n, d))
    labels = rng.integers(0, k, n)
    return rng, cfg, params, x, labels


class TestArcface:
    def test_margin_free_reduction(self):
        rng, _, params, x, labels = tiny_setup()
        f = ta.encode(params, x)[0]
        loss, probs = ta.arcface_loss(f, int(labels[0]), params, s=1.0, m=0.0)
        cn = params.centers / np.linalg.norm(params.centers, axis=1, keepdims=True)
        cos = cn @ (f / np.linalg.norm(f))
        expected = np.exp(cos) / np.exp(cos).sum()
        assert probs == pytest.approx(expected, abs=1e-12)
        assert loss == pytest.approx(-math.log(expected[labels[0]]), abs=1e-12)

    def test_aligned_feature_closed_form(self):
        latent = 3
        centers = np.zeros((2, latent))
        centers[0, 0] = 1.0
        centers[1, 1] = 1.0
        params = ta.EncoderParams(
            np.zeros((1, 1)), np.zeros(1), np.zeros((latent, 1)), np.zeros(latent),
            centers,
        )
        feature = np.array([2.0, 0.0, 0.0])  # aligned with center 0
        loss, _ = ta.arcface_loss(feature, 0, params, s=64.0, m=0.5)
        a = 64.0 * math.cos(0.5)
        expected = -math.log(math.exp(a) / (math.exp(a) + 1.0))
        assert loss == pytest.approx(expected, rel=1e-9)

    def test_probs_normalized(self):
        rng, _, params, x, labels = tiny_setup(seed=11)
        for i in range(x.shape[0]):
            f = ta.encode(params, x)[i]
            _, probs = ta.arcface_loss(f, int(labels[i]), params, s=64.0, m=0.5)
            assert abs(probs.sum() - 1.0) <= 1e-9

    def test_zero_norm_feature_rejected(self):
        _, _, params, _, _ = tiny_setup()
        with pytest.raises(ValueError, match="zero-norm"):
            ta.arcface_loss(np.zeros(2), 0, params, s=64.0, m=0.5)

    def test_bad_label_rejected(self):
        _, _, params, _, _ = tiny_setup()
        with pytest.raises(ValueError, match="label"):
            ta.arcface_loss(np.ones(2), 5, params, s=64.0, m=0.5)


class TestPerturbation:
    def test_xi_zero_is_identity(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=12)
        out = ta.rsp_perturb(x, ta.DEFAULT_OPS, xi=0.0, rng=rng)
        assert np.array_equal(out, x)
        # and the stream was not consumed
        rng2 = np.random.default_rng(1)
        rng2.normal(size=12)
        assert rng.uniform() == rng2.uniform()

    def test_full_collapse_constant(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=10)
        op = PerturbationOp("collapse", groups=1)
        out = ta.rsp_perturb(x, [op], xi=1.0, rng=rng)
        assert out == pytest.approx(np.full(10, x.mean()))

    def test_fixed_seed_reproducible(self):
        x = np.arange(16, dtype=float)
        seq1 = [ta.rsp_perturb(x, ta.DEFAULT_OPS, 0.5, np.random.default_rng(9)) for _ in range(1)]
        seq2 = [ta.rsp_perturb(x, ta.DEFAULT_OPS, 0.5, np.random.default_rng(9)) for _ in range(1)]
        rng1, rng2 = np.random.default_rng(9), np.random.default_rng(9)
        for _ in range(20):
            a = ta.rsp_perturb(x, ta.DEFAULT_OPS, 0.5, rng1)
            b = ta.rsp_perturb(x, ta.DEFAULT_OPS, 0.5, rng2)
            assert np.array_equal(a, b)

    def test_each_op_shape_preserving(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=16)
        for op in ta.DEFAULT_OPS:
            out = op.apply(x, rng)
            assert out.shape == x.shape

    def test_empty_ops_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            ta.rsp_perturb(np.ones(4), [], 0.5, np.random.default_rng(0))

    def test_bad_kind_rejected(self):
        with pytest.raises(ValueError, match="unknown perturbation"):
            PerturbationOp("sharpen")


class TestGradients:
    def test_full_objective_finite_difference(self):
        rng, cfg, params, x, labels = tiny_setup()
        omegas = rng.uniform(0.2, 1.5, x.shape[0])
        xp = x + 0.01 * rng.normal(size=x.shape)
        m_x = pairwise_distances(PointCloud(x))
        feats = ta.encode(params, xp)
        m_z = pairwise_distances(PointCloud(feats))
        _, gx = h0_persistence(m_x)
        _, gz = h0_persistence(m_z)
        s, m, alpha = 64.0, 0.5, 0.1
        grads, _ = _objective_grads(params, xp, labels, omegas, m_x, gx, gz, s, m, alpha)

        h = 1e-5
        worst = 0.0
        for key, arr in params.arrays().items():
            for idx in np.ndindex(arr.shape):
                orig = arr[idx]
                arr[idx] = orig + h
                fp, _, _ = _frozen_objective(params, xp, labels, omegas, m_x, gx, gz, s, m, alpha)
                arr[idx] = orig - h
                fm, _, _ = _frozen_objective(params, xp, labels, omegas, m_x, gx, gz, s, m, alpha)
                arr[idx] = orig
                fd = (fp - fm) / (2 * h)
                denom = max(abs(fd), abs(grads[key][idx]), 1e-8)
                worst = max(worst, abs(fd - grads[key][idx]) / denom)
        assert worst <= 1e-4


class TestTrainStep:
    def test_baseline_equals_plain_trainer(self):
        rng = np.random.default_rng(123)
        d, hidden, latent, k = 6, 7, 3, 4
        cfg = TrainConfig(hidden_dim=hidden, latent_dim=latent, batch_size=16,
                          learning_rate=0.03, momentum=0.9, epochs=1)
        params = ta.init_encoder_params(rng, d, hidden, latent, k)
        state = TrainState(params.copy(),
                           {key: np.zeros_like(v) for key, v in params.arrays().items()},
                           cfg, Mode.baseline())
        weights = {key: v.copy() for key, v in params.arrays().items()}
        velocity = {key: np.zeros_like(v) for key, v in weights.items()}

        data_rng = np.random.default_rng(5)
        x_all = data_rng.normal(size=(320, d))
        y_all = data_rng.integers(0, k, 320)
        step_rng = np.random.default_rng(0)
        for step in range(20):
            sl = slice(16 * step, 16 * (step + 1))
            metrics = train_step(x_all[sl], y_all[sl], state, step_rng)
            plain_loss = plain_margin_step(weights, velocity, x_all[sl], y_all[sl],
                                           cfg.s, cfg.m, cfg.learning_rate, cfg.momentum)
            assert metrics["l_cls"] == pytest.approx(plain_loss, abs=1e-9)
        for key in weights:
            assert np.max(np.abs(weights[key] - state.params.arrays()[key])) <= 1e-9

    def test_step_determinism(self):
        rng, cfg, params, x, labels = tiny_setup(n=16, k=3)
        results = []
        for _ in range(2):
            state = TrainState(params.copy(),
                               {k2: np.zeros_like(v) for k2, v in params.arrays().items()},
                               cfg, Mode.full())
            step_rng = np.random.default_rng(77)
            metrics = [train_step(x, labels, state, step_rng) for _ in range(5)]
            results.append((metrics, {k2: v.copy() for k2, v in state.params.arrays().items()}))
        assert results[0][0] == results[1][0]
        for key in results[0][1]:
            assert np.array_equal(results[0][1][key], results[1][1][key])

    def test_centers_unit_norm_after_steps(self):
        rng, cfg, params, x, labels = tiny_setup(n=16, k=3)
        state = TrainState(params.copy(),
                           {k2: np.zeros_like(v) for k2, v in params.arrays().items()},
                           cfg, Mode.full())
        step_rng = np.random.default_rng(4)
        for _ in range(10):
            train_step(x, labels, state, step_rng)
            norms = np.linalg.norm(state.params.centers, axis=1)
            assert norms == pytest.approx(np.ones_like(norms), abs=1e-9)

    def test_degenerate_batch_flagged(self):
        rng, cfg, params, x, labels = tiny_setup(n=8, k=2)
        state = TrainState(params.copy(),
                           {k2: np.zeros_like(v) for k2, v in params.arrays().items()},
                           cfg, Mode.baseline())
        xx = np.tile(x[0], (8, 1))
        metrics = train_step(xx, labels, state, np.random.default_rng(0))
        assert metrics["degenerate_batch"]

    def test_small_batch_rejected(self):
        rng, cfg, params, x, labels = tiny_setup()
        state = TrainState(params, {k2: np.zeros_like(v) for k2, v in params.arrays().items()},
                           cfg, Mode.baseline())
        with pytest.raises(ValueError, match="batch size"):
            train_step(x[:1], labels[:1], state, rng)


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = TrainConfig(epochs=3, rng_seed=9, lam=2.0)
        path = tmp_path / "cfg.txt"
        with open(path, "w") as fh:
            write_config(cfg, fh)
        assert load_config(path) == cfg

    def test_missing_key_named(self, tmp_path):
        cfg = TrainConfig()
        path = tmp_path / "cfg.txt"
        with open(path, "w") as fh:
            write_config(cfg, fh)
        text = path.read_text().replace("momentum=0.9\n", "")
        path.write_text(text)
        with pytest.raises(ConfigError, match="'momentum'"):
            load_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("bogus=1\n")
        with pytest.raises(ConfigError, match="unknown key"):
            load_config(path)

    def test_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(xi=1.5)
        with pytest.raises(ConfigError):
            TrainConfig(m=2.0)
        with pytest.raises(ConfigError):
            TrainConfig(batch_size=1)


class TestDataset:
    def test_shapes_and_balance(self):
        x, y = make_blob_dataset(800, 8, 16, rng_seed=3)
        assert x.shape == (800, 16)
        counts = np.bincount(y)
        assert counts.min() == counts.max() == 100

    def test_deterministic(self):
        a = make_blob_dataset(100, 4, 6, rng_seed=5)
        b = make_blob_dataset(100, 4, 6, rng_seed=5)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_round_trip_csv(self, tmp_path):
        x, y = make_blob_dataset(50, 3, 4, rng_seed=1)
        path = tmp_path / "data.csv"
        with open(path, "w") as fh:
            ta.trainer.save_labeled_dataset(x, y, fh)
        x2, y2 = ta.trainer.load_labeled_dataset(path)
        assert np.array_equal(x, x2) and np.array_equal(y, y2)


@pytest.fixture(scope="module")
def small_data():
    return make_blob_dataset(400, 3, 6, rng_seed=11)


class TestExperiment:
    def test_report_row_count(self, small_data):
        x, y = small_data
        cfg = TrainConfig(epochs=3, batch_size=32, hidden_dim=8, latent_dim=4, rng_seed=2)
        rows = run_experiment(x, y, cfg, Mode.baseline())
        assert len(rows) == 3
        assert [r["epoch"] for r in rows] == [1, 2, 3]

    def test_alpha_zero_equals_align_off(self, small_data):
        x, y = small_data
        cfg0 = TrainConfig(epochs=2, batch_size=32, hidden_dim=8, latent_dim=4,
                           rng_seed=2, alpha=0.0)
        cfg = TrainConfig(epochs=2, batch_size=32, hidden_dim=8, latent_dim=4,
                          rng_seed=2, alpha=0.1)
        rows_a = run_experiment(x, y, cfg0, Mode.full())
        rows_b = run_experiment(x, y, cfg, Mode(True, False, True, True))
        assert rows_a == rows_b

    def test_run_determinism(self, small_data):
        x, y = small_data
        cfg = TrainConfig(epochs=2, batch_size=32, hidden_dim=8, latent_dim=4, rng_seed=3)
        assert run_experiment(x, y, cfg, Mode.full()) == run_experiment(x, y, cfg, Mode.full())

    def test_report_serialization_round_trip(self, small_data, tmp_path):
        x, y = small_data
        cfg = TrainConfig(epochs=2, batch_size=32, hidden_dim=8, latent_dim=4, rng_seed=2)
        rows = run_experiment(x, y, cfg, Mode.baseline())
        path = tmp_path / "report.csv"
        with open(path, "w") as fh:
            write_report(rows, fh)
        back = read_report(path)
        assert [r["epoch"] for r in back] == [r["epoch"] for r in rows]
        for a, b in zip(back, rows):
            for key in a:
                assert a[key] == pytest.approx(b[key], rel=1e-11)
