import numpy as np
import pytest

from panelcast.errors import NonFiniteActivationError
from panelcast.neural import (
    NetConfig,
    attention_weights,
    forward_bidirectional,
    forward_causal,
    init_model,
    load_model,
    predict_iterative,
    save_model,
)
from panelcast.neural.models import forward_train, param_spec


def model_for(arch, seed=0, hidden=6, **kw):
    cfg = NetConfig(arch=arch, hidden=hidden, dropout=0.0, seed=seed, **kw)
    return init_model(cfg, np.random.default_rng(seed))


class TestGateEndpoints:
    def test_gru_update_gate_one_selects_candidate(self, kernel_backend):
        m = model_for("gru")
        m.params["b_z"][:] = 800.0  # z == 1 exactly under the stable sigmoid
        rng = np.random.default_rng(1)
        x = rng.normal(size=(3, 7, 1))
        from panelcast.neural import get_kernels

        p = m.params
        x_tm = np.ascontiguousarray(x.transpose(1, 0, 2))
        h, r, z, hc = get_kernels().gru_forward(
            x_tm, p["W_r"], p["W_z"], p["W_h"], p["U_r"], p["U_z"], p["U_h"],
            p["b_r"], p["b_z"], p["b_h"])
        assert np.array_equal(z, np.ones_like(z))
        assert np.array_equal(h, hc)

    def test_gru_update_gate_zero_keeps_previous_state(self, kernel_backend):
        m = model_for("gru")
        m.params["b_z"][:] = -800.0  # z == 0 exactly
        rng = np.random.default_rng(2)
        x = rng.normal(size=(4, 7, 1))
        from panelcast.neural import get_kernels

        p = m.params
        x_tm = np.ascontiguousarray(x.transpose(1, 0, 2))
        h, r, z, hc = get_kernels().gru_forward(
            x_tm, p["W_r"], p["W_z"], p["W_h"], p["U_r"], p["U_z"], p["U_h"],
            p["b_r"], p["b_z"], p["b_h"])
        assert np.array_equal(z, np.zeros_like(z))
        assert np.array_equal(h, np.zeros_like(h))  # h stays at h0 = 0

    def test_lstm_forget_one_input_zero_freezes_cell(self, kernel_backend):
        m = model_for("lstm")
        m.params["b_f"][:] = 800.0
        m.params["b_i"][:] = -800.0
        rng = np.random.default_rng(3)
        x = rng.normal(size=(4, 5, 1))
        from panelcast.neural import get_kernels

        p = m.params
        x_tm = np.ascontiguousarray(x.transpose(1, 0, 2))
        h, c, *_ = get_kernels().lstm_forward(
            x_tm, p["W_f"], p["W_i"], p["W_o"], p["W_c"],
            p["U_f"], p["U_i"], p["U_o"], p["U_c"],
            p["b_f"], p["b_i"], p["b_o"], p["b_c"])
        assert np.array_equal(c, np.zeros_like(c))  # cell pinned at c0 = 0


class TestCausality:
    @pytest.mark.parametrize("arch", ["rnn", "lstm", "gru"])
    def test_future_perturbation_exact_invariance(self, arch, kernel_backend):
        m = model_for(arch)
        rng = np.random.default_rng(4)
        x = rng.normal(size=(5, 8, 1))
        base = forward_causal(m, x)
        for t in (2, 5):
            x2 = x.copy()
            x2[:, t + 1:] += rng.normal(size=x2[:, t + 1:].shape) * 100
            out = forward_causal(m, x2)
            assert np.array_equal(out[:, :t + 1], base[:, :t + 1])

    @pytest.mark.parametrize("arch", ["rnn", "lstm", "gru"])
    def test_iterative_equals_single_pass(self, arch, kernel_backend):
        m = model_for(arch)
        rng = np.random.default_rng(5)
        x = rng.normal(size=(6, 9, 1))
        full = forward_causal(m, x)
        it = predict_iterative(m, x, [6, 8])
        assert np.abs(it - full[:, [6, 8]]).max() < 1e-12

    @pytest.mark.parametrize("arch", ["bilstm", "transformer"])
    def test_iterative_ignores_future_inputs(self, arch, kernel_backend):
        m = model_for(arch)
        rng = np.random.default_rng(6)
        x = rng.normal(size=(4, 10, 1))
        t = 6
        base = predict_iterative(m, x, [t])
        for _ in range(5):
            x2 = x.copy()
            x2[:, t + 1:] = rng.normal(size=x2[:, t + 1:].shape) * 50
            assert np.array_equal(predict_iterative(m, x2, [t]), base)

    @pytest.mark.parametrize("arch", ["bilstm", "transformer"])
    def test_full_pass_differs_from_iterative(self, arch, kernel_backend):
        # the in-sample smoothing that motivates the iterative protocol
        m = model_for(arch, seed=7)
        rng = np.random.default_rng(7)
        x = rng.normal(size=(4, 10, 1))
        t = 6
        full = forward_bidirectional(m, x)[:, t]
        it = predict_iterative(m, x, [t])[:, 0]
        assert np.abs(full - it).max() > 1e-8

    def test_wrong_direction_dispatch(self):
        with pytest.raises(ValueError, match="not causal"):
            forward_causal(model_for("bilstm"), np.zeros((2, 3, 1)))
        with pytest.raises(ValueError, match="causal"):
            forward_bidirectional(model_for("gru"), np.zeros((2, 3, 1)))


class TestAttention:
    def test_singleton_sequence_weight_one(self):
        m = model_for("transformer")
        x = np.random.default_rng(8).normal(size=(3, 1, 1))
        alpha = attention_weights(m, x)
        assert np.array_equal(alpha, np.ones_like(alpha))

    def test_zero_projections_uniform(self):
        m = model_for("transformer", hidden=4)
        for h in range(m.config.heads):
            m.params[f"Q_{h}"][:] = 0.0
            m.params[f"K_{h}"][:] = 0.0
        x = np.random.default_rng(9).normal(size=(2, 5, 1))
        alpha = attention_weights(m, x)
        assert np.abs(alpha - 0.2).max() < 1e-15

    def test_rows_sum_to_one(self):
        m = model_for("transformer")
        x = np.random.default_rng(10).normal(size=(4, 7, 1))
        alpha = attention_weights(m, x)
        assert np.abs(alpha.sum(axis=3) - 1.0).max() < 1e-10
        assert alpha.min() >= 0.0


class TestParameterCounts:
    def test_gru_lstm_bilstm_ordering(self):
        counts = {}
        for arch in ("gru", "lstm", "bilstm"):
            cfg = NetConfig(arch=arch, hidden=32)
            counts[arch] = sum(np.prod(s) for _, s, _ in param_spec(cfg))
        assert counts["gru"] < counts["lstm"] < counts["bilstm"]

    def test_gru_recurrent_params_three_quarters_of_lstm(self):
        cfg_g = NetConfig(arch="gru", hidden=32)
        cfg_l = NetConfig(arch="lstm", hidden=32)
        rec = lambda spec: sum(
            np.prod(s) for n, s, _ in spec if not n.startswith(("W_y", "b_y")))
        ratio = rec(param_spec(cfg_g)) / rec(param_spec(cfg_l))
        assert ratio == pytest.approx(0.75)


class TestErrorsAndIo:
    def test_non_finite_activation_reports_step(self):
        m = model_for("gru")
        m.params["W_r"][0, 0] = np.nan
        x = np.random.default_rng(11).normal(size=(2, 4, 1))
        with pytest.raises(NonFiniteActivationError) as exc:
            forward_causal(m, x)
        assert exc.value.step == 0

    def test_prediction_is_deterministic(self):
        # dropout must be off outside training: repeated calls bitwise equal
        m = model_for("transformer")
        x = np.random.default_rng(12).normal(size=(3, 6, 1))
        a = forward_bidirectional(m, x)
        b = forward_bidirectional(m, x)
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("arch", ["rnn", "lstm", "gru", "bilstm", "transformer"])
    def test_checkpoint_round_trip_bitwise(self, arch, tmp_path):
        m = model_for(arch, seed=13)
        path = str(tmp_path / f"{arch}.npz")
        save_model(m, path)
        back = load_model(path)
        assert back.config == m.config
        assert set(back.params) == set(m.params)
        for k in m.params:
            assert np.array_equal(back.params[k], m.params[k])

    def test_glorot_bounds_and_forget_bias(self):
        m = model_for("lstm", hidden=16)
        lim = np.sqrt(6.0 / (16 + 16))
        assert np.abs(m.params["U_f"]).max() <= lim
        assert np.array_equal(m.params["b_f"], np.ones(16))
        assert np.array_equal(m.params["b_i"], np.zeros(16))
