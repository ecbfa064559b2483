"""Parity between the pure-numpy kernels and the compiled extension."""

import numpy as np
import pytest

from panelcast.neural import available_backends
from panelcast.neural import _kernels_np as ref

compiled = pytest.importorskip(
    "panelcast.neural._kernels_cy",
    reason="compiled kernels not built",
) if "compiled" in available_backends() else pytest.skip(
    "compiled kernels not built", allow_module_level=True)

SHAPES = [(1, 1, 1, 1), (5, 3, 1, 4), (8, 64, 2, 32), (3, 7, 2, 5)]


def _params(rng, idim, hdim, n_gates):
    ws = [rng.normal(size=(idim, hdim)) * 0.5 for _ in range(n_gates)]
    us = [rng.normal(size=(hdim, hdim)) * 0.5 for _ in range(n_gates)]
    bs = [rng.normal(size=hdim) * 0.5 for _ in range(n_gates)]
    return ws, us, bs


@pytest.mark.parametrize("shape", SHAPES)
def test_rnn_parity(shape):
    t, b, i, h = shape
    rng = np.random.default_rng(hash(shape) % 2**32)
    x = rng.normal(size=(t, b, i))
    d_h = rng.normal(size=(t, b, h))
    (ws,), (us,), (bs,) = _params(rng, i, h, 1)
    f1 = ref.rnn_forward(x, ws, us, bs)
    f2 = compiled.rnn_forward(x, ws, us, bs)
    np.testing.assert_allclose(f1[0], f2[0], atol=1e-13)
    b1 = ref.rnn_backward(x, f1[0], d_h, ws, us)
    b2 = compiled.rnn_backward(x, f2[0], d_h, ws, us)
    for a_, b_ in zip(b1, b2):
        np.testing.assert_allclose(a_, b_, atol=1e-12)


@pytest.mark.parametrize("shape", SHAPES)
def test_lstm_parity(shape):
    t, b, i, h = shape
    rng = np.random.default_rng(hash(shape) % 2**31)
    x = rng.normal(size=(t, b, i))
    d_h = rng.normal(size=(t, b, h))
    ws, us, bs = _params(rng, i, h, 4)
    f1 = ref.lstm_forward(x, *ws, *us, *bs)
    f2 = compiled.lstm_forward(x, *ws, *us, *bs)
    for a_, b_ in zip(f1, f2):
        np.testing.assert_allclose(a_, b_, atol=1e-13)
    b1 = ref.lstm_backward(x, *f1, d_h, *ws, *us)
    b2 = compiled.lstm_backward(x, *f2, d_h, *ws, *us)
    for a_, b_ in zip(b1, b2):
        np.testing.assert_allclose(a_, b_, atol=1e-12)


@pytest.mark.parametrize("shape", SHAPES)
def test_gru_parity(shape):
    t, b, i, h = shape
    rng = np.random.default_rng(hash(shape) % 2**30)
    x = rng.normal(size=(t, b, i))
    d_h = rng.normal(size=(t, b, h))
    ws, us, bs = _params(rng, i, h, 3)
    f1 = ref.gru_forward(x, *ws, *us, *bs)
    f2 = compiled.gru_forward(x, *ws, *us, *bs)
    for a_, b_ in zip(f1, f2):
        np.testing.assert_allclose(a_, b_, atol=1e-13)
    b1 = ref.gru_backward(x, *f1, d_h, *ws, *us)
    b2 = compiled.gru_backward(x, *f2, d_h, *ws, *us)
    for a_, b_ in zip(b1, b2):
        np.testing.assert_allclose(a_, b_, atol=1e-12)


def test_stable_sigmoid_extremes():
    x = np.array([-800.0, -50.0, 0.0, 50.0, 800.0])
    out = ref.sigmoid(x)
    assert out[0] == 0.0 and out[-1] == 1.0
    assert np.all(np.isfinite(out))
    assert out[2] == 0.5
