"""Pure-numpy recurrent cell kernels (reference backend).

All kernels are time-major: inputs X have shape (T, B, I), hidden sequences
(T, B, H). Input projections are hoisted out of the time loop into single
matmuls; only the recurrent products run per step. The compiled backend in
_kernels_cy implements the same signatures; parity between the two is
enforced by tests.

Gradients follow the convention that dH holds dLoss/dh_t for the *emitted*
hidden state at every step (the recurrent contribution is accumulated
internally). Weight gradients are summed over time via flattened matmuls so
the reduction order is fixed and runs are reproducible.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def sigmoid(x: np.ndarray) -> np.ndarray:
    # stable two-branch evaluation, exact for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _shifted(h: np.ndarray) -> np.ndarray:
    """[0, h_0, ..., h_{T-2}]: the h_{t-1} sequence including the zero start."""
    out = np.empty_like(h)
    out[0] = 0.0
    out[1:] = h[:-1]
    return out


# --- basic RNN -----------------------------------------------------------------

def rnn_forward(x, w_x, w_h, b_h):
    t_len, b_len, _ = x.shape
    hdim = w_h.shape[0]
    proj = x @ w_x + b_h
    h = np.empty((t_len, b_len, hdim))
    h_prev = np.zeros((b_len, hdim))
    for t in range(t_len):
        h_prev = np.tanh(proj[t] + h_prev @ w_h)
        h[t] = h_prev
    return (h,)


def rnn_backward(x, h, d_h, w_x, w_h):
    t_len, b_len, idim = x.shape
    hdim = w_h.shape[0]
    da = np.empty((t_len, b_len, hdim))
    dh_rec = np.zeros((b_len, hdim))
    for t in range(t_len - 1, -1, -1):
        dht = d_h[t] + dh_rec
        da[t] = dht * (1.0 - h[t] * h[t])
        dh_rec = da[t] @ w_h.T
    h_prev = _shifted(h)
    da_f = da.reshape(-1, hdim)
    d_wx = x.reshape(-1, idim).T @ da_f
    d_wh = h_prev.reshape(-1, hdim).T @ da_f
    d_b = da_f.sum(axis=0)
    d_x = da @ w_x.T
    return d_x, d_wx, d_wh, d_b


# --- LSTM ----------------------------------------------------------------------

def lstm_forward(x, w_f, w_i, w_o, w_c, u_f, u_i, u_o, u_c, b_f, b_i, b_o, b_c):
    t_len, b_len, _ = x.shape
    hdim = u_f.shape[0]
    pf = x @ w_f + b_f
    pi = x @ w_i + b_i
    po = x @ w_o + b_o
    pc = x @ w_c + b_c
    h = np.empty((t_len, b_len, hdim))
    c = np.empty_like(h)
    f = np.empty_like(h)
    i_ = np.empty_like(h)
    o = np.empty_like(h)
    g = np.empty_like(h)
    h_prev = np.zeros((b_len, hdim))
    c_prev = np.zeros((b_len, hdim))
    for t in range(t_len):
        ft = sigmoid(pf[t] + h_prev @ u_f)
        it = sigmoid(pi[t] + h_prev @ u_i)
        ot = sigmoid(po[t] + h_prev @ u_o)
        gt = np.tanh(pc[t] + h_prev @ u_c)
        c_prev = ft * c_prev + it * gt
        h_prev = ot * np.tanh(c_prev)
        f[t], i_[t], o[t], g[t] = ft, it, ot, gt
        c[t], h[t] = c_prev, h_prev
    return h, c, f, i_, o, g


def lstm_backward(x, h, c, f, i_, o, g, d_h,
                  w_f, w_i, w_o, w_c, u_f, u_i, u_o, u_c):
    t_len, b_len, idim = x.shape
    hdim = u_f.shape[0]
    da_f = np.empty((t_len, b_len, hdim))
    da_i = np.empty_like(da_f)
    da_o = np.empty_like(da_f)
    da_g = np.empty_like(da_f)
    dh_rec = np.zeros((b_len, hdim))
    dc_rec = np.zeros((b_len, hdim))
    for t in range(t_len - 1, -1, -1):
        c_prev = c[t - 1] if t > 0 else np.zeros((b_len, hdim))
        dht = d_h[t] + dh_rec
        tc = np.tanh(c[t])
        do = dht * tc
        dc = dc_rec + dht * o[t] * (1.0 - tc * tc)
        da_f[t] = dc * c_prev * f[t] * (1.0 - f[t])
        da_i[t] = dc * g[t] * i_[t] * (1.0 - i_[t])
        da_o[t] = do * o[t] * (1.0 - o[t])
        da_g[t] = dc * i_[t] * (1.0 - g[t] * g[t])
        dc_rec = dc * f[t]
        dh_rec = da_f[t] @ u_f.T + da_i[t] @ u_i.T + da_o[t] @ u_o.T + da_g[t] @ u_c.T
    h_prev = _shifted(h).reshape(-1, hdim)
    x_f = x.reshape(-1, idim)
    flats = [a.reshape(-1, hdim) for a in (da_f, da_i, da_o, da_g)]
    d_ws = [x_f.T @ a for a in flats]
    d_us = [h_prev.T @ a for a in flats]
    d_bs = [a.sum(axis=0) for a in flats]
    d_x = da_f @ w_f.T + da_i @ w_i.T + da_o @ w_o.T + da_g @ w_c.T
    return (d_x, *d_ws, *d_us, *d_bs)


# --- GRU -----------------------------------------------------------------------

def gru_forward(x, w_r, w_z, w_c, u_r, u_z, u_c, b_r, b_z, b_c):
    t_len, b_len, _ = x.shape
    hdim = u_r.shape[0]
    pr = x @ w_r + b_r
    pz = x @ w_z + b_z
    pc = x @ w_c + b_c
    h = np.empty((t_len, b_len, hdim))
    r = np.empty_like(h)
    z = np.empty_like(h)
    hc = np.empty_like(h)
    h_prev = np.zeros((b_len, hdim))
    for t in range(t_len):
        rt = sigmoid(pr[t] + h_prev @ u_r)
        zt = sigmoid(pz[t] + h_prev @ u_z)
        ct = np.tanh(pc[t] + (rt * h_prev) @ u_c)
        h_prev = (1.0 - zt) * h_prev + zt * ct
        r[t], z[t], hc[t], h[t] = rt, zt, ct, h_prev
    return h, r, z, hc


def gru_backward(x, h, r, z, hc, d_h, w_r, w_z, w_c, u_r, u_z, u_c):
    t_len, b_len, idim = x.shape
    hdim = u_r.shape[0]
    da_r = np.empty((t_len, b_len, hdim))
    da_z = np.empty_like(da_r)
    da_c = np.empty_like(da_r)
    dh_rec = np.zeros((b_len, hdim))
    for t in range(t_len - 1, -1, -1):
        h_prev = h[t - 1] if t > 0 else np.zeros((b_len, hdim))
        dht = d_h[t] + dh_rec
        dz = dht * (hc[t] - h_prev)
        dc = dht * z[t] * (1.0 - hc[t] * hc[t])
        dh_rec = dht * (1.0 - z[t])
        drh = dc @ u_c.T
        dh_rec = dh_rec + drh * r[t]
        dr = drh * h_prev
        da_r[t] = dr * r[t] * (1.0 - r[t])
        da_z[t] = dz * z[t] * (1.0 - z[t])
        da_c[t] = dc
        dh_rec = dh_rec + da_r[t] @ u_r.T + da_z[t] @ u_z.T
    h_prev_seq = _shifted(h)
    x_f = x.reshape(-1, idim)
    hp_f = h_prev_seq.reshape(-1, hdim)
    rhp_f = (r * h_prev_seq).reshape(-1, hdim)
    ar, az, ac = (a.reshape(-1, hdim) for a in (da_r, da_z, da_c))
    d_wr, d_wz, d_wc = x_f.T @ ar, x_f.T @ az, x_f.T @ ac
    d_ur, d_uz = hp_f.T @ ar, hp_f.T @ az
    d_uc = rhp_f.T @ ac
    d_br, d_bz, d_bc = ar.sum(axis=0), az.sum(axis=0), ac.sum(axis=0)
    d_x = da_r @ w_r.T + da_z @ w_z.T + da_c @ w_c.T
    return d_x, d_wr, d_wz, d_wc, d_ur, d_uz, d_uc, d_br, d_bz, d_bc
