# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled recurrent cell kernels.

Same signatures and layout conventions as _kernels_np (time-major, C
contiguous, float64). Matrix products go through BLAS dgemm; the gate
arithmetic runs in fused scalar loops, which removes the per-step numpy
dispatch overhead that dominates at panel-sized batches.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh as ctanh
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

NAME = "compiled"

cdef char CN = 110  # 'n'
cdef char CT = 116  # 't'


cdef inline void gemm_nn(double* a, double* b, double* c,
                         int m, int k, int n, double beta) noexcept nogil:
    """Row-major C(m,n) = A(m,k) @ B(k,n) + beta * C."""
    cdef double one = 1.0
    dgemm(&CN, &CN, &n, &m, &k, &one, b, &n, a, &k, &beta, c, &n)


cdef inline void gemm_nt(double* a, double* b, double* c,
                         int m, int k, int n, double beta) noexcept nogil:
    """Row-major C(m,n) = A(m,k) @ B(n,k)^T + beta * C."""
    cdef double one = 1.0
    dgemm(&CT, &CN, &n, &m, &k, &one, b, &k, a, &k, &beta, c, &n)


cdef inline void gemm_tn(double* a, double* b, double* c,
                         int m, int k, int n, double beta) noexcept nogil:
    """Row-major C(m,n) = A(k,m)^T @ B(k,n) + beta * C."""
    cdef double one = 1.0
    dgemm(&CN, &CT, &n, &m, &k, &one, b, &n, a, &m, &beta, c, &n)


cdef inline double sig(double v) noexcept nogil:
    cdef double e
    if v >= 0.0:
        return 1.0 / (1.0 + exp(-v))
    e = exp(v)
    return e / (1.0 + e)


cdef void _shift_copy(double[:, :, ::1] src, double[:, :, ::1] dst) noexcept nogil:
    """dst[0] stays zero, dst[t] = src[t-1] for t >= 1."""
    cdef Py_ssize_t t_len = src.shape[0]
    cdef Py_ssize_t frame = src.shape[1] * src.shape[2]
    if t_len > 1:
        memcpy(&dst[1, 0, 0], &src[0, 0, 0], (t_len - 1) * frame * sizeof(double))


# --- basic RNN -----------------------------------------------------------------

def rnn_forward(double[:, :, ::1] x, double[:, ::1] w_x, double[:, ::1] w_h,
                double[::1] b_h):
    cdef int t_len = <int> x.shape[0]
    cdef int b_len = <int> x.shape[1]
    cdef int idim = <int> x.shape[2]
    cdef int hdim = <int> w_h.shape[0]
    h_arr = np.empty((t_len, b_len, hdim))
    proj_arr = np.empty((t_len, b_len, hdim))
    zero_arr = np.zeros((b_len, hdim))
    cdef double[:, :, ::1] h = h_arr, proj = proj_arr
    cdef double[:, ::1] zbuf = zero_arr
    cdef double* hp = &zbuf[0, 0]
    cdef Py_ssize_t t, q
    cdef Py_ssize_t bh = b_len * hdim
    with nogil:
        gemm_nn(&x[0, 0, 0], &w_x[0, 0], &proj[0, 0, 0],
                t_len * b_len, idim, hdim, 0.0)
        for t in range(t_len):
            gemm_nn(hp, &w_h[0, 0], &proj[t, 0, 0], b_len, hdim, hdim, 1.0)
            for q in range(bh):
                (&h[t, 0, 0])[q] = ctanh((&proj[t, 0, 0])[q] + b_h[q % hdim])
            hp = &h[t, 0, 0]
    return (h_arr,)


def rnn_backward(double[:, :, ::1] x, double[:, :, ::1] h, double[:, :, ::1] d_h,
                 double[:, ::1] w_x, double[:, ::1] w_h):
    cdef int t_len = <int> x.shape[0]
    cdef int b_len = <int> x.shape[1]
    cdef int idim = <int> x.shape[2]
    cdef int hdim = <int> w_h.shape[0]
    da_arr = np.empty((t_len, b_len, hdim))
    dh_rec_arr = np.zeros((b_len, hdim))
    hprev_arr = np.zeros((t_len, b_len, hdim))
    d_x_arr = np.empty((t_len, b_len, idim))
    d_wx_arr = np.empty((idim, hdim))
    d_wh_arr = np.empty((hdim, hdim))
    cdef double[:, :, ::1] da = da_arr, hprev = hprev_arr, d_x = d_x_arr
    cdef double[:, ::1] dh_rec = dh_rec_arr, d_wx = d_wx_arr, d_wh = d_wh_arr
    cdef Py_ssize_t t, q
    cdef Py_ssize_t bh = b_len * hdim
    cdef int tb = t_len * b_len
    cdef double hv
    with nogil:
        _shift_copy(h, hprev)
        for t in range(t_len - 1, -1, -1):
            for q in range(bh):
                hv = (&h[t, 0, 0])[q]
                (&da[t, 0, 0])[q] = ((&d_h[t, 0, 0])[q] + (&dh_rec[0, 0])[q]) \
                    * (1.0 - hv * hv)
            gemm_nt(&da[t, 0, 0], &w_h[0, 0], &dh_rec[0, 0], b_len, hdim, hdim, 0.0)
        gemm_tn(&x[0, 0, 0], &da[0, 0, 0], &d_wx[0, 0], idim, tb, hdim, 0.0)
        gemm_tn(&hprev[0, 0, 0], &da[0, 0, 0], &d_wh[0, 0], hdim, tb, hdim, 0.0)
        gemm_nt(&da[0, 0, 0], &w_x[0, 0], &d_x[0, 0, 0], tb, hdim, idim, 0.0)
    d_b = np.asarray(da_arr).sum(axis=(0, 1))
    return d_x_arr, d_wx_arr, d_wh_arr, d_b


# --- LSTM ----------------------------------------------------------------------

def lstm_forward(double[:, :, ::1] x,
                 double[:, ::1] w_f, double[:, ::1] w_i, double[:, ::1] w_o,
                 double[:, ::1] w_c,
                 double[:, ::1] u_f, double[:, ::1] u_i, double[:, ::1] u_o,
                 double[:, ::1] u_c,
                 double[::1] b_f, double[::1] b_i, double[::1] b_o,
                 double[::1] b_c):
    cdef int t_len = <int> x.shape[0]
    cdef int b_len = <int> x.shape[1]
    cdef int idim = <int> x.shape[2]
    cdef int hdim = <int> u_f.shape[0]
    h_arr = np.empty((t_len, b_len, hdim))
    c_arr = np.empty((t_len, b_len, hdim))
    f_arr = np.empty((t_len, b_len, hdim))
    i_arr = np.empty((t_len, b_len, hdim))
    o_arr = np.empty((t_len, b_len, hdim))
    g_arr = np.empty((t_len, b_len, hdim))
    pf_arr = np.empty((t_len, b_len, hdim))
    pi_arr = np.empty((t_len, b_len, hdim))
    po_arr = np.empty((t_len, b_len, hdim))
    pg_arr = np.empty((t_len, b_len, hdim))
    zero_arr = np.zeros((b_len, hdim))
    cdef double[:, :, ::1] h = h_arr, c = c_arr, f = f_arr, i_ = i_arr
    cdef double[:, :, ::1] o = o_arr, g = g_arr
    cdef double[:, :, ::1] pf = pf_arr, pi = pi_arr, po = po_arr, pg = pg_arr
    cdef double[:, ::1] zbuf = zero_arr
    cdef double* hp = &zbuf[0, 0]
    cdef double* cp = &zbuf[0, 0]
    cdef Py_ssize_t t, q, j
    cdef Py_ssize_t bh = b_len * hdim
    cdef int tb = t_len * b_len
    cdef double ft, it, ot, gt, cv
    with nogil:
        gemm_nn(&x[0, 0, 0], &w_f[0, 0], &pf[0, 0, 0], tb, idim, hdim, 0.0)
        gemm_nn(&x[0, 0, 0], &w_i[0, 0], &pi[0, 0, 0], tb, idim, hdim, 0.0)
        gemm_nn(&x[0, 0, 0], &w_o[0, 0], &po[0, 0, 0], tb, idim, hdim, 0.0)
        gemm_nn(&x[0, 0, 0], &w_c[0, 0], &pg[0, 0, 0], tb, idim, hdim, 0.0)
        for t in range(t_len):
            gemm_nn(hp, &u_f[0, 0], &pf[t, 0, 0], b_len, hdim, hdim, 1.0)
            gemm_nn(hp, &u_i[0, 0], &pi[t, 0, 0], b_len, hdim, hdim, 1.0)
            gemm_nn(hp, &u_o[0, 0], &po[t, 0, 0], b_len, hdim, hdim, 1.0)
            gemm_nn(hp, &u_c[0, 0], &pg[t, 0, 0], b_len, hdim, hdim, 1.0)
            for q in range(bh):
                j = q % hdim
                ft = sig((&pf[t, 0, 0])[q] + b_f[j])
                it = sig((&pi[t, 0, 0])[q] + b_i[j])
                ot = sig((&po[t, 0, 0])[q] + b_o[j])
                gt = ctanh((&pg[t, 0, 0])[q] + b_c[j])
                cv = ft * cp[q] + it * gt
                (&f[t, 0, 0])[q] = ft
                (&i_[t, 0, 0])[q] = it
                (&o[t, 0, 0])[q] = ot
                (&g[t, 0, 0])[q] = gt
                (&c[t, 0, 0])[q] = cv
                (&h[t, 0, 0])[q] = ot * ctanh(cv)
            hp = &h[t, 0, 0]
            cp = &c[t, 0, 0]
    return h_arr, c_arr, f_arr, i_arr, o_arr, g_arr


def lstm_backward(double[:, :, ::1] x, double[:, :, ::1] h, double[:, :, ::1] c,
                  double[:, :, ::1] f, double[:, :, ::1] i_, double[:, :, ::1] o,
                  double[:, :, ::1] g, double[:, :, ::1] d_h,
                  double[:, ::1] w_f, double[:, ::1] w_i, double[:, ::1] w_o,
                  double[:, ::1] w_c,
                  double[:, ::1] u_f, double[:, ::1] u_i, double[:, ::1] u_o,
                  double[:, ::1] u_c):
    cdef int t_len = <int> x.shape[0]
    cdef int b_len = <int> x.shape[1]
    cdef int idim = <int> x.shape[2]
    cdef int hdim = <int> u_f.shape[0]
    daf_arr = np.empty((t_len, b_len, hdim))
    dai_arr = np.empty((t_len, b_len, hdim))
    dao_arr = np.empty((t_len, b_len, hdim))
    dag_arr = np.empty((t_len, b_len, hdim))
    dh_rec_arr = np.zeros((b_len, hdim))
    dc_rec_arr = np.zeros((b_len, hdim))
    hprev_arr = np.zeros((t_len, b_len, hdim))
    d_x_arr = np.empty((t_len, b_len, idim))
    d_wf_arr = np.empty((idim, hdim))
    d_wi_arr = np.empty((idim, hdim))
    d_wo_arr = np.empty((idim, hdim))
    d_wc_arr = np.empty((idim, hdim))
    d_uf_arr = np.empty((hdim, hdim))
    d_ui_arr = np.empty((hdim, hdim))
    d_uo_arr = np.empty((hdim, hdim))
    d_uc_arr = np.empty((hdim, hdim))
    cdef double[:, :, ::1] daf = daf_arr, dai = dai_arr, dao = dao_arr, dag = dag_arr
    cdef double[:, ::1] dh_rec = dh_rec_arr, dc_rec = dc_rec_arr
    cdef double[:, :, ::1] hprev = hprev_arr, d_x = d_x_arr
    cdef double[:, ::1] d_wf = d_wf_arr, d_wi = d_wi_arr
    cdef double[:, ::1] d_wo = d_wo_arr, d_wc = d_wc_arr
    cdef double[:, ::1] d_uf = d_uf_arr, d_ui = d_ui_arr
    cdef double[:, ::1] d_uo = d_uo_arr, d_uc = d_uc_arr
    cdef Py_ssize_t t, q
    cdef Py_ssize_t bh = b_len * hdim
    cdef int tb = t_len * b_len
    cdef double tc, dht, do_, dc, cprev, fv, iv, ov, gv
    with nogil:
        _shift_copy(h, hprev)
        for t in range(t_len - 1, -1, -1):
            for q in range(bh):
                fv = (&f[t, 0, 0])[q]
                iv = (&i_[t, 0, 0])[q]
                ov = (&o[t, 0, 0])[q]
                gv = (&g[t, 0, 0])[q]
                cprev = (&c[t - 1, 0, 0])[q] if t > 0 else 0.0
                tc = ctanh((&c[t, 0, 0])[q])
                dht = (&d_h[t, 0, 0])[q] + (&dh_rec[0, 0])[q]
                do_ = dht * tc
                dc = (&dc_rec[0, 0])[q] + dht * ov * (1.0 - tc * tc)
                (&daf[t, 0, 0])[q] = dc * cprev * fv * (1.0 - fv)
                (&dai[t, 0, 0])[q] = dc * gv * iv * (1.0 - iv)
                (&dao[t, 0, 0])[q] = do_ * ov * (1.0 - ov)
                (&dag[t, 0, 0])[q] = dc * iv * (1.0 - gv * gv)
                (&dc_rec[0, 0])[q] = dc * fv
            gemm_nt(&daf[t, 0, 0], &u_f[0, 0], &dh_rec[0, 0], b_len, hdim, hdim, 0.0)
            gemm_nt(&dai[t, 0, 0], &u_i[0, 0], &dh_rec[0, 0], b_len, hdim, hdim, 1.0)
            gemm_nt(&dao[t, 0, 0], &u_o[0, 0], &dh_rec[0, 0], b_len, hdim, hdim, 1.0)
            gemm_nt(&dag[t, 0, 0], &u_c[0, 0], &dh_rec[0, 0], b_len, hdim, hdim, 1.0)
        gemm_tn(&x[0, 0, 0], &daf[0, 0, 0], &d_wf[0, 0], idim, tb, hdim, 0.0)
        gemm_tn(&x[0, 0, 0], &dai[0, 0, 0], &d_wi[0, 0], idim, tb, hdim, 0.0)
        gemm_tn(&x[0, 0, 0], &dao[0, 0, 0], &d_wo[0, 0], idim, tb, hdim, 0.0)
        gemm_tn(&x[0, 0, 0], &dag[0, 0, 0], &d_wc[0, 0], idim, tb, hdim, 0.0)
        gemm_tn(&hprev[0, 0, 0], &daf[0, 0, 0], &d_uf[0, 0], hdim, tb, hdim, 0.0)
        gemm_tn(&hprev[0, 0, 0], &dai[0, 0, 0], &d_ui[0, 0], hdim, tb, hdim, 0.0)
        gemm_tn(&hprev[0, 0, 0], &dao[0, 0, 0], &d_uo[0, 0], hdim, tb, hdim, 0.0)
        gemm_tn(&hprev[0, 0, 0], &dag[0, 0, 0], &d_uc[0, 0], hdim, tb, hdim, 0.0)
        gemm_nt(&daf[0, 0, 0], &w_f[0, 0], &d_x[0, 0, 0], tb, hdim, idim, 0.0)
        gemm_nt(&dai[0, 0, 0], &w_i[0, 0], &d_x[0, 0, 0], tb, hdim, idim, 1.0)
        gemm_nt(&dao[0, 0, 0], &w_o[0, 0], &d_x[0, 0, 0], tb, hdim, idim, 1.0)
        gemm_nt(&dag[0, 0, 0], &w_c[0, 0], &d_x[0, 0, 0], tb, hdim, idim, 1.0)
    d_bf = np.asarray(daf_arr).sum(axis=(0, 1))
    d_bi = np.asarray(dai_arr).sum(axis=(0, 1))
    d_bo = np.asarray(dao_arr).sum(axis=(0, 1))
    d_bc = np.asarray(dag_arr).sum(axis=(0, 1))
    return (d_x_arr, d_wf_arr, d_wi_arr, d_wo_arr, d_wc_arr,
            d_uf_arr, d_ui_arr, d_uo_arr, d_uc_arr,
            d_bf, d_bi, d_bo, d_bc)


# --- GRU -----------------------------------------------------------------------

def gru_forward(double[:, :, ::1] x,
                double[:, ::1] w_r, double[:, ::1] w_z, double[:, ::1] w_c,
                double[:, ::1] u_r, double[:, ::1] u_z, double[:, ::1] u_c,
                double[::1] b_r, double[::1] b_z, double[::1] b_c):
    cdef int t_len = <int> x.shape[0]
    cdef int b_len = <int> x.shape[1]
    cdef int idim = <int> x.shape[2]
    cdef int hdim = <int> u_r.shape[0]
    h_arr = np.empty((t_len, b_len, hdim))
    r_arr = np.empty((t_len, b_len, hdim))
    z_arr = np.empty((t_len, b_len, hdim))
    hc_arr = np.empty((t_len, b_len, hdim))
    pr_arr = np.empty((t_len, b_len, hdim))
    pz_arr = np.empty((t_len, b_len, hdim))
    pc_arr = np.empty((t_len, b_len, hdim))
    rh_arr = np.empty((b_len, hdim))
    zero_arr = np.zeros((b_len, hdim))
    cdef double[:, :, ::1] h = h_arr, r = r_arr, z = z_arr, hc = hc_arr
    cdef double[:, :, ::1] pr = pr_arr, pz = pz_arr, pc = pc_arr
    cdef double[:, ::1] rh = rh_arr, zbuf = zero_arr
    cdef double* hp = &zbuf[0, 0]
    cdef Py_ssize_t t, q, j
    cdef Py_ssize_t bh = b_len * hdim
    cdef int tb = t_len * b_len
    cdef double rv, zv, cv
    with nogil:
        gemm_nn(&x[0, 0, 0], &w_r[0, 0], &pr[0, 0, 0], tb, idim, hdim, 0.0)
        gemm_nn(&x[0, 0, 0], &w_z[0, 0], &pz[0, 0, 0], tb, idim, hdim, 0.0)
        gemm_nn(&x[0, 0, 0], &w_c[0, 0], &pc[0, 0, 0], tb, idim, hdim, 0.0)
        for t in range(t_len):
            gemm_nn(hp, &u_r[0, 0], &pr[t, 0, 0], b_len, hdim, hdim, 1.0)
            gemm_nn(hp, &u_z[0, 0], &pz[t, 0, 0], b_len, hdim, hdim, 1.0)
            for q in range(bh):
                j = q % hdim
                rv = sig((&pr[t, 0, 0])[q] + b_r[j])
                (&r[t, 0, 0])[q] = rv
                (&z[t, 0, 0])[q] = sig((&pz[t, 0, 0])[q] + b_z[j])
                (&rh[0, 0])[q] = rv * hp[q]
            gemm_nn(&rh[0, 0], &u_c[0, 0], &pc[t, 0, 0], b_len, hdim, hdim, 1.0)
            for q in range(bh):
                j = q % hdim
                cv = ctanh((&pc[t, 0, 0])[q] + b_c[j])
                zv = (&z[t, 0, 0])[q]
                (&hc[t, 0, 0])[q] = cv
                (&h[t, 0, 0])[q] = (1.0 - zv) * hp[q] + zv * cv
            hp = &h[t, 0, 0]
    return h_arr, r_arr, z_arr, hc_arr


def gru_backward(double[:, :, ::1] x, double[:, :, ::1] h, double[:, :, ::1] r,
                 double[:, :, ::1] z, double[:, :, ::1] hc, double[:, :, ::1] d_h,
                 double[:, ::1] w_r, double[:, ::1] w_z, double[:, ::1] w_c,
                 double[:, ::1] u_r, double[:, ::1] u_z, double[:, ::1] u_c):
    cdef int t_len = <int> x.shape[0]
    cdef int b_len = <int> x.shape[1]
    cdef int idim = <int> x.shape[2]
    cdef int hdim = <int> u_r.shape[0]
    dar_arr = np.empty((t_len, b_len, hdim))
    daz_arr = np.empty((t_len, b_len, hdim))
    dac_arr = np.empty((t_len, b_len, hdim))
    dh_rec_arr = np.zeros((b_len, hdim))
    drh_arr = np.empty((b_len, hdim))
    hprev_arr = np.zeros((t_len, b_len, hdim))
    rhprev_arr = np.empty((t_len, b_len, hdim))
    d_x_arr = np.empty((t_len, b_len, idim))
    d_wr_arr = np.empty((idim, hdim))
    d_wz_arr = np.empty((idim, hdim))
    d_wc_arr = np.empty((idim, hdim))
    d_ur_arr = np.empty((hdim, hdim))
    d_uz_arr = np.empty((hdim, hdim))
    d_uc_arr = np.empty((hdim, hdim))
    cdef double[:, :, ::1] dar = dar_arr, daz = daz_arr, dac = dac_arr
    cdef double[:, ::1] dh_rec = dh_rec_arr, drh = drh_arr
    cdef double[:, :, ::1] hprev = hprev_arr, rhprev = rhprev_arr, d_x = d_x_arr
    cdef double[:, ::1] d_wr = d_wr_arr, d_wz = d_wz_arr, d_wc = d_wc_arr
    cdef double[:, ::1] d_ur = d_ur_arr, d_uz = d_uz_arr, d_uc = d_uc_arr
    cdef Py_ssize_t t, q
    cdef Py_ssize_t bh = b_len * hdim
    cdef int tb = t_len * b_len
    cdef double dht, hpv, rv, zv, cv, dz, dc, dr
    with nogil:
        _shift_copy(h, hprev)
        for q in range(t_len * bh):
            (&rhprev[0, 0, 0])[q] = (&r[0, 0, 0])[q] * (&hprev[0, 0, 0])[q]
        for t in range(t_len - 1, -1, -1):
            for q in range(bh):
                rv = (&r[t, 0, 0])[q]
                zv = (&z[t, 0, 0])[q]
                cv = (&hc[t, 0, 0])[q]
                hpv = (&hprev[t, 0, 0])[q]
                dht = (&d_h[t, 0, 0])[q] + (&dh_rec[0, 0])[q]
                dz = dht * (cv - hpv)
                dc = dht * zv * (1.0 - cv * cv)
                (&dac[t, 0, 0])[q] = dc
                (&daz[t, 0, 0])[q] = dz * zv * (1.0 - zv)
                (&dh_rec[0, 0])[q] = dht * (1.0 - zv)
            gemm_nt(&dac[t, 0, 0], &u_c[0, 0], &drh[0, 0], b_len, hdim, hdim, 0.0)
            for q in range(bh):
                rv = (&r[t, 0, 0])[q]
                hpv = (&hprev[t, 0, 0])[q]
                dr = (&drh[0, 0])[q] * hpv
                (&dar[t, 0, 0])[q] = dr * rv * (1.0 - rv)
                (&dh_rec[0, 0])[q] += (&drh[0, 0])[q] * rv
            gemm_nt(&dar[t, 0, 0], &u_r[0, 0], &dh_rec[0, 0], b_len, hdim, hdim, 1.0)
            gemm_nt(&daz[t, 0, 0], &u_z[0, 0], &dh_rec[0, 0], b_len, hdim, hdim, 1.0)
        gemm_tn(&x[0, 0, 0], &dar[0, 0, 0], &d_wr[0, 0], idim, tb, hdim, 0.0)
        gemm_tn(&x[0, 0, 0], &daz[0, 0, 0], &d_wz[0, 0], idim, tb, hdim, 0.0)
        gemm_tn(&x[0, 0, 0], &dac[0, 0, 0], &d_wc[0, 0], idim, tb, hdim, 0.0)
        gemm_tn(&hprev[0, 0, 0], &dar[0, 0, 0], &d_ur[0, 0], hdim, tb, hdim, 0.0)
        gemm_tn(&hprev[0, 0, 0], &daz[0, 0, 0], &d_uz[0, 0], hdim, tb, hdim, 0.0)
        gemm_tn(&rhprev[0, 0, 0], &dac[0, 0, 0], &d_uc[0, 0], hdim, tb, hdim, 0.0)
        gemm_nt(&dar[0, 0, 0], &w_r[0, 0], &d_x[0, 0, 0], tb, hdim, idim, 0.0)
        gemm_nt(&daz[0, 0, 0], &w_z[0, 0], &d_x[0, 0, 0], tb, hdim, idim, 1.0)
        gemm_nt(&dac[0, 0, 0], &w_c[0, 0], &d_x[0, 0, 0], tb, hdim, idim, 1.0)
    d_br = np.asarray(dar_arr).sum(axis=(0, 1))
    d_bz = np.asarray(daz_arr).sum(axis=(0, 1))
    d_bc = np.asarray(dac_arr).sum(axis=(0, 1))
    return (d_x_arr, d_wr_arr, d_wz_arr, d_wc_arr, d_ur_arr, d_uz_arr, d_uc_arr,
            d_br, d_bz, d_bc)
