# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Fused LSTM step kernels (hot loop of training and inference).

Same contract as numpy_backend: gate layout [i | f | g | o], masked rows
carry state through and produce zero gate gradients.  All arithmetic stays
in the array dtype (expf/tanhf on float32), so results differ from the
numpy backend only by final-rounding amounts.
"""

from libc.math cimport exp, expf, tanh, tanhf

import numpy as np

ctypedef fused real:
    float
    double


cdef inline real _sig(real x) noexcept nogil:
    if real is float:
        return (<float> 1.0) / ((<float> 1.0) + expf(-x))
    else:
        return 1.0 / (1.0 + exp(-x))


cdef inline real _tanh(real x) noexcept nogil:
    if real is float:
        return tanhf(x)
    else:
        return tanh(x)


def lstm_step_forward(real[:, ::1] z, real[:, ::1] c_prev, real[:, ::1] h_prev,
                      const unsigned char[::1] mask,
                      real[:, ::1] g_out, real[:, ::1] c_out, real[:, ::1] h_out,
                      real[:, ::1] tc_out):
    cdef Py_ssize_t b, j
    cdef Py_ssize_t nb = c_prev.shape[0]
    cdef Py_ssize_t hd = c_prev.shape[1]
    cdef real iv, fv, gv, ov, cv, tv
    with nogil:
        for b in range(nb):
            for j in range(hd):
                iv = _sig(z[b, j])
                fv = _sig(z[b, hd + j])
                gv = _tanh(z[b, 2 * hd + j])
                ov = _sig(z[b, 3 * hd + j])
                cv = fv * c_prev[b, j] + iv * gv
                tv = _tanh(cv)
                g_out[b, j] = iv
                g_out[b, hd + j] = fv
                g_out[b, 2 * hd + j] = gv
                g_out[b, 3 * hd + j] = ov
                tc_out[b, j] = tv
                if mask[b]:
                    c_out[b, j] = cv
                    h_out[b, j] = ov * tv
                else:
                    c_out[b, j] = c_prev[b, j]
                    h_out[b, j] = h_prev[b, j]


def lstm_step_backward(real[:, ::1] dh, real[:, ::1] dc,
                       real[:, ::1] g, real[:, ::1] tc, real[:, ::1] c_prev,
                       const unsigned char[::1] mask,
                       real[:, ::1] dz_out, real[:, ::1] dc_prev_out,
                       real[:, ::1] dh_pass_out):
    cdef Py_ssize_t b, j
    cdef Py_ssize_t nb = c_prev.shape[0]
    cdef Py_ssize_t hd = c_prev.shape[1]
    cdef real iv, fv, gv, ov, tv, dhv, dct
    cdef real one = <real> 1.0
    cdef real zero = <real> 0.0
    with nogil:
        for b in range(nb):
            if mask[b]:
                for j in range(hd):
                    iv = g[b, j]
                    fv = g[b, hd + j]
                    gv = g[b, 2 * hd + j]
                    ov = g[b, 3 * hd + j]
                    tv = tc[b, j]
                    dhv = dh[b, j]
                    dct = dc[b, j] + dhv * ov * (one - tv * tv)
                    dz_out[b, j] = dct * gv * iv * (one - iv)
                    dz_out[b, hd + j] = dct * c_prev[b, j] * fv * (one - fv)
                    dz_out[b, 2 * hd + j] = dct * iv * (one - gv * gv)
                    dz_out[b, 3 * hd + j] = dhv * tv * ov * (one - ov)
                    dc_prev_out[b, j] = dct * fv
                    dh_pass_out[b, j] = zero
            else:
                for j in range(hd):
                    dz_out[b, j] = zero
                    dz_out[b, hd + j] = zero
                    dz_out[b, 2 * hd + j] = zero
                    dz_out[b, 3 * hd + j] = zero
                    dc_prev_out[b, j] = dc[b, j]
                    dh_pass_out[b, j] = dh[b, j]
