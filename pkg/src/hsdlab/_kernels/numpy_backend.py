"""Pure-numpy LSTM step kernels (fallback when the extension isn't built).

Gate layout along the last axis of the 4H-wide arrays is [i | f | g | o].
Masked rows (m == 0) carry hidden/cell state through unchanged and
contribute zero gate gradients, which is what makes batched processing of
variable-length sequences exact.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp(-log(1+exp(-x))) never overflows, unlike 1/(1+exp(-x))
    return np.exp(-np.logaddexp(0.0, -x))


def lstm_step_forward(z, c_prev, h_prev, mask, g_out, c_out, h_out, tc_out):
    """One timestep for a batch: z = W x_t + U h_prev + b, shape (B, 4H).

    Writes post-activation gates into g_out (B, 4H), new cell/hidden into
    c_out / h_out (carrying the previous state where mask == 0) and
    tanh(c_new) into tc_out.
    """
    hd = c_prev.shape[1]
    i = _sigmoid(z[:, :hd])
    f = _sigmoid(z[:, hd:2 * hd])
    g = np.tanh(z[:, 2 * hd:3 * hd])
    o = _sigmoid(z[:, 3 * hd:])
    c_new = f * c_prev + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    live = mask.astype(bool)[:, None]
    g_out[:, :hd] = i
    g_out[:, hd:2 * hd] = f
    g_out[:, 2 * hd:3 * hd] = g
    g_out[:, 3 * hd:] = o
    c_out[:] = np.where(live, c_new, c_prev)
    h_out[:] = np.where(live, h_new, h_prev)
    tc_out[:] = tc


def lstm_step_backward(dh, dc, g, tc, c_prev, mask,
                       dz_out, dc_prev_out, dh_pass_out):
    """Backward through one timestep.

    dh is the total incoming gradient on h_t, dc the one on c_t.  Emits
    pre-activation gate gradients (zero on masked rows), the gradient to
    pass to c_{t-1}, and the masked pass-through part of dh (the recurrent
    dz @ U term is added by the caller).
    """
    hd = c_prev.shape[1]
    i = g[:, :hd]
    f = g[:, hd:2 * hd]
    gg = g[:, 2 * hd:3 * hd]
    o = g[:, 3 * hd:]
    dc_total = dc + dh * o * (1.0 - tc * tc)
    dz_i = dc_total * gg * i * (1.0 - i)
    dz_f = dc_total * c_prev * f * (1.0 - f)
    dz_g = dc_total * i * (1.0 - gg * gg)
    dz_o = dh * tc * o * (1.0 - o)
    live = mask.astype(bool)[:, None]
    dz_out[:, :hd] = np.where(live, dz_i, 0.0)
    dz_out[:, hd:2 * hd] = np.where(live, dz_f, 0.0)
    dz_out[:, 2 * hd:3 * hd] = np.where(live, dz_g, 0.0)
    dz_out[:, 3 * hd:] = np.where(live, dz_o, 0.0)
    dc_prev_out[:] = np.where(live, dc_total * f, dc)
    dh_pass_out[:] = np.where(live, 0.0, dh)
