"""Independent brute-force references. Deliberately slow and loop-based."""

import math

import numpy as np


def naive_conv3d(x, w, bias=None, stride=(1, 1, 1), dilation=(1, 1, 1), padding=(0, 0, 0), groups=1):
    """Direct 3D convolution with explicit loops; accumulates in float64."""
    c_in, t_in, h_in, w_in = x.shape
    c_out, cg, kt, kh, kw = w.shape
    pt, ph, pw = padding
    xp = np.zeros((c_in, t_in + 2 * pt, h_in + 2 * ph, w_in + 2 * pw))
    xp[:, pt : pt + t_in, ph : ph + h_in, pw : pw + w_in] = x
    n = [
        (m + 2 * p - d * (k - 1) - 1) // s + 1
        for m, p, d, k, s in zip((t_in, h_in, w_in), padding, dilation, (kt, kh, kw), stride)
    ]
    out = np.zeros((c_out, *n))
    og = c_out // groups
    for o in range(c_out):
        g = o // og
        for t in range(n[0]):
            for i in range(n[1]):
                for j in range(n[2]):
                    acc = 0.0 if bias is None else float(bias[o])
                    for c in range(cg):
                        for a in range(kt):
                            for b in range(kh):
                                for e in range(kw):
                                    acc += float(w[o, c, a, b, e]) * float(
                                        xp[
                                            g * cg + c,
                                            t * stride[0] + a * dilation[0],
                                            i * stride[1] + b * dilation[1],
                                            j * stride[2] + e * dilation[2],
                                        ]
                                    )
                    out[o, t, i, j] = acc
    return out


def naive_pool3d(x, kernel, stride=(1, 1, 1), mode="avg"):
    c, t_in, h_in, w_in = x.shape
    n = [(m - k) // s + 1 for m, k, s in zip((t_in, h_in, w_in), kernel, stride)]
    out = np.zeros((c, *n))
    for ch in range(c):
        for t in range(n[0]):
            for i in range(n[1]):
                for j in range(n[2]):
                    vals = [
                        float(x[ch, t * stride[0] + a, i * stride[1] + b, j * stride[2] + e])
                        for a in range(kernel[0])
                        for b in range(kernel[1])
                        for e in range(kernel[2])
                    ]
                    out[ch, t, i, j] = max(vals) if mode == "max" else sum(vals) / len(vals)
    return out


def naive_norm(x, scale, shift, mean, var, eps):
    out = np.empty(x.shape)
    for c in range(x.shape[0]):
        out[c] = (x[c].astype(np.float64) - mean[c]) / math.sqrt(var[c] + eps) * scale[c] + shift[c]
    return out


def receptive_field(geometry):
    """Textbook receptive-field recursion over (kernel, stride, dilation) triples."""
    r, jump = 1, 1
    for k, s, d in geometry:
        r += (k - 1) * d * jump
        jump *= s
    return r
