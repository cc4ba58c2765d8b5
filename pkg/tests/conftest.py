"""Shared test oracles: finite-difference gradients and t-distribution tails.

These stay independent of the library code paths they check: gradcheck only
re-runs the caller's forward function, and the t tail integrates the density
formula directly.
"""

import math

import numpy as np
from scipy import integrate

from ielab import tensorcore as tc


def gradcheck(make_loss, named_params, h=1e-5, tol=1e-4, max_samples=24, seed=0):
    """Compare tape gradients against central finite differences.

    make_loss() must rebuild the forward pass deterministically from the
    current parameter values and return a scalar Tensor. Checks up to
    `max_samples` randomly chosen coordinates per parameter. Returns the worst
    relative error seen.
    """
    tape = tc.Tape()
    with tape:
        tape.watch(*named_params.values())
        loss = make_loss()
    grads = tc.backward(loss, tape)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, p in named_params.items():
        analytic = grads[p.node_id].data
        flat = p.data.ravel()
        n = flat.size
        idxs = np.arange(n) if n <= max_samples else rng.choice(n, max_samples, replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + h
            f_plus = make_loss().item()
            flat[i] = orig - h
            f_minus = make_loss().item()
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * h)
            a = analytic.ravel()[i]
            err = abs(a - fd) / max(abs(a), abs(fd), 1.0)
            worst = max(worst, err)
            assert err < tol, (
                f"gradient mismatch for {name}[{i}]: analytic={a!r} fd={fd!r} "
                f"rel_err={err:.3e} (tol {tol})")
    return worst


def t_two_sided_p_oracle(t_stat, df):
    """Two-sided tail of Student's t by numerical integration of the density."""
    if math.isinf(t_stat):
        return 0.0
    c = math.exp(math.lgamma((df + 1) / 2.0) - math.lgamma(df / 2.0)) \
        / math.sqrt(df * math.pi)

    def pdf(x):
        return c * (1.0 + x * x / df) ** (-(df + 1) / 2.0)

    tail, _ = integrate.quad(pdf, abs(t_stat), np.inf)
    return 2.0 * tail


def bilinear_point_oracle(fmap, y, x):
    """Zero-padded bilinear interpolation at continuous feature coords.

    Cell (r, c) has its center at (r + 0.5, c + 0.5); queries outside the map
    read zeros. fmap is (C, H, W); returns a length-C vector.
    """
    C, H, W = fmap.shape
    u = y - 0.5
    v = x - 0.5
    r0 = math.floor(u)
    c0 = math.floor(v)
    du = u - r0
    dv = v - c0
    out = np.zeros(C)
    for rr, wr in ((r0, 1.0 - du), (r0 + 1, du)):
        for cc, wc in ((c0, 1.0 - dv), (c0 + 1, dv)):
            if 0 <= rr < H and 0 <= cc < W and wr * wc != 0.0:
                out += wr * wc * fmap[:, rr, cc]
    return out
