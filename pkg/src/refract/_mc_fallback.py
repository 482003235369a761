"""Pure-Python twin of the compiled Monte Carlo kernel.

This is the readable reference implementation of the path loop in
_mc_core.h.  It is selected automatically when the extension is not
built, and the test suite holds the two engines to bit-identical
output, so keep the arithmetic statements aligned with the C side
(same operations, same order).
"""

from __future__ import annotations

import math

import numpy as np

from ._mc_protocol import (
    ZIG_F,
    ZIG_R,
    ZIG_RATIO,
    ZIG_X,
    PhiloxStream,
    sample_phase_type_stream,
)

KERNEL_KIND = "python"


def _run_one_path(seed, path_index, x0, a, b, dt, n_steps,
                  drift_below, drift_mid, drift_above,
                  rate_below, rate_above,
                  sig_sqdt, fstep, rho, kappa,
                  alpha_cum, rates, trans_cum):
    sd = PhiloxStream(seed, 2 * path_index)
    sj = PhiloxStream(seed, 2 * path_index + 1)
    V = x0
    disc = 1.0
    pay = 0.0
    tnext = sj.exponential() / kappa if kappa > 0.0 else math.inf
    ruin_step = 0
    for i in range(n_steps):
        N = sd.normal()
        if V >= b:
            pay += disc * rate_above
            V += drift_above
        elif V < a:
            pay += disc * rate_below
            V += drift_below
        else:
            V += drift_mid
        V += sig_sqdt * N
        t1 = (i + 1) * dt
        while tnext <= t1:
            V += sample_phase_type_stream(sj, alpha_cum, rates, trans_cum)
            tnext += sj.exponential() / kappa
        disc *= fstep
        if V < 0.0:
            pay += disc * rho
            ruin_step = i + 1
            break
    return pay, ruin_step


def run_paths(seed, n_paths, x0, a, b, dt, n_steps,
              drift_below, drift_mid, drift_above,
              rate_below, rate_above,
              sig_sqdt, fstep, rho, kappa,
              alpha_cum, rates, trans_cum,
              zig_x=ZIG_X, zig_ratio=ZIG_RATIO, zig_f=ZIG_F, zig_r=ZIG_R,
              num_threads=1):
    """Same signature as the compiled kernel's run_paths (tables ignored:
    the protocol module's tables are the single source of truth)."""
    payoff = np.empty(n_paths, dtype=np.float64)
    ruin = np.empty(n_paths, dtype=np.int64)
    for p in range(n_paths):
        payoff[p], ruin[p] = _run_one_path(
            seed, p, x0, a, b, dt, n_steps,
            drift_below, drift_mid, drift_above, rate_below, rate_above,
            sig_sqdt, fstep, rho, kappa, alpha_cum, rates, trans_cum,
        )
    return payoff, ruin
