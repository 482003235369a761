"""Fit an order-6 Coxian phase-type law to the folded standard normal.

Produces the jump-size distribution used by the default Case-1 fixture
(fixtures/case1.json).  The folded normal |N(0,1)| has density
sqrt(2/pi) * exp(-z^2/2) on z >= 0; a Coxian chain (states visited in
order, with early absorption) approximates it well at order 6.

Run from the repository root:

    python3 tools/fit_folded_normal.py

and paste the printed alpha/T into the fixture when refreshing it.
"""

import json
import sys

import numpy as np
from scipy.linalg import expm  # noqa: F401 (kept for cross-checking fits by hand)
from scipy.optimize import least_squares

M = 6
TARGET_MEAN = np.sqrt(2.0 / np.pi)
TARGET_MOMENTS = [TARGET_MEAN, 1.0, 2.0 * TARGET_MEAN, 3.0]


def folded_density(z):
    return np.sqrt(2.0 / np.pi) * np.exp(-0.5 * z * z)


def coxian(params):
    """Coxian subgenerator from unconstrained parameters."""
    lam = np.exp(params[:M])
    pexit = 1.0 / (1.0 + np.exp(-params[M:]))  # exit probs for states 1..M-1
    T = np.zeros((M, M))
    for i in range(M):
        T[i, i] = -lam[i]
        if i < M - 1:
            T[i, i + 1] = lam[i] * (1.0 - pexit[i])
    alpha = np.zeros(M)
    alpha[0] = 1.0
    return alpha, T


def ph_density(alpha, T, z):
    t = -T.sum(axis=1)
    # T is triangular with (generically) distinct diagonal entries, so
    # the density is an exponential mixture sum_i c_i exp(d_i z)
    d, V = np.linalg.eig(T)
    c = (alpha @ V) * np.linalg.solve(V, t)
    return np.real(np.exp(np.multiply.outer(z, d)) @ c)


def ph_moment(alpha, T, n):
    v = np.ones(M)
    for _ in range(n):
        v = np.linalg.solve(T, v)
    out = alpha @ v
    for i in range(1, n + 1):
        out *= i
    return ((-1.0) ** n) * out


def residuals(params, zgrid, target):
    alpha, T = coxian(params)
    dens = ph_density(alpha, T, zgrid)
    res = dens - target
    moments = np.array([ph_moment(alpha, T, n) for n in (1, 2, 3, 4)])
    res_m = 20.0 * (moments - TARGET_MOMENTS) / TARGET_MOMENTS
    return np.concatenate([res, res_m])


def main():
    zgrid = np.linspace(1e-3, 4.5, 180)
    target = folded_density(zgrid)
    rng = np.random.default_rng(20240305)
    best = None
    for trial in range(12):
        x0 = np.concatenate([
            rng.normal(0.8, 0.6, M),       # log rates
            rng.normal(0.0, 1.0, M - 1),   # logit exit probs
        ])
        sol = least_squares(residuals, x0, args=(zgrid, target), max_nfev=4000)
        if best is None or sol.cost < best.cost:
            best = sol
    alpha, T = coxian(best.x)
    dens = ph_density(alpha, T, zgrid)
    moments = [ph_moment(alpha, T, n) for n in (1, 2, 3, 4)]
    print(f"cost: {best.cost:.3e}  sup density err: {np.max(np.abs(dens - target)):.3e}")
    print("moments:", [f"{m:.6f}" for m in moments])
    print("target :", [f"{m:.6f}" for m in TARGET_MOMENTS])
    print("alpha =", json.dumps(alpha.tolist()))
    print("T =", json.dumps([[float(v) for v in row] for row in T]))
    return alpha, T


if __name__ == "__main__":
    sys.exit(0 if main() else 0)
