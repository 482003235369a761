"""Monte Carlo oracle for the two-threshold strategy.

Simulates the controlled surplus under "inject below a, pay out above
b" with an Euler scheme and estimates the expected discounted payoff
and the ruin-time Laplace transform.  The engine is the compiled
kernel when available, else its pure-Python twin; both follow the same
per-path counter-based randomness protocol, so estimates for a fixed
seed are bit-identical across engines, runs and thread counts.

Known biases, both documented in the estimate:
  * horizon truncation, bounded by (delta1 + beta delta2 + q|rho|)
    exp(-q t_stop) / q;
  * grid-point ruin detection, an O(sqrt(dt)) effect (diffusion
    excursions below zero inside a step are missed).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import _mc_fallback
from ._mc_protocol import ZIG_F, ZIG_R, ZIG_RATIO, ZIG_X, phase_type_tables
from .model import LevyModel, PhaseTypeRep

try:
    from . import _mc_kernel

    DEFAULT_ENGINE = "compiled"
except ImportError:  # pragma: no cover - depends on the build
    _mc_kernel = None
    DEFAULT_ENGINE = "python"


class SimulationError(Exception):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Inputs of one simulation run.

    t_max must cover at least 100/q so the horizon-truncation bound is
    negligible; tail_eps (an absolute NPV bias budget) lets the engine
    stop earlier once the remaining discounted flows provably fall
    below it, which is what makes long horizons affordable.
    """

    dt: float
    t_max: float
    n_paths: int
    seed: int
    x0: float
    a: float
    b: float
    tail_eps: float = 1e-9
    n_threads: int = 0  # 0: use all available cores

    def validate(self, model: LevyModel) -> None:
        if not (self.dt > 0.0):
            raise SimulationError("dt must be positive")
        if self.t_max < 100.0 / model.q:
            raise SimulationError(
                f"t_max = {self.t_max:g} below 100/q = {100.0 / model.q:g}; "
                "the truncation bias bound would not be negligible"
            )
        if self.n_paths < 1:
            raise SimulationError("n_paths must be at least 1")
        if not (0.0 <= self.a <= self.b):
            raise SimulationError("need 0 <= a <= b")
        if self.x0 < 0.0:
            raise SimulationError("x0 must be nonnegative")

    def stop_time(self, model: LevyModel) -> float:
        scale = model.delta1 + model.beta * model.delta2 + model.q * abs(model.rho)
        if self.tail_eps <= 0.0:
            return self.t_max
        horizon = math.log(scale / (model.q * self.tail_eps)) / model.q
        return min(self.t_max, max(horizon, 10.0 * self.dt))


@dataclass(frozen=True)
class SimEstimate:
    """Point estimate with its scale of statistical and systematic error."""

    mean: float
    stderr: float
    n_paths: int
    ruin_fraction: float
    mean_ruin_time: float
    dt: float
    seed: int
    t_stop: float = np.nan
    truncation_bias_bound: float = np.nan
    engine: str = ""

    def csv_row(self, x0: float, a: float, b: float) -> str:
        fields = [x0, a, b, self.mean, self.stderr, self.n_paths, self.dt,
                  self.seed, self.ruin_fraction]
        return ",".join(_fmt(v) for v in fields)


CSV_HEADER = "x0,a,b,mean,stderr,n_paths,dt,seed,ruin_fraction"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.12g}"


@dataclass(frozen=True)
class PathSample:
    """Raw per-path results; both public estimates derive from it."""

    payoffs: np.ndarray
    ruin_steps: np.ndarray
    config: SimConfig
    t_stop: float
    truncation_bias_bound: float
    engine: str

    def value_estimate(self) -> SimEstimate:
        return self._estimate(self.payoffs)

    def ruin_laplace_estimate(self, q: float) -> SimEstimate:
        kappa = self.ruin_steps * self.config.dt
        vals = np.where(self.ruin_steps > 0, np.exp(-q * kappa), 0.0)
        return self._estimate(vals)

    def _estimate(self, vals: np.ndarray) -> SimEstimate:
        n = vals.size
        ruined = self.ruin_steps > 0
        mean_ruin = float(np.mean(self.ruin_steps[ruined]) * self.config.dt) if ruined.any() else np.nan
        return SimEstimate(
            mean=float(np.mean(vals)),
            stderr=float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else np.inf,
            n_paths=n,
            ruin_fraction=float(np.mean(ruined)),
            mean_ruin_time=mean_ruin,
            dt=self.config.dt,
            seed=self.config.seed,
            t_stop=self.t_stop,
            truncation_bias_bound=self.truncation_bias_bound,
            engine=self.engine,
        )


def available_engines() -> list[str]:
    return ["compiled", "python"] if _mc_kernel is not None else ["python"]


def simulate_paths(model: LevyModel, config: SimConfig, engine: str | None = None) -> PathSample:
    """Run the Euler scheme for every path and collect raw results."""
    config.validate(model)
    kind = engine or DEFAULT_ENGINE
    if kind not in available_engines():
        raise SimulationError(f"engine {kind!r} not available (built: {available_engines()})")
    t_stop = config.stop_time(model)
    n_steps = int(math.ceil(t_stop / config.dt))
    alpha_cum, rates, trans_cum = phase_type_tables(model.jumps.alpha, model.jumps.T)
    kappa = model.kappa
    args = dict(
        seed=config.seed,
        n_paths=config.n_paths,
        x0=config.x0,
        a=config.a,
        b=config.b,
        dt=config.dt,
        n_steps=n_steps,
        drift_below=(-model.c_Y + model.delta2) * config.dt,
        drift_mid=-model.c_Y * config.dt,
        drift_above=(-model.c_Y - model.delta1) * config.dt,
        rate_below=-model.beta * model.delta2 * config.dt,
        rate_above=model.delta1 * config.dt,
        sig_sqdt=model.sigma * math.sqrt(config.dt),
        fstep=math.exp(-model.q * config.dt),
        rho=model.rho,
        kappa=kappa,
        alpha_cum=alpha_cum,
        rates=rates,
        trans_cum=trans_cum,
    )
    n_threads = config.n_threads if config.n_threads > 0 else (os.cpu_count() or 1)
    if kind == "compiled":
        payoffs, ruin = _mc_kernel.run_paths(
            **args,
            zig_x=ZIG_X, zig_ratio=ZIG_RATIO, zig_f=ZIG_F, zig_r=ZIG_R,
            num_threads=n_threads,
        )
    else:
        payoffs, ruin = _mc_fallback.run_paths(**args, num_threads=1)
    scale = model.delta1 + model.beta * model.delta2 + model.q * abs(model.rho)
    bias = scale * math.exp(-model.q * n_steps * config.dt) / model.q
    return PathSample(payoffs=payoffs, ruin_steps=ruin, config=config,
                      t_stop=n_steps * config.dt, truncation_bias_bound=bias,
                      engine=kind)


def simulate_cells(model: LevyModel, config: SimConfig, cells, engine: str | None = None) -> list[PathSample]:
    """Simulate several (x0, a, b) cells under common random numbers.

    Because every cell consumes the same per-path increment streams,
    each cell's result is bit-identical to a standalone simulate_paths
    run with the corresponding config, but generation costs are shared.
    Differences between cells are therefore low-variance comparisons.
    """
    cells = [(float(x0), float(a), float(b)) for (x0, a, b) in cells]
    if not cells:
        return []
    kind = engine or DEFAULT_ENGINE
    if kind != "compiled" or _mc_kernel is None or len(cells) == 1:
        out = []
        for (x0, a, b) in cells:
            sub = SimConfig(dt=config.dt, t_max=config.t_max, n_paths=config.n_paths,
                            seed=config.seed, x0=x0, a=a, b=b,
                            tail_eps=config.tail_eps, n_threads=config.n_threads)
            out.append(simulate_paths(model, sub, engine=kind))
        return out
    base = SimConfig(dt=config.dt, t_max=config.t_max, n_paths=config.n_paths,
                     seed=config.seed, x0=cells[0][0], a=cells[0][1], b=cells[0][2],
                     tail_eps=config.tail_eps, n_threads=config.n_threads)
    base.validate(model)
    for (x0, a, b) in cells:
        if not (0.0 <= a <= b) or x0 < 0.0:
            raise SimulationError(f"invalid cell (x0={x0}, a={a}, b={b})")
    t_stop = base.stop_time(model)
    n_steps = int(math.ceil(t_stop / config.dt))
    alpha_cum, rates, trans_cum = phase_type_tables(model.jumps.alpha, model.jumps.T)
    n_threads = config.n_threads if config.n_threads > 0 else (os.cpu_count() or 1)
    payoffs, ruin = _mc_kernel.run_paths_multi(
        seed=config.seed,
        n_paths=config.n_paths,
        x0=np.array([c[0] for c in cells]),
        a=np.array([c[1] for c in cells]),
        b=np.array([c[2] for c in cells]),
        dt=config.dt,
        n_steps=n_steps,
        drift_below=(-model.c_Y + model.delta2) * config.dt,
        drift_mid=-model.c_Y * config.dt,
        drift_above=(-model.c_Y - model.delta1) * config.dt,
        rate_below=-model.beta * model.delta2 * config.dt,
        rate_above=model.delta1 * config.dt,
        sig_sqdt=model.sigma * math.sqrt(config.dt),
        fstep=math.exp(-model.q * config.dt),
        rho=model.rho,
        kappa=model.kappa,
        alpha_cum=alpha_cum,
        rates=rates,
        trans_cum=trans_cum,
        zig_x=ZIG_X, zig_ratio=ZIG_RATIO, zig_f=ZIG_F, zig_r=ZIG_R,
        num_threads=n_threads,
    )
    scale = model.delta1 + model.beta * model.delta2 + model.q * abs(model.rho)
    bias = scale * math.exp(-model.q * n_steps * config.dt) / model.q
    out = []
    for i, (x0, a, b) in enumerate(cells):
        sub = SimConfig(dt=config.dt, t_max=config.t_max, n_paths=config.n_paths,
                        seed=config.seed, x0=x0, a=a, b=b,
                        tail_eps=config.tail_eps, n_threads=config.n_threads)
        out.append(PathSample(payoffs=payoffs[i].copy(), ruin_steps=ruin[i].copy(),
                              config=sub, t_stop=n_steps * config.dt,
                              truncation_bias_bound=bias, engine=kind))
    return out


def simulate_value(model: LevyModel, config: SimConfig, engine: str | None = None) -> SimEstimate:
    """Estimate the expected NPV of the (a, b) strategy from x0."""
    return simulate_paths(model, config, engine).value_estimate()


def estimate_ruin_laplace(model: LevyModel, config: SimConfig, engine: str | None = None) -> SimEstimate:
    """Estimate E[e^{-q kappa}] (0 when no ruin before the horizon)."""
    return simulate_paths(model, config, engine).ruin_laplace_estimate(model.q)


def sample_phase_type(rng: np.random.Generator, rep: PhaseTypeRep, size: int | None = None):
    """Absorption-time samples of the phase chain, for oracle checks.

    Uses a caller-supplied numpy Generator (independent of the path
    engines' stream protocol).
    """
    alpha_cum, rates, trans_cum = phase_type_tables(rep.alpha, rep.T)
    m = rep.m

    def draw() -> float:
        u = rng.random()
        state = int(np.searchsorted(alpha_cum, u, side="right"))
        if state >= m:
            return 0.0
        total = 0.0
        while True:
            total += rng.exponential() / rates[state]
            u = rng.random()
            nxt = int(np.searchsorted(trans_cum[state], u, side="right"))
            if nxt >= m:
                return total
            state = nxt
    if size is None:
        return draw()
    return np.array([draw() for _ in range(size)])
