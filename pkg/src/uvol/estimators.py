"""Monte Carlo estimators for price, Delta and Vega.

The estimators are unbiased: every path carries the exact weight product,
so the only error is statistical.  Paths are simulated in vectorized
chunks; each chunk produces a ``(sum, sum_sq, count)`` partial that is
reduced in chunk order, which makes the reported mean bit-identical for
any thread count.

The chunk engine and the scalar per-path API (:mod:`uvol.chain` +
:mod:`uvol.weights`) share the same elementwise kernels: the engine simply
calls :func:`uvol.weights.step_weights` on array-valued records, one grid
interval at a time, and folds the same prefix recurrences as
:func:`uvol.weights.delta_weight` / :func:`uvol.weights.vega_weight`.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import rng as _rng
from .chain import StepRecord, chain_step
from .flow import frozen_coeffs
from .model import Model, ParameterError
from .renewal import JumpSampler, quantile
from .weights import step_weights, terminal_weights

__all__ = [
    "NonFinitePathError",
    "Payoff",
    "EstimateResult",
    "RunConfig",
    "estimate_price",
    "estimate_delta",
    "estimate_vega",
    "aggregate",
]

_MAX_SAMPLING_ROUNDS = 10000


class NonFinitePathError(ArithmeticError):
    """Raised when path contributions come out non-finite."""


@dataclass(frozen=True)
class Payoff:
    """European payoff evaluated on the terminal log-spot.

    ``call``: ``(exp(x) - strike)+``; ``digital``: ``1{exp(x) >= strike}``.
    """

    kind: str
    strike: float

    def __post_init__(self):
        if self.kind not in ("call", "digital"):
            raise ParameterError(f"unknown payoff kind {self.kind!r}")
        if not (math.isfinite(self.strike) and self.strike > 0):
            raise ParameterError(f"strike must be positive, got {self.strike}")

    @classmethod
    def call(cls, strike: float) -> "Payoff":
        return cls(kind="call", strike=strike)

    @classmethod
    def digital_call(cls, strike: float) -> "Payoff":
        return cls(kind="digital", strike=strike)

    def __call__(self, x):
        return self.value_spot(np.exp(x))

    def value_spot(self, s):
        """Evaluate on the spot level (used by the Euler baseline)."""
        if self.kind == "call":
            return np.maximum(s - self.strike, 0.0)
        return 1.0 * (s >= self.strike)


@dataclass(frozen=True)
class EstimateResult:
    """Monte Carlo estimate with its statistical error.

    ``ci95`` is ``mean -+ 1.96 * std_error``.
    """

    mean: float
    std_error: float
    ci95: tuple
    n_paths: int
    n_jumps_mean: float
    elapsed: float


@dataclass(frozen=True)
class _Injection:
    """Test-only: force every path onto a fixed grid with fixed draws."""

    zeta: tuple
    z1: tuple
    z2: tuple


@dataclass(frozen=True)
class RunConfig:
    """Everything one estimator run depends on.

    Parameters
    ----------
    model : Model
    payoff : Payoff
    sampler : JumpSampler
    s0, y0, T : float
        Initial spot (strictly positive), initial variance factor, horizon.
    n_paths : int
    seed : int
        Drives every random draw via counter-based streams.
    discount : bool
        Multiply estimates by ``exp(-r*T)`` (default on).
    panels : int
        Simpson panel count for coefficient quadratures.
    threads : int
        Worker threads for chunk processing; results do not depend on it.
    chunk_size : int
        Paths per vectorized chunk; results do not depend on it.
    """

    model: Model
    payoff: Payoff
    sampler: JumpSampler
    s0: float
    y0: float
    T: float
    n_paths: int
    seed: int
    discount: bool = True
    panels: int = 8
    threads: int = 1
    chunk_size: int = 1 << 17
    inject: Optional[_Injection] = field(default=None, repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.s0) and self.s0 > 0):
            raise ParameterError(f"s0 must be positive, got {self.s0}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise ParameterError(f"T must be positive, got {self.T}")
        if self.n_paths < 1:
            raise ParameterError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.threads < 1 or self.chunk_size < 1:
            raise ParameterError("threads and chunk_size must be >= 1")

    @property
    def x0(self) -> float:
        return math.log(self.s0)

    @classmethod
    def with_injected_draws(cls, *, zeta, z1, z2, **kwargs) -> "RunConfig":
        """Test-only constructor pinning the grid and Gaussian draws."""
        return cls(inject=_Injection(zeta=tuple(zeta), z1=tuple(z1), z2=tuple(z2)),
                   **kwargs)


def _sample_gap_columns(cfg: RunConfig, paths: np.ndarray):
    """Vectorized renewal-grid sampling for a chunk of paths.

    Returns ``(gaps, n_jumps, last_gap)``: ``gaps[p, k]`` is the k-th
    interior interval of path ``p`` (NaN beyond its jump count).
    """
    n = paths.size
    T = cfg.T
    gaps = np.full((n, 8), np.nan)
    slot = np.zeros(n, dtype=np.int64)
    cum = np.zeros(n)
    gap_idx = np.zeros(n, dtype=np.uint64)
    alive = np.ones(n, dtype=bool)
    for _ in range(_MAX_SAMPLING_ROUNDS):
        ia = np.flatnonzero(alive)
        if ia.size == 0:
            break
        u, _ = _rng.uniform_pair(cfg.seed, paths[ia], _rng.GAP_STREAM, gap_idx[ia])
        gap_idx[ia] += np.uint64(1)
        g = quantile(cfg.sampler, u)
        nxt = cum[ia] + g
        ok = (g > 0) & (nxt != cum[ia]) & (nxt != T)
        jump = ia[ok & (nxt < T)]
        if jump.size:
            if np.any(slot[jump] >= gaps.shape[1]):
                gaps = np.hstack([gaps, np.full((n, gaps.shape[1]), np.nan)])
            gaps[jump, slot[jump]] = (nxt - cum[ia])[ok & (nxt < T)]
            cum[jump] = nxt[ok & (nxt < T)]
            slot[jump] += 1
        alive[ia[ok & (nxt > T)]] = False
    else:  # pragma: no cover - would need a broken sampler
        raise RuntimeError("renewal sampling did not terminate")
    return gaps, slot, T - cum


def _take_where(mask, a, b):
    return np.where(mask, a, b)


def _chunk_partials(cfg: RunConfig, lo: int, hi: int, kind: str):
    """Simulate paths [lo, hi) and return the chunk's partial statistics."""
    paths = np.arange(lo, hi, dtype=np.uint64)
    n = paths.size
    mdl, smp = cfg.model, cfg.sampler

    if cfg.inject is None:
        gaps, n_jumps, last_gap = _sample_gap_columns(cfg, paths)
    else:
        zeta = np.asarray(cfg.inject.zeta)
        dz = np.diff(zeta)
        n_jumps = np.full(n, len(dz) - 1, dtype=np.int64)
        gaps = np.broadcast_to(dz[:-1], (n, len(dz) - 1)).copy() if len(dz) > 1 \
            else np.full((n, 1), np.nan)
        last_gap = np.full(n, dz[-1])

    x = np.full(n, cfg.x0)
    y = np.full(n, cfg.y0)
    price_pref = np.ones(n)
    ey_pref = np.ones(n)
    delta_acc = np.zeros(n)
    corr = np.zeros(n)
    spill = np.zeros(n)
    vega_acc = np.zeros(n)

    for k in range(int(n_jumps.max()) + 1):
        act = np.flatnonzero(k <= n_jumps)
        is_last = n_jumps[act] == k
        col = gaps[act, min(k, gaps.shape[1] - 1)]
        delta_k = _take_where(is_last, last_gap[act], col)
        if cfg.inject is None:
            z1, z2 = _rng.normal_pair(cfg.seed, paths[act], k)
        else:
            z1 = np.full(act.size, cfg.inject.z1[k])
            z2 = np.full(act.size, cfg.inject.z2[k])
        fc = frozen_coeffs(mdl, y[act], delta_k, panels=cfg.panels)
        x_next, y_next = chain_step(mdl, x[act], y[act], fc, z1, z2)
        rec = StepRecord(index=k, x_prev=x[act], y_prev=y[act],
                         x_next=x_next, y_next=y_next, z1=z1, z2=z2,
                         fc=fc, model=mdl)
        tw = terminal_weights(rec, smp)
        if np.all(is_last):
            th = tw.theta_last + 0.0 * z1
            ey, ex = tw.theta_eY_last, tw.theta_eX_last
            i1th, i2ey, i1ex = tw.I1_theta_last, tw.I2_theta_eY_last, tw.I1_theta_eX_last
            thc = np.zeros(act.size)
        else:
            sw = step_weights(rec, smp)
            th = _take_where(is_last, tw.theta_last, sw.theta)
            ey = _take_where(is_last, tw.theta_eY_last, sw.theta_eY)
            ex = _take_where(is_last, tw.theta_eX_last, sw.theta_eX)
            i1th = _take_where(is_last, tw.I1_theta_last, sw.I1_theta)
            i2ey = _take_where(is_last, tw.I2_theta_eY_last, sw.I2_theta_eY)
            i1ex = _take_where(is_last, tw.I1_theta_eX_last, sw.I1_theta_eX)
            thc = _take_where(is_last, 0.0, sw.theta_c)

        corr[act] = corr[act] * th + thc * ey_pref[act]
        vega_acc[act] = vega_acc[act] * th + delta_k * (
            i2ey * ey_pref[act] + corr[act] + i1th * spill[act] + i1ex * ey_pref[act])
        spill[act] = spill[act] * th + ex * ey_pref[act]
        delta_acc[act] = delta_acc[act] * th + delta_k * i1th * price_pref[act]
        price_pref[act] = price_pref[act] * th
        ey_pref[act] = ey_pref[act] * ey
        x[act] = x_next
        y[act] = y_next

    h = cfg.payoff(x)
    if kind == "price":
        contrib = h * price_pref
    elif kind == "delta":
        contrib = h * delta_acc / (cfg.s0 * cfg.T)
    else:
        contrib = h * vega_acc / cfg.T
    if cfg.discount:
        contrib = contrib * math.exp(-mdl.r * cfg.T)
    bad = ~np.isfinite(contrib)
    if np.any(bad):
        first = int(paths[np.argmax(bad)])
        raise NonFinitePathError(
            f"{int(bad.sum())} non-finite {kind} contribution(s) in chunk "
            f"[{lo}, {hi}); first bad path index {first}")
    return (float(contrib.sum()), float(np.dot(contrib, contrib)), n,
            float(n_jumps.sum()))


def aggregate(partials: Sequence, **extras) -> EstimateResult:
    """Combine ``(sum, sum_sq, count)`` partials into an estimate.

    Partials are merged pairwise Welford-style, so the result is
    permutation-invariant up to roundoff and single-pass stable.  With a
    single path the standard error is reported as zero.
    """
    n_tot = 0
    mean = 0.0
    m2 = 0.0
    for p in partials:
        s, ss, c = p[0], p[1], p[2]
        if c == 0:
            continue
        mean_b = s / c
        m2_b = max(ss - s * s / c, 0.0)
        d = mean_b - mean
        n_new = n_tot + c
        m2 = m2 + m2_b + d * d * n_tot * c / n_new
        mean = mean + d * c / n_new
        n_tot = n_new
    if n_tot == 0:
        raise ValueError("no samples to aggregate")
    var = m2 / (n_tot - 1) if n_tot > 1 else 0.0
    se = math.sqrt(var / n_tot)
    return EstimateResult(
        mean=mean, std_error=se, ci95=(mean - 1.96 * se, mean + 1.96 * se),
        n_paths=n_tot,
        n_jumps_mean=extras.get("n_jumps_mean", float("nan")),
        elapsed=extras.get("elapsed", 0.0),
    )


def _run(cfg: RunConfig, kind: str) -> EstimateResult:
    start = time.perf_counter()
    bounds = [(lo, min(lo + cfg.chunk_size, cfg.n_paths))
              for lo in range(0, cfg.n_paths, cfg.chunk_size)]
    if cfg.threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            partials = list(pool.map(
                lambda b: _chunk_partials(cfg, b[0], b[1], kind), bounds))
    else:
        partials = [_chunk_partials(cfg, lo, hi, kind) for lo, hi in bounds]
    jumps = sum(p[3] for p in partials)
    return aggregate(
        partials,
        n_jumps_mean=jumps / cfg.n_paths,
        elapsed=time.perf_counter() - start,
    )


def estimate_price(cfg: RunConfig) -> EstimateResult:
    """Unbiased option price estimate ``E[h(X_T) * price_weight]``."""
    return _run(cfg, "price")


def estimate_delta(cfg: RunConfig) -> EstimateResult:
    """Unbiased Delta estimate (derivative in the initial spot ``s0``)."""
    return _run(cfg, "delta")


def estimate_vega(cfg: RunConfig) -> EstimateResult:
    """Unbiased Vega estimate (derivative in the initial variance ``y0``)."""
    return _run(cfg, "vega")
