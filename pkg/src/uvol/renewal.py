"""Renewal time grids driving the Markov chain.

The chain lives on a random grid ``0 = zeta_0 < zeta_1 < ... < T`` whose
gaps are i.i.d. with a density ``f`` supported near zero: jump times are
the partial sums, truncated at the horizon ``T``.  Two families are
implemented:

``Exponential(lam)``
    ``f(t) = lam * exp(-lam t)`` on ``[0, inf)``.
``BetaOneMinusAlpha(alpha, tau_bar)``
    ``f(t) = ((1-alpha)/tau_bar**(1-alpha)) * t**(-alpha)`` on
    ``[0, tau_bar]``; the integrable singularity at zero concentrates gaps
    near the origin, which keeps all moments of the weight products finite.

Gaps are drawn by inverse transform from the path's counter-based stream,
so a grid is a pure function of ``(seed, path index)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "DomainError",
    "JumpSampler",
    "TimeGrid",
    "density",
    "cdf",
    "survival",
    "quantile",
    "sample_grid",
]

_MAX_REDRAWS = 1000


class DomainError(ValueError):
    """Raised when a density or distribution is evaluated off its support."""


@dataclass(frozen=True)
class JumpSampler:
    """Distribution of the i.i.d. renewal gaps.

    Use the factories :meth:`exponential` and :meth:`beta_one_minus_alpha`.
    """

    kind: str
    lam: Optional[float] = None
    alpha: Optional[float] = None
    tau_bar: Optional[float] = None

    @classmethod
    def exponential(cls, lam: float) -> "JumpSampler":
        if not (math.isfinite(lam) and lam > 0):
            raise DomainError(f"exponential rate must be positive, got {lam}")
        return cls(kind="exponential", lam=lam)

    @classmethod
    def beta_one_minus_alpha(cls, alpha: float, tau_bar: float) -> "JumpSampler":
        if not (math.isfinite(alpha) and 0.0 < alpha < 1.0):
            raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
        if not (math.isfinite(tau_bar) and tau_bar > 0):
            raise DomainError(f"tau_bar must be positive, got {tau_bar}")
        return cls(kind="beta", alpha=alpha, tau_bar=tau_bar)

    # instance conveniences mirroring the module-level ops
    def density(self, t):
        return density(self, t)

    def cdf(self, t):
        return cdf(self, t)

    def survival(self, t):
        return survival(self, t)

    def quantile(self, u):
        return quantile(self, u)


def _check_nonneg(t):
    if np.any(np.asarray(t) < 0):
        raise DomainError("t must be nonnegative")


def density(s: JumpSampler, t):
    """Gap density ``f(t)``.

    For the Beta family the support is ``[0, tau_bar]`` and evaluation
    outside it raises :class:`DomainError`; ``t = 0`` returns ``inf`` (the
    singularity is integrable).
    """
    t = np.asarray(t, dtype=float) if np.ndim(t) else float(t)
    _check_nonneg(t)
    if s.kind == "exponential":
        return s.lam * np.exp(-s.lam * t)
    if np.any(np.asarray(t) > s.tau_bar):
        raise DomainError(f"t outside the Beta support [0, {s.tau_bar}]")
    with np.errstate(divide="ignore"):
        return (1.0 - s.alpha) / s.tau_bar ** (1.0 - s.alpha) * np.asarray(t, dtype=float) ** (-s.alpha) \
            if np.ndim(t) else (1.0 - s.alpha) / s.tau_bar ** (1.0 - s.alpha) * (t ** (-s.alpha) if t > 0 else math.inf)


def cdf(s: JumpSampler, t):
    """Gap distribution function ``F(t)`` for ``t >= 0``."""
    t = np.asarray(t, dtype=float) if np.ndim(t) else float(t)
    _check_nonneg(t)
    if s.kind == "exponential":
        return -np.expm1(-s.lam * t)
    ratio = np.minimum(np.asarray(t, dtype=float) / s.tau_bar, 1.0)
    out = ratio ** (1.0 - s.alpha)
    return float(out) if np.ndim(t) == 0 else out


def survival(s: JumpSampler, t):
    """``1 - F(t)`` for ``t >= 0``."""
    t = np.asarray(t, dtype=float) if np.ndim(t) else float(t)
    _check_nonneg(t)
    if s.kind == "exponential":
        return np.exp(-s.lam * t)
    return 1.0 - cdf(s, t)


def quantile(s: JumpSampler, u):
    """Inverse of ``F`` on ``(0, 1)``."""
    if np.any((np.asarray(u) <= 0) | (np.asarray(u) >= 1)):
        raise DomainError("u must lie in the open interval (0, 1)")
    if s.kind == "exponential":
        return -np.log1p(-u) / s.lam
    return s.tau_bar * np.asarray(u, dtype=float) ** (1.0 / (1.0 - s.alpha)) \
        if np.ndim(u) else s.tau_bar * u ** (1.0 / (1.0 - s.alpha))


@dataclass(frozen=True)
class TimeGrid:
    """One realized renewal grid.

    Attributes
    ----------
    zeta : tuple of float
        ``(0, tau_1, ..., tau_{N_T}, T)`` — strictly increasing, length
        ``n_jumps + 2``.
    n_jumps : int
        Number of jump times inside ``(0, T)``.
    last_gap : float
        ``T - zeta_{N_T}``, the length of the final (truncated) interval.
    """

    zeta: tuple
    n_jumps: int
    last_gap: float

    def __post_init__(self):
        z = self.zeta
        if len(z) != self.n_jumps + 2 or z[0] != 0.0:
            raise ValueError("inconsistent grid")
        if any(b <= a for a, b in zip(z, z[1:])):
            raise ValueError("grid times must be strictly increasing")


def sample_grid(s: JumpSampler, T: float, rng) -> TimeGrid:
    """Draw a renewal grid on ``[0, T]``.

    Jumps are accumulated by inverse transform until one overshoots the
    horizon.  Draws that would produce a zero-length or tied interval (or
    land exactly on ``T``) are discarded and redrawn, advancing the
    stream's gap counter, so degenerate grids cannot occur.

    Parameters
    ----------
    s : JumpSampler
    T : float
        Horizon, strictly positive.
    rng : object
        Per-path stream exposing ``next_gap_uniform()``.

    Returns
    -------
    TimeGrid
    """
    if not (T > 0 and math.isfinite(T)):
        raise ValueError(f"T must be positive and finite, got {T}")
    zeta = [0.0]
    cum = 0.0
    while True:
        for _ in range(_MAX_REDRAWS):
            g = quantile(s, rng.next_gap_uniform())
            nxt = cum + g
            if g > 0.0 and nxt != cum and nxt != T:
                break
        else:  # pragma: no cover - would need a broken stream
            raise RuntimeError("gap sampling failed to produce a usable draw")
        if nxt > T:
            break
        zeta.append(nxt)
        cum = nxt
    zeta.append(T)
    return TimeGrid(zeta=tuple(zeta), n_jumps=len(zeta) - 2, last_gap=T - cum)
