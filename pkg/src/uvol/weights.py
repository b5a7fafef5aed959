"""Closed-form correction and transfer weights.

The price of a payoff ``h`` is represented as an expectation over chain
paths of ``h`` times a product of per-interval weights; first-order
Greeks replace individual factors by integration-by-parts variants.  This
module evaluates every weight in closed form from a :class:`StepRecord`.

Conventions
-----------
Step ``i`` covers ``[zeta_i, zeta_{i+1}]``.  Frozen quantities
(``sigma_S_i``, ``rho_i``, ``m_i``, ...) are functions of the left endpoint
``y_prev``; their ``*1_*`` fields are the ``y_prev``-derivatives.  Model
coefficients are evaluated at the right endpoint ``y_next`` or at the flow
endpoint ``m_i``.

All randomness is rewritten in state form, which is what makes the
differential operators concrete:

    z1 = (x_next - x_prev - (r*delta - a_S_i/2)) / sigma_S_i,
    w  = (y_next - m_i) / sigma_Y_i,
    z2 = (w - rho_i * z1) / sqrt(1 - rho_i**2).

``D1``/``D2`` denote partial derivatives in ``x_next``/``y_next`` at fixed
``y_prev``; the flow derivative ``Dprev`` differentiates in ``y_prev`` at
fixed ``(z1, z2)``, i.e. ``Dprev H = dH/dy_prev + D1 H * dX + D2 H * dY``
with ``dX = d x_next / d y_prev`` and ``dY = d y_next / d y_prev``.  The
dual operators are

    I1(H) = H * I1_1 - D1 H,      I2(H) = H * I2_1 - D2 H,

satisfying ``E[D_alpha f * H] = E[f * I_alpha(H)]`` against the Gaussian
step, with ``I1_1 = z1/sigma_S_i - rho_i z2 / (sigma_S_i sqrt(1-rho_i^2))``
and ``I2_1 = z2 / (sigma_Y_i sqrt(1-rho_i^2))``.

Every function accepts scalar or array-valued records, so the same code
weights a single path and a vectorized batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import ChainPath, StepRecord, one_minus_rho_sq
from .renewal import DomainError, JumpSampler, density, survival

__all__ = [
    "BaseOperators",
    "FlowDerivatives",
    "StepWeights",
    "TerminalWeights",
    "base_operators",
    "flow_derivatives",
    "step_weights",
    "terminal_weights",
    "theta_i",
    "transfer_weights",
    "price_weight",
    "delta_weight",
    "vega_weight",
    "LOG_PRODUCT_THRESHOLD",
]

LOG_PRODUCT_THRESHOLD = 8


@dataclass(frozen=True)
class BaseOperators:
    """First-order operator kernels of one Gaussian step."""

    I1_1: object
    I2_1: object
    D1_I1_1: object
    D2_I1_1: object
    D1_I2_1: object
    D2_I2_1: object


@dataclass(frozen=True)
class FlowDerivatives:
    """Flow derivatives of the step map and of the operator kernels.

    ``dX``/``dY`` are the ``y_prev``-derivatives of the step endpoints at
    fixed ``(z1, z2)``; the ``Dprev_*`` fields implement the chain rules
    for the kernels, e.g.
    ``Dprev I1_1 = -(sigma1_S/sigma_S) I1_1 - rho1/(1-rho^2) (sigma_Y/sigma_S) I2_1``.
    """

    dX: object
    dY: object
    D1_dX: object
    D1_dY: object
    D2_dY: object
    Dprev_I1_1: object
    Dprev_I2_1: object


@dataclass(frozen=True)
class StepWeights:
    """All interior weights of one step."""

    I1_1: object
    I2_1: object
    D1_I1_1: object
    D2_I1_1: object
    D1_I2_1: object
    D2_I2_1: object
    c_S: object
    c_Y: object
    b_Y_w: object
    c_YS: object
    theta: object
    D1_theta: object
    D2_theta: object
    D2prev_theta: object
    theta_eY: object
    theta_eX: object
    theta_c: object
    I1_theta: object
    I2_theta_eY: object
    I1_theta_eX: object


@dataclass(frozen=True)
class TerminalWeights:
    """Weights of the final (truncated) interval."""

    theta_last: object
    theta_eY_last: object
    theta_eX_last: object
    I1_theta_last: object
    I2_theta_eY_last: object
    I1_theta_eX_last: object


def base_operators(step: StepRecord) -> BaseOperators:
    """Operator kernels ``I1(1)``, ``I2(1)`` and their state derivatives."""
    fc = step.fc
    r2 = one_minus_rho_sq(fc)
    sq = np.sqrt(r2)
    sig_s, sig_y = fc.sigma_S_i, fc.sigma_Y_i
    return BaseOperators(
        I1_1=step.z1 / sig_s - fc.rho_i * step.z2 / (sig_s * sq),
        I2_1=step.z2 / (sig_y * sq),
        D1_I1_1=1.0 / (fc.a_S_i * r2),
        D2_I1_1=-fc.rho_i / (r2 * sig_s * sig_y),
        D1_I2_1=-fc.rho_i / (r2 * sig_s * sig_y),
        D2_I2_1=1.0 / (fc.a_Y_i * r2),
    )


def flow_derivatives(step: StepRecord) -> FlowDerivatives:
    """Flow derivatives of the step map and the operator kernels."""
    fc = step.fc
    r2 = one_minus_rho_sq(fc)
    sq = np.sqrt(r2)
    sig_s, sig_y = fc.sigma_S_i, fc.sigma_Y_i
    s1s, s1y, rho1 = fc.sigma1_S_i, fc.sigma1_Y_i, fc.rho1_i
    ops = base_operators(step)
    w = fc.rho_i * step.z1 + sq * step.z2
    g = sq * step.z1 - fc.rho_i * step.z2
    return FlowDerivatives(
        dX=-0.5 * fc.a1_S_i + s1s * step.z1,
        dY=fc.m1_i + s1y * w + sig_y * rho1 / sq * g,
        D1_dX=s1s / sig_s,
        D1_dY=sig_y * rho1 / (sig_s * r2),
        D2_dY=s1y / sig_y - rho1 * fc.rho_i / r2,
        Dprev_I1_1=-(s1s / sig_s) * ops.I1_1 - rho1 / r2 * (sig_y / sig_s) * ops.I2_1,
        Dprev_I2_1=-(s1y / sig_y - rho1 * fc.rho_i / r2) * ops.I2_1,
    )


def _f_inv(s: JumpSampler, delta):
    f = density(s, delta)
    if np.any(np.asarray(f) <= 0) or not np.all(np.isfinite(np.asarray(f))):
        raise DomainError("gap density vanishes on an interior interval")
    return 1.0 / f


def step_weights(step: StepRecord, s: JumpSampler) -> StepWeights:
    """Every interior weight of one step, in closed form.

    Parameters
    ----------
    step : StepRecord
        Scalar or batched transition record.
    s : JumpSampler
        Gap distribution of the renewal grid.

    Returns
    -------
    StepWeights
    """
    fc = step.fc
    mdl = step.model
    rho = mdl.rho
    f_inv = _f_inv(s, fc.delta)

    sig_s, sig_y = fc.sigma_S_i, fc.sigma_Y_i
    a_s, a_y = fc.a_S_i, fc.a_Y_i
    rho_i, rho1 = fc.rho_i, fc.rho1_i
    r2 = one_minus_rho_sq(fc)
    sq = np.sqrt(r2)
    mp, m1 = fc.m_i, fc.m1_i
    s1s, s1y = fc.sigma1_S_i, fc.sigma1_Y_i
    a1s, a1y = fc.a1_S_i, fc.a1_Y_i
    z1, z2 = step.z1, step.z2
    yn = step.y_next

    i11 = z1 / sig_s - rho_i * z2 / (sig_s * sq)
    i21 = z2 / (sig_y * sq)
    d1_i11 = 1.0 / (a_s * r2)
    d2_i11 = -rho_i / (r2 * sig_s * sig_y)
    d1_i21 = d2_i11
    d2_i21 = 1.0 / (a_y * r2)

    # interval-change coefficients: model at the right endpoint minus model
    # at the flow endpoint, plus their y_next-derivatives
    c_s = 0.5 * (mdl.a_S(yn) - mdl.a_S(mp))
    c_y = 0.5 * (mdl.a_Y(yn) - mdl.a_Y(mp))
    b_w = mdl.b_Y(yn) - mdl.b_Y(mp)
    c_ys = rho * (mdl.sigma_SY(yn) - mdl.sigma_SY(mp))
    d2c_s = 0.5 * mdl.a1_S(yn)
    d2c_y = 0.5 * mdl.a1_Y(yn)
    d22c_y = 0.5 * mdl.a2_Y(yn)
    d222c_y = 0.5 * mdl.a3_Y(yn)
    d2b = mdl.b1_Y(yn)
    d22b = mdl.b2_Y(yn)
    d2c_ys = rho * mdl.sigma1_SY(yn)
    d22c_ys = rho * mdl.sigma2_SY(yn)

    # theta = f^-1 [ I11(c_S) - I1(c_S) + I22(c_Y) + I2(b) + I12(c_YS) ]
    theta = f_inv * (
        c_s * (i11 * i11 - d1_i11)
        - c_s * i11
        + c_y * (i21 * i21 - d2_i21) - 2.0 * d2c_y * i21 + d22c_y
        + b_w * i21 - d2b
        + c_ys * i11 * i21 - i11 * d2c_ys - c_ys * d2_i11
    )

    d1_theta = f_inv * (
        2.0 * c_s * i11 * d1_i11
        - c_s * d1_i11
        + 2.0 * c_y * i21 * d1_i21 - 2.0 * d2c_y * d1_i21
        + b_w * d1_i21
        + c_ys * (d1_i11 * i21 + i11 * d1_i21) - d1_i11 * d2c_ys
    )

    d2_theta = f_inv * (
        d2c_s * (i11 * i11 - d1_i11) + 2.0 * c_s * i11 * d2_i11
        - (d2c_s * i11 + c_s * d2_i11)
        + d2c_y * (i21 * i21 - d2_i21) + 2.0 * c_y * i21 * d2_i21
        - 2.0 * d22c_y * i21 - 2.0 * d2c_y * d2_i21 + d222c_y
        + d2b * i21 + b_w * d2_i21 - d22b
        + d2c_ys * i11 * i21 + c_ys * (d2_i21 * i11 + i21 * d2_i11)
        - i11 * d22c_ys - 2.0 * d2c_ys * d2_i11
    )

    # flow-derivative atoms
    w = rho_i * z1 + sq * z2
    g = sq * z1 - rho_i * z2
    dx = -0.5 * a1s + s1s * z1
    dy = m1 + s1y * w + sig_y * rho1 / sq * g
    d1_dx = s1s / sig_s
    d1_dy = sig_y * rho1 / (sig_s * r2)
    d2_dy = s1y / sig_y - rho1 * rho_i / r2

    # flow derivatives of the interval-change coefficients
    a1s_y, a2s_y = mdl.a1_S(yn), mdl.a2_S(yn)
    a1y_y, a2y_y, a3y_y = mdl.a1_Y(yn), mdl.a2_Y(yn), mdl.a3_Y(yn)
    s1sy_y, s2sy_y = mdl.sigma1_SY(yn), mdl.sigma2_SY(yn)
    e_cs = 0.5 * (a1s_y * dy - mdl.a1_S(mp) * m1)
    e_cy = 0.5 * (a1y_y * dy - mdl.a1_Y(mp) * m1)
    e_b = d2b * dy - mdl.b1_Y(mp) * m1
    e_cys = rho * (s1sy_y * dy - mdl.sigma1_SY(mp) * m1)
    d1e_cs = 0.5 * a1s_y * d1_dy
    d1e_cys = rho * s1sy_y * d1_dy
    d2e_cys = rho * (s2sy_y * dy + s1sy_y * d2_dy)
    d2d1e_cys = rho * s2sy_y * d1_dy
    d2e_cy = 0.5 * (a2y_y * dy + a1y_y * d2_dy)
    d2d2e_cy = 0.5 * a3y_y * dy + a2y_y * d2_dy

    # transfer weights
    theta_ey = m1 * theta + f_inv * (i11 * e_cys - d1e_cys + i21 * e_cy - d2e_cy)
    theta_ex = f_inv * (i11 * e_cs - d1e_cs)

    d1_theta_ex = f_inv * (e_cs * d1_i11 + i11 * d1e_cs)
    i1_theta_ex = theta_ex * i11 - d1_theta_ex
    i1_theta = theta * i11 - d1_theta
    d2_theta_ey = m1 * d2_theta + f_inv * (
        d2_i11 * e_cys + i11 * d2e_cys - d2d1e_cys
        + d2_i21 * e_cy + i21 * d2e_cy - d2d2e_cy
    )
    i2_theta_ey = theta_ey * i21 - d2_theta_ey

    # flow derivative of theta
    dprev_i11 = -(s1s / sig_s) * i11 - rho1 / r2 * (sig_y / sig_s) * i21
    dprev_i21 = -(s1y / sig_y - rho1 * rho_i / r2) * i21
    dp_d1_i11 = -a1s / (a_s * a_s * r2) + 2.0 * rho_i * rho1 / (a_s * r2 * r2)
    v = r2 * sig_s * sig_y
    v1 = -2.0 * rho_i * rho1 * sig_s * sig_y + r2 * (s1s * sig_y + sig_s * s1y)
    dp_d2_i11 = -(rho1 * v - rho_i * v1) / (v * v)
    dp_d2_i21 = -a1y / (a_y * a_y * r2) + 2.0 * rho_i * rho1 / (a_y * r2 * r2)
    dp_d2c_ys = rho * s2sy_y * dy
    dp_d2c_y = 0.5 * a2y_y * dy
    dp_d22c_y = 0.5 * a3y_y * dy

    d2prev_theta = f_inv * (
        e_cs * (i11 * i11 - d1_i11) + 2.0 * c_s * i11 * dprev_i11 - c_s * dp_d1_i11
        - (e_cs * i11 + c_s * dprev_i11)
        + e_cy * (i21 * i21 - d2_i21) + c_y * (2.0 * i21 * dprev_i21 - dp_d2_i21)
        - 2.0 * dp_d2c_y * i21 - 2.0 * d2c_y * dprev_i21 + dp_d22c_y
        + b_w * dprev_i21 + i21 * e_b - d22b * dy
        + e_cys * i11 * i21 + c_ys * (i21 * dprev_i11 + i11 * dprev_i21)
        - i11 * dp_d2c_ys - dprev_i11 * d2c_ys - c_ys * dp_d2_i11 - e_cys * d2_i11
    )

    # correction weight theta_c = I1(theta*dX - theta_eX)
    #                           + I2(theta*dY - theta_eY) + Dprev theta
    i12_e_cys = e_cys * i11 * i21 - i11 * d2e_cys - e_cys * d2_i11 \
        - d1e_cys * i21 + d2d1e_cys
    i22_e_cy = e_cy * (i21 * i21 - d2_i21) - 2.0 * d2e_cy * i21 + d2d2e_cy
    t_comp = -f_inv * (i12_e_cys + i22_e_cy)
    t_rho = sig_y * rho1 / sq * (g * (i21 * theta - d2_theta)
                                 + rho_i * theta / (sig_y * sq))
    t_sig_y = s1y * (w * (i21 * theta - d2_theta) - theta / sig_y)
    t_dx = (theta * i11 - d1_theta) * dx - theta * d1_dx
    theta_c = t_comp + t_rho + t_sig_y + t_dx - i1_theta_ex + d2prev_theta

    return StepWeights(
        I1_1=i11, I2_1=i21,
        D1_I1_1=d1_i11, D2_I1_1=d2_i11, D1_I2_1=d1_i21, D2_I2_1=d2_i21,
        c_S=c_s, c_Y=c_y, b_Y_w=b_w, c_YS=c_ys,
        theta=theta, D1_theta=d1_theta, D2_theta=d2_theta,
        D2prev_theta=d2prev_theta,
        theta_eY=theta_ey, theta_eX=theta_ex, theta_c=theta_c,
        I1_theta=i1_theta, I2_theta_eY=i2_theta_ey, I1_theta_eX=i1_theta_ex,
    )


def terminal_weights(step: StepRecord, s: JumpSampler) -> TerminalWeights:
    """Weights of the final interval ``[zeta_{N_T}, T]``.

    ``theta_last`` is the survival reweighting ``1/(1 - F(T - zeta_{N_T}))``;
    the transfer weights are the direct flow derivatives of the step map
    (the correction weight of the final interval vanishes).

    Raises
    ------
    DomainError
        If the survival probability of the final gap is zero.
    """
    fc = step.fc
    surv = survival(s, fc.delta)
    if np.any(np.asarray(surv) <= 0):
        raise DomainError("survival probability of the final interval is zero")
    r2 = one_minus_rho_sq(fc)
    sq = np.sqrt(r2)
    sig_s, sig_y = fc.sigma_S_i, fc.sigma_Y_i
    s1s, s1y, rho1 = fc.sigma1_S_i, fc.sigma1_Y_i, fc.rho1_i
    z1, z2 = step.z1, step.z2

    theta_last = 1.0 / surv
    i11 = z1 / sig_s - fc.rho_i * z2 / (sig_s * sq)
    i21 = z2 / (sig_y * sq)
    w = fc.rho_i * z1 + sq * z2
    g = sq * z1 - fc.rho_i * z2
    theta_ey = theta_last * (fc.m1_i + s1y * w + sig_y * rho1 / sq * g)
    theta_ex = theta_last * (-0.5 * fc.a1_S_i + s1s * z1)
    return TerminalWeights(
        theta_last=theta_last,
        theta_eY_last=theta_ey,
        theta_eX_last=theta_ex,
        I1_theta_last=theta_last * i11,
        I2_theta_eY_last=theta_ey * i21 - theta_last * (s1y / sig_y - rho1 * fc.rho_i / r2),
        I1_theta_eX_last=theta_ex * i11 - theta_last * s1s / sig_s,
    )


def theta_i(step: StepRecord, s: JumpSampler):
    """Interior correction weight of one step (see :func:`step_weights`)."""
    return step_weights(step, s).theta


def transfer_weights(step: StepRecord, s: JumpSampler, is_last: bool):
    """Transfer triple ``(theta_eY, theta_eX, theta_c)`` of one step.

    For the final interval the correction component is identically zero
    and the transfer components are the direct flow derivatives.
    """
    if is_last:
        tw = terminal_weights(step, s)
        return tw.theta_eY_last, tw.theta_eX_last, 0.0 * tw.theta_eY_last
    sw = step_weights(step, s)
    return sw.theta_eY, sw.theta_eX, sw.theta_c


def _per_step(path: ChainPath, s: JumpSampler):
    interior = [step_weights(st, s) for st in path.steps[:-1]]
    term = terminal_weights(path.steps[-1], s)
    return interior, term


def price_weight(path: ChainPath, s: JumpSampler) -> float:
    """Product of the correction weights along one path.

    The price representation is ``E[h(X_T) * price_weight]``.  For deep
    grids (more than ``LOG_PRODUCT_THRESHOLD`` jumps) the product is
    accumulated in log-magnitude/sign form to avoid over- and underflow.
    """
    interior, term = _per_step(path, s)
    thetas = [sw.theta for sw in interior] + [term.theta_last]
    if path.grid.n_jumps > LOG_PRODUCT_THRESHOLD:
        sign = 1.0
        log_mag = 0.0
        for t in thetas:
            if t == 0.0:
                return 0.0
            sign = math.copysign(sign, t)
            log_mag += math.log(abs(t))
        return sign * math.exp(log_mag)
    out = 1.0
    for t in thetas:
        out *= t
    return out


def delta_weight(path: ChainPath, s: JumpSampler) -> float:
    """Spot-direction weight: ``s0 * T * d/ds0 E[h] = E[h * delta_weight]``.

    Equals ``sum_k (zeta_k - zeta_{k-1}) * theta^{I1,k}`` where
    ``theta^{I1,k}`` replaces the k-th factor of the price product by
    ``I1_k(theta_k)``; accumulated by a prefix recurrence.
    """
    interior, term = _per_step(path, s)
    prefix = 1.0
    acc = 0.0
    for k, st in enumerate(path.steps):
        if k < len(path.steps) - 1:
            th, i1 = interior[k].theta, interior[k].I1_theta
        else:
            th, i1 = term.theta_last, term.I1_theta_last
        acc = acc * th + st.fc.delta * i1 * prefix
        prefix = prefix * th
    return acc


def vega_weight(path: ChainPath, s: JumpSampler) -> float:
    """Variance-direction weight: ``T * d/dy0 E[h] = E[h * vega_weight]``.

    Implements the full transfer expansion

        sum_k dzeta_k * ( theta^{I2,k} + sum_{j<=k} (theta^{C,j} + theta^{I1,k}_j) )

    where differentiation enters interval ``k`` through ``I2_k(theta_eY_k)``,
    is carried across earlier intervals by ``theta_eY`` factors, and leaks
    into the spot direction through ``theta_eX``/``theta_c``.  Accumulated
    with O(1) state per step: ``prefix``/``prefix_e`` are the running
    products of ``theta``/``theta_eY``, ``corr`` the correction sum
    ``sum_{j<=t} theta^{C,j}`` restricted to the first ``t`` factors, and
    ``spill`` the ``theta_eX``-prefix mixing term.
    """
    interior, term = _per_step(path, s)
    prefix_e = 1.0    # prod theta_eY_i, i <= t
    corr = 0.0
    spill = 0.0
    acc = 0.0
    for k, st in enumerate(path.steps):
        if k < len(path.steps) - 1:
            sw = interior[k]
            th, ey = sw.theta, sw.theta_eY
            i2ey, i1ex, i1th = sw.I2_theta_eY, sw.I1_theta_eX, sw.I1_theta
            thc, ex = sw.theta_c, sw.theta_eX
        else:
            th, ey = term.theta_last, term.theta_eY_last
            i2ey, i1ex, i1th = term.I2_theta_eY_last, term.I1_theta_eX_last, term.I1_theta_last
            thc, ex = 0.0, term.theta_eX_last
        corr = corr * th + thc * prefix_e
        acc = acc * th + st.fc.delta * (i2ey * prefix_e + corr
                                        + i1th * spill + i1ex * prefix_e)
        spill = spill * th + ex * prefix_e
        prefix_e = prefix_e * ey
    return acc
