"""Frequency-security primitives: RoCoF floor and the nadir cone.

The nadir requirement on the hourly aggregates (H, EFR, PFR, p_loss) is a
two-row second-order cone

    || (u1, u2) ||_2 <= v

with linear terms

    u1 = H/f0 - T_EFR*EFR/(4*df) - PFR/T_PFR
    u2 = (p_loss - EFR)/sqrt(df)
    v  = H/f0 - T_EFR*EFR/(4*df) + PFR/T_PFR

(df is the admissible nadir deviation). Expanding v**2 - u1**2 gives the
equivalent algebraic form used as the independent check:

    (H/f0 - T_EFR*EFR/(4*df)) * PFR/T_PFR >= (p_loss - EFR)**2 / (4*df)

together with v >= 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .scenario import SystemParams


def rocof_min_inertia(p_loss_mw: float, params: SystemParams) -> float:
    """Least system inertia (MWs) keeping RoCoF within its limit."""
    if p_loss_mw < 0:
        raise ValueError(f"p_loss_mw must be >= 0 (got {p_loss_mw})")
    return p_loss_mw * params.f0_hz / (2.0 * params.rocof_max_hz_per_s)


def nadir_terms(
    h_mws: float, efr_mw: float, pfr_mw: float, p_loss_mw: float, params: SystemParams
) -> tuple[float, float, float]:
    """Cone terms (u1, u2, v) at a point."""
    df = params.delta_f_max_hz
    a = h_mws / params.f0_hz - params.t_efr_s * efr_mw / (4.0 * df)
    u1 = a - pfr_mw / params.t_pfr_s
    u2 = (p_loss_mw - efr_mw) / math.sqrt(df)
    v = a + pfr_mw / params.t_pfr_s
    return u1, u2, v


def nadir_residual(
    h_mws: float, efr_mw: float, pfr_mw: float, p_loss_mw: float, params: SystemParams
) -> float:
    """Signed cone residual ||u|| - v; <= 0 means feasible."""
    u1, u2, v = nadir_terms(h_mws, efr_mw, pfr_mw, p_loss_mw, params)
    return math.hypot(u1, u2) - v


def nadir_feasible(
    h_mws: float, efr_mw: float, pfr_mw: float, p_loss_mw: float, params: SystemParams
) -> bool:
    """Cone membership of the two-row nadir condition (total function)."""
    return nadir_residual(h_mws, efr_mw, pfr_mw, p_loss_mw, params) <= 0.0


def nadir_feasible_product(
    h_mws: float, efr_mw: float, pfr_mw: float, p_loss_mw: float, params: SystemParams
) -> bool:
    """Algebraic product form of the nadir condition, kept independent of
    :func:`nadir_feasible` so the two routes can be checked against each other."""
    df = params.delta_f_max_hz
    a = h_mws / params.f0_hz - params.t_efr_s * efr_mw / (4.0 * df)
    lhs = a * pfr_mw / params.t_pfr_s
    rhs = (p_loss_mw - efr_mw) ** 2 / (4.0 * df)
    v_nonneg = a + pfr_mw / params.t_pfr_s >= 0.0
    return lhs >= rhs and v_nonneg


@dataclass(frozen=True)
class NadirCut:
    """Supporting hyperplane a1*u1 + a2*u2 - v <= 0 with ||(a1,a2)|| <= 1.

    Cuts are linearisations of the convex map x -> ||u(x)|| - v(x); since
    u and v are linear the cut is homogeneous in the model variables.
    """

    t: int
    a1: float
    a2: float

    def coefficients(self, params: SystemParams) -> dict[str, float]:
        """Coefficients on (H, EFR, PFR, p_loss) of the cut row."""
        df = params.delta_f_max_hz
        sq = math.sqrt(df)
        te = params.t_efr_s / (4.0 * df)
        c_h = (self.a1 - 1.0) / params.f0_hz
        c_efr = (1.0 - self.a1) * te - self.a2 / sq
        c_pfr = -(self.a1 + 1.0) / params.t_pfr_s
        c_loss = self.a2 / sq
        return {"h": c_h, "efr": c_efr, "pfr": c_pfr, "p_loss": c_loss}


def separating_cut(t: int, u1: float, u2: float) -> NadirCut:
    """Cut direction at a violating point: the unit subgradient of ||u||,
    or the v >= 0 facet when u vanishes."""
    nrm = math.hypot(u1, u2)
    if nrm == 0.0:
        return NadirCut(t=t, a1=0.0, a2=0.0)
    return NadirCut(t=t, a1=u1 / nrm, a2=u2 / nrm)
