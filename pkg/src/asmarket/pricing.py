"""AS prices from dual multipliers, the strong-duality payment audit, and
per-unit stand-alone AS market sizes.

Price formulas (stationarity of the relaxed problem's Lagrangian in the
hourly aggregates):

    lambda_h   = (mu3 - mu1)/f0 + mu_rocof
    lambda_pfr = (mu3 + mu1)/T_PFR + mu_qss
    lambda_efr = (mu1 - mu3)*T_EFR/(4*df) + mu2/sqrt(df) + mu_qss
    omega_loss = mu_rocof*f0/(2*rocof_max) + mu2/sqrt(df) + mu_qss

Each is cross-checked against the multiplier of the corresponding
aggregation (or max-loss) row; disagreement signals an invalid dual vector.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .scenario import Scenario, SystemParams
from .solve import (
    CommitmentSchedule,
    DispatchSolution,
    DualSolution,
    InfeasibleError,
    SolveOptions,
    solve_relaxed,
)
from .ucmodel import FixedProfile, InitialState, build_uc


class StationarityError(Exception):
    """The dual vector does not satisfy the price stationarity conditions."""


class AuditError(Exception):
    """The strong-duality payment identity failed beyond tolerance."""


class StandaloneError(Exception):
    def __init__(self, unit_id: str, cause: Exception):
        self.unit_id = unit_id
        super().__init__(f"stand-alone solve for unit {unit_id!r} failed: {cause}")


@dataclass
class AsPrices:
    lambda_e: np.ndarray
    lambda_h: np.ndarray
    lambda_pfr: np.ndarray
    lambda_efr: np.ndarray
    omega_loss: np.ndarray


def _close(a: np.ndarray, b: np.ndarray, rel_tol: float) -> bool:
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return bool(np.all(np.abs(a - b) <= rel_tol * scale))


def as_prices_from_duals(
    duals: DualSolution, params: SystemParams, rel_tol: float = 1e-6
) -> AsPrices:
    """Compute AS prices by the stationarity formulas and cross-check them
    against the aggregation-row multipliers."""
    df = params.delta_f_max_hz
    sq = math.sqrt(df)
    lam_h = (duals.mu_nadir_3 - duals.mu_nadir_1) / params.f0_hz + duals.mu_rocof
    lam_pfr = (duals.mu_nadir_3 + duals.mu_nadir_1) / params.t_pfr_s + duals.mu_qss
    lam_efr = (
        (duals.mu_nadir_1 - duals.mu_nadir_3) * params.t_efr_s / (4.0 * df)
        + duals.mu_nadir_2 / sq
        + duals.mu_qss
    )
    omega = (
        duals.mu_rocof * params.f0_hz / (2.0 * params.rocof_max_hz_per_s)
        + duals.mu_nadir_2 / sq
        + duals.mu_qss
    )
    for name, formula, row in (
        ("lambda_h", lam_h, duals.lambda_h),
        ("lambda_pfr", lam_pfr, duals.lambda_pfr),
        ("lambda_efr", lam_efr, duals.lambda_efr),
        ("omega_loss", omega, duals.omega_loss),
    ):
        if not _close(formula, row, rel_tol):
            worst = float(np.max(np.abs(formula - row)))
            raise StationarityError(
                f"{name}: stationarity formula disagrees with the row multiplier "
                f"(max deviation {worst:.3e})"
            )
    prices = AsPrices(
        lambda_e=duals.lambda_e.copy(),
        lambda_h=lam_h,
        lambda_pfr=lam_pfr,
        lambda_efr=lam_efr,
        omega_loss=omega,
    )
    for name in ("lambda_e", "lambda_h", "lambda_pfr", "lambda_efr", "omega_loss"):
        arr = getattr(prices, name)
        if np.any(arr < -1e-9):
            raise StationarityError(f"{name}: negative price {arr.min():.3e}")
    return prices


# ---------------------------------------------------------------------------
# Strong-duality audit


@dataclass
class MarketBreakdown:
    horizon: int
    inertia_revenue: np.ndarray      # lambda_h * H_t per hour
    pfr_revenue: np.ndarray
    efr_revenue: np.ndarray
    as_market: np.ndarray            # Omega_t = p_loss * omega per hour
    omega_identity_residual: np.ndarray
    energy_payments: float
    as_payments: float
    system_costs: float
    thermal_profits: float
    renewable_profits: float
    storage_profits: float
    omitted_terms: float             # psi_mdt block + initial-state constants
    identity_residual_rel: float
    by_technology: dict[str, dict[str, float]]


def system_costs(scenario: Scenario, primal: DispatchSolution) -> float:
    """Objective recomputed from offers and the primal point."""
    total = 0.0
    for g in scenario.generators:
        total += float(
            g.energy_offer_gbp_per_mwh * primal.gen_p[g.id].sum()
            + g.inertia_offer_gbp_per_mws * g.p_max_mw * g.inertia_s * primal.gen_commit[g.id].sum()
            + g.pfr_offer_gbp_per_mw * primal.gen_pfr[g.id].sum()
        )
    for r in scenario.res_units:
        total += float(r.energy_offer_gbp_per_mwh * primal.res_p[r.id].sum())
    for s in scenario.storage_units:
        modes = primal.sto_cha_mode[s.id] + primal.sto_dis_mode[s.id]
        total += float(
            s.energy_offer_gbp_per_mwh * primal.sto_discharge[s.id].sum()
            + s.inertia_offer_gbp_per_mws * s.p_max_mw * s.inertia_s * modes.sum()
            + s.pfr_offer_gbp_per_mw * primal.sto_pfr[s.id].sum()
            + s.efr_offer_gbp_per_mw * primal.sto_efr[s.id].sum()
        )
    return total


def duality_audit(
    primal: DispatchSolution,
    duals: DualSolution,
    scenario: Scenario,
    rel_tol: float = 1e-5,
    initial_state: InitialState | None = None,
) -> MarketBreakdown:
    """Itemise the strong-duality payment decomposition and verify it.

    energy + AS payments = system costs + thermal/renewable/storage profits
    (+ the explicitly reported omitted terms: the min-down-time block and any
    nonzero initial-state constants). A residual beyond tolerance flags a
    dual-recovery defect.
    """
    init = initial_state or InitialState()
    prices = as_prices_from_duals(duals, scenario.params)

    inertia_rev = prices.lambda_h * primal.inertia_mws
    pfr_rev = prices.lambda_pfr * primal.pfr_mw
    efr_rev = prices.lambda_efr * primal.efr_mw
    as_market = primal.p_loss_mw * prices.omega_loss
    omega_resid = np.abs(as_market - (inertia_rev + pfr_rev + efr_rev))

    demand = np.asarray(scenario.demand_mw)
    energy_payments = float(demand @ prices.lambda_e)
    # the payment identity uses the loss rows' actual rhs: equal to the
    # hourly AS market under a fixed loss parameter (complementary
    # slackness), and zero under the endogenous rule, where the AS cost is
    # carried by the loss-setting units through the energy price instead
    as_payments = duals.as_payment_rhs
    costs = system_costs(scenario, primal)

    thermal = 0.0
    omitted = duals.initial_rhs_term
    for g in scenario.generators:
        thermal += float(
            duals.psi_max_y[g.id].sum()
            + duals.psi_max_yst[g.id].sum()
            + duals.psi_max_ysg[g.id].sum()
            + duals.psi_max_ysd[g.id].sum()
        )
        rhs0 = 1.0 - init.y0(g.id)
        mdt = duals.psi_mdt[g.id]
        omitted += float(mdt[0] * rhs0 + mdt[1:].sum())
    renewable = 0.0
    for r in scenario.res_units:
        caps = np.array(r.cf) * r.p_max_mw
        renewable += float(caps @ duals.psi_cf[r.id])
    storage = 0.0
    for s in scenario.storage_units:
        storage += float(
            -s.e_min_mwh * duals.psi_e_min[s.id].sum()
            + s.e_max_mwh * duals.psi_e_max[s.id].sum()
            + duals.psi_max_ycha[s.id].sum()
            + duals.psi_max_ydis[s.id].sum()
            + duals.psi_mutex[s.id].sum()
        )
        storage += init.e0(s) * duals.psi_ini[s.id] - s.e_end_mwh * duals.psi_end[s.id]

    lhs = energy_payments + as_payments
    rhs = costs + thermal + renewable + storage + omitted
    resid = abs(lhs - rhs) / max(1.0, abs(lhs))
    if resid > rel_tol:
        raise AuditError(
            f"strong-duality identity residual {resid:.3e} exceeds {rel_tol:.1e} "
            f"(payments {lhs:.6f} vs decomposition {rhs:.6f})"
        )

    return MarketBreakdown(
        horizon=primal.horizon,
        inertia_revenue=inertia_rev,
        pfr_revenue=pfr_rev,
        efr_revenue=efr_rev,
        as_market=as_market,
        omega_identity_residual=omega_resid,
        energy_payments=energy_payments,
        as_payments=as_payments,
        system_costs=costs,
        thermal_profits=thermal,
        renewable_profits=renewable,
        storage_profits=storage,
        omitted_terms=omitted,
        identity_residual_rel=resid,
        by_technology=_technology_revenues(scenario, primal, prices),
    )


def _technology_revenues(
    scenario: Scenario, primal: DispatchSolution, prices: AsPrices
) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}

    def bucket(tech):
        return out.setdefault(
            tech, {"energy_revenue": 0.0, "inertia_revenue": 0.0, "pfr_revenue": 0.0, "efr_revenue": 0.0}
        )

    for g in scenario.generators:
        b = bucket(g.technology)
        b["energy_revenue"] += float(prices.lambda_e @ primal.gen_p[g.id])
        b["inertia_revenue"] += float(
            prices.lambda_h @ (g.inertia_s * g.p_max_mw * primal.gen_commit[g.id])
        )
        b["pfr_revenue"] += float(prices.lambda_pfr @ primal.gen_pfr[g.id])
    for r in scenario.res_units:
        b = bucket(r.technology)
        b["energy_revenue"] += float(prices.lambda_e @ primal.res_p[r.id])
    for s in scenario.storage_units:
        b = bucket(s.technology)
        net = primal.sto_discharge[s.id] - primal.sto_charge[s.id]
        b["energy_revenue"] += float(prices.lambda_e @ net)
        modes = primal.sto_cha_mode[s.id] + primal.sto_dis_mode[s.id]
        b["inertia_revenue"] += float(prices.lambda_h @ (s.inertia_s * s.p_max_mw * modes))
        b["pfr_revenue"] += float(prices.lambda_pfr @ primal.sto_pfr[s.id])
        b["efr_revenue"] += float(prices.lambda_efr @ primal.sto_efr[s.id])
    for b in out.values():
        b["as_revenue"] = b["inertia_revenue"] + b["pfr_revenue"] + b["efr_revenue"]
    return out


# ---------------------------------------------------------------------------
# Stand-alone AS market sizes


@dataclass
class StandAloneCosts:
    """Per-unit, per-hour stand-alone AS market sizes.

    Entries exist only at hours where the unit is dispatched (discharging,
    for storage); exact zeros mark non-players for the game logic.
    """

    horizon: int
    omegas: dict[str, np.ndarray]
    dispatched: dict[str, np.ndarray]
    technology: dict[str, str]

    def per_hour(self, t: int) -> list[tuple[str, float]]:
        return [
            (uid, float(self.omegas[uid][t]))
            for uid in self.omegas
            if self.dispatched[uid][t]
        ]

    def units(self) -> list[str]:
        return list(self.omegas)


DISPATCH_TOL = 1e-6


def standalone_markets(
    scenario: Scenario,
    block_i: tuple[CommitmentSchedule, DispatchSolution],
    options: SolveOptions | None = None,
    jobs: int = 1,
    zero_clamp: float = 1e-8,
) -> StandAloneCosts:
    """One relaxed solve per dispatched unit, with the loss parameter fixed
    to that unit's hourly dispatch; Omega_{i,t} = p_i_t * omega_t.

    Pure function of its inputs; per-unit solves are independent, so they may
    fan out over ``jobs`` worker threads without changing the result.
    """
    _, dispatch = block_i
    T = scenario.horizon
    tech = scenario.technology_of()

    profiles: dict[str, np.ndarray] = {}
    for unit in scenario.all_units:
        if not unit.loss_eligible:
            continue
        prof = np.maximum(dispatch.dispatch_of(unit.id), 0.0)
        prof[prof <= DISPATCH_TOL] = 0.0
        profiles[unit.id] = prof

    def solve_unit(uid: str) -> np.ndarray:
        prof = profiles[uid]
        if not prof.any():
            return np.zeros(T)
        model = build_uc(scenario, FixedProfile(tuple(prof)), relaxed=True)
        try:
            _, duals, _ = solve_relaxed(model, options)
        except InfeasibleError as exc:
            raise StandaloneError(uid, exc) from exc
        return prof * duals.omega_loss

    ids = list(profiles)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(solve_unit, ids))
    else:
        results = [solve_unit(uid) for uid in ids]

    omegas = dict(zip(ids, results))
    scale = max(1.0, max((float(np.max(np.abs(v))) for v in omegas.values()), default=1.0))
    for v in omegas.values():
        v[np.abs(v) <= zero_clamp * scale] = 0.0
    dispatched = {uid: profiles[uid] > 0.0 for uid in ids}
    return StandAloneCosts(
        horizon=T,
        omegas=omegas,
        dispatched=dispatched,
        technology={uid: tech[uid] for uid in ids},
    )
