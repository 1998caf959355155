"""Solvers for the frequency-secured UC: convex relaxation with full dual
recovery, and best-first branch-and-bound for the mixed-integer form.

The nadir cone is handled by outer-approximation cutting planes over the LP
core; cone multipliers are reconstructed by aggregating the active-cut
multipliers through the cut gradients, so the pricing layer sees exactly the
(mu_1, mu_2, mu_3) triple of the conic formulation.
"""
from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import lp
from .frequency import NadirCut, nadir_terms, separating_cut
from .ucmodel import (
    INFEASIBILITY_LABELS,
    K_BALANCE,
    K_COMMIT,
    K_E0CAP,
    K_EEND,
    K_EFRDEF,
    K_HDEF,
    K_MAXLOSS,
    K_MDT,
    K_MUT,
    K_MUTEX,
    K_NADIR_CUT,
    K_PFRDEF,
    K_QSS,
    K_ROCOF,
    UCModel,
    V_E,
    V_E0,
    V_EFRS,
    V_P,
    V_PCHA,
    V_PDIS,
    V_PFRG,
    V_PFRS,
    V_PLOSS,
    V_PRES,
    V_Y,
    V_YCHA,
    V_YDIS,
    V_YSD,
    V_YSG,
    V_YST,
)


class SolverError(Exception):
    pass


class InfeasibleError(SolverError):
    """Carries the constraint classes that cannot be satisfied."""

    def __init__(self, certificate: str, by_class: dict[str, float] | None = None):
        self.certificate = certificate
        self.by_class = by_class or {}
        detail = ", ".join(f"{k}: {v:.3f}" for k, v in sorted(self.by_class.items()))
        super().__init__(f"infeasible: {certificate}" + (f" ({detail})" if detail else ""))


class UnboundedError(SolverError):
    pass


class DualRecoveryError(SolverError):
    pass


@dataclass
class SolveOptions:
    feas_tol: float = 1e-6           # absolute, on scaled rows
    duality_tol: float = 1e-6        # relative duality gap / CS residual
    cone_rel_tol: float = 1e-9       # cone residual relative to point scale
    max_cut_rounds: int = 400
    integrality_tol: float = 1e-6
    max_nodes: int = 100_000
    time_limit_s: float | None = None
    lp_tol: float = 1e-9


@dataclass
class CommitmentSchedule:
    gen_on: dict[str, np.ndarray]
    gen_start_up: dict[str, np.ndarray]
    gen_start_gen: dict[str, np.ndarray]
    gen_shut_down: dict[str, np.ndarray]
    sto_charging: dict[str, np.ndarray]
    sto_discharging: dict[str, np.ndarray]


@dataclass
class DispatchSolution:
    objective: float
    horizon: int
    gen_p: dict[str, np.ndarray]
    gen_pfr: dict[str, np.ndarray]
    gen_commit: dict[str, np.ndarray]      # commitment level (fractional when relaxed)
    res_p: dict[str, np.ndarray]
    sto_charge: dict[str, np.ndarray]
    sto_discharge: dict[str, np.ndarray]
    sto_cha_mode: dict[str, np.ndarray]
    sto_dis_mode: dict[str, np.ndarray]
    sto_soc: dict[str, np.ndarray]
    sto_pfr: dict[str, np.ndarray]
    sto_efr: dict[str, np.ndarray]
    sto_e0: dict[str, float]
    inertia_mws: np.ndarray
    pfr_mw: np.ndarray
    efr_mw: np.ndarray
    p_loss_mw: np.ndarray

    def dispatch_of(self, unit_id: str) -> np.ndarray:
        """Loss-relevant injection of a unit (discharge for storage)."""
        if unit_id in self.gen_p:
            return self.gen_p[unit_id]
        if unit_id in self.res_p:
            return self.res_p[unit_id]
        if unit_id in self.sto_discharge:
            return self.sto_discharge[unit_id]
        raise KeyError(unit_id)


@dataclass
class DualSolution:
    lambda_e: np.ndarray
    lambda_h: np.ndarray
    lambda_pfr: np.ndarray
    lambda_efr: np.ndarray
    mu_rocof: np.ndarray
    mu_nadir_1: np.ndarray
    mu_nadir_2: np.ndarray
    mu_nadir_3: np.ndarray
    mu_qss: np.ndarray
    omega_loss: np.ndarray
    psi_max_y: dict[str, np.ndarray]
    psi_max_yst: dict[str, np.ndarray]
    psi_max_ysg: dict[str, np.ndarray]
    psi_max_ysd: dict[str, np.ndarray]
    psi_mdt: dict[str, np.ndarray]
    psi_cf: dict[str, np.ndarray]
    psi_e_min: dict[str, np.ndarray]
    psi_e_max: dict[str, np.ndarray]
    psi_max_ycha: dict[str, np.ndarray]
    psi_max_ydis: dict[str, np.ndarray]
    psi_mutex: dict[str, np.ndarray]
    psi_ini: dict[str, float]
    psi_end: dict[str, float]
    initial_rhs_term: float
    as_payment_rhs: float  # sum of loss-row rhs * omega; zero under EndogenousMax
    dual_objective: float


@dataclass
class SolveStats:
    nodes: int = 0
    lp_iterations: int = 0
    cuts: int = 0
    rel_mip_gap: float = 0.0
    rel_duality_gap: float = 0.0
    max_cs_residual: float = 0.0
    wall_s: float = 0.0
    budget_exhausted: bool = False


# ---------------------------------------------------------------------------
# Assembly


@dataclass
class _Assembled:
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    a_eq: sparse.csr_matrix
    b_eq: np.ndarray
    eq_rows: list
    a_ub: sparse.csr_matrix
    b_ub: np.ndarray
    ub_rows: list


def _assemble(model: UCModel) -> _Assembled:
    n = model.n_vars
    c = np.array([v.cost for v in model.vardefs])
    lb = np.array([v.lb for v in model.vardefs])
    ub = np.array([v.ub for v in model.vardefs])

    eq_rows, ub_rows = [], []
    eq_data: tuple[list, list, list] = ([], [], [])
    ub_data: tuple[list, list, list] = ([], [], [])
    b_eq: list[float] = []
    b_ub: list[float] = []
    for row in model.rows:
        if row.sense == "=":
            r = len(b_eq)
            for idx, coef in row.coeffs:
                eq_data[0].append(r)
                eq_data[1].append(idx)
                eq_data[2].append(coef)
            b_eq.append(row.rhs)
            eq_rows.append(row)
        else:
            flip = -1.0 if row.sense == ">=" else 1.0
            r = len(b_ub)
            for idx, coef in row.coeffs:
                ub_data[0].append(r)
                ub_data[1].append(idx)
                ub_data[2].append(flip * coef)
            b_ub.append(flip * row.rhs)
            ub_rows.append(row)

    a_eq = sparse.csr_matrix(
        (eq_data[2], (eq_data[0], eq_data[1])), shape=(len(b_eq), n)
    )
    a_ub = sparse.csr_matrix(
        (ub_data[2], (ub_data[0], ub_data[1])), shape=(len(b_ub), n)
    )
    return _Assembled(
        c, lb, ub, a_eq, np.array(b_eq), eq_rows, a_ub, np.array(b_ub), ub_rows
    )


def _cut_matrix(model: UCModel, cuts: list[NadirCut]) -> sparse.csr_matrix:
    params = model.scenario.params
    rows, cols, data = [], [], []
    for r, cut in enumerate(cuts):
        cone = model.cones[cut.t]
        coefs = cut.coefficients(params)
        for idx, key in (
            (cone.idx_h, "h"),
            (cone.idx_efr, "efr"),
            (cone.idx_pfr, "pfr"),
            (cone.idx_ploss, "p_loss"),
        ):
            rows.append(r)
            cols.append(idx)
            data.append(coefs[key])
    return sparse.csr_matrix((data, (rows, cols)), shape=(len(cuts), model.n_vars))


def _solve_once(
    asm: _Assembled,
    cut_a: sparse.csr_matrix | None,
    patch: dict[int, tuple[float, float]] | None,
    opts: SolveOptions,
) -> lp.LpOutcome:
    lb, ub = asm.lb, asm.ub
    if patch:
        lb = lb.copy()
        ub = ub.copy()
        for idx, (lo, hi) in patch.items():
            lb[idx] = lo
            ub[idx] = hi
    if cut_a is not None and cut_a.shape[0]:
        a_ub = sparse.vstack([asm.a_ub, cut_a], format="csr")
        b_ub = np.concatenate([asm.b_ub, np.zeros(cut_a.shape[0])])
    else:
        a_ub = asm.a_ub
        b_ub = asm.b_ub
    return lp.solve_lp(asm.c, asm.a_eq, asm.b_eq, a_ub, b_ub, lb, ub, opts.lp_tol)


def _cone_violations(model: UCModel, x: np.ndarray, rel_tol: float):
    params = model.scenario.params
    out = []
    for cone in model.cones:
        u1, u2, v = nadir_terms(
            x[cone.idx_h], x[cone.idx_efr], x[cone.idx_pfr], x[cone.idx_ploss], params
        )
        nrm = math.hypot(u1, u2)
        scaled = (nrm - v) / max(1.0, abs(v), nrm)
        if scaled > rel_tol:
            out.append((cone.t, u1, u2, scaled))
    return out


def _oa_solve(
    model: UCModel,
    asm: _Assembled,
    cuts: list[NadirCut],
    patch: dict[int, tuple[float, float]] | None,
    opts: SolveOptions,
    stats: SolveStats,
) -> lp.LpOutcome:
    """Solve the LP, adding nadir cuts until the cone holds at the optimum.

    Targets the tight cone tolerance; on flat optimal faces the vertex can
    wander among near-feasible corners, so after a grace number of rounds any
    point inside the scaled feasibility tolerance is accepted.
    """
    for round_no in range(opts.max_cut_rounds):
        out = _solve_once(asm, _cut_matrix(model, cuts), patch, opts)
        stats.lp_iterations += out.iterations
        if out.status != lp.OPTIMAL:
            return out
        viols = _cone_violations(model, out.x, opts.cone_rel_tol)
        if not viols:
            return out
        if round_no >= 50 and max(v[3] for v in viols) <= opts.feas_tol:
            return out
        for t, u1, u2, _ in viols:
            cuts.append(separating_cut(t, u1, u2))
        stats.cuts = len(cuts)
    raise SolverError("nadir outer approximation did not converge")


def _initial_cuts(model: UCModel) -> list[NadirCut]:
    # v >= 0 facets; every cone point satisfies them and they anchor the OA.
    return [NadirCut(t=cone.t, a1=0.0, a2=0.0) for cone in model.cones]


def _diagnose_infeasible(
    model: UCModel, asm: _Assembled, cuts: list[NadirCut], patch, opts: SolveOptions
) -> InfeasibleError:
    """Elastic re-solve: slacks on every row, grouped by constraint class."""
    cut_a = _cut_matrix(model, cuts)
    n = model.n_vars
    n_eq = asm.a_eq.shape[0]
    n_ub = asm.a_ub.shape[0] + cut_a.shape[0]
    a_ub_full = sparse.vstack([asm.a_ub, cut_a], format="csr") if cut_a.shape[0] else asm.a_ub
    b_ub_full = np.concatenate([asm.b_ub, np.zeros(cut_a.shape[0])])

    eye_eq = sparse.identity(n_eq, format="csr")
    a_eq = sparse.hstack(
        [asm.a_eq, eye_eq, -eye_eq, sparse.csr_matrix((n_eq, n_ub))], format="csr"
    )
    a_ub = sparse.hstack(
        [a_ub_full, sparse.csr_matrix((n_ub, 2 * n_eq)), -sparse.identity(n_ub, format="csr")],
        format="csr",
    )
    lb, ub = asm.lb.copy(), asm.ub.copy()
    if patch:
        for idx, (lo, hi) in patch.items():
            lb[idx] = lo
            ub[idx] = hi
    n_slack = 2 * n_eq + n_ub
    c = np.concatenate([np.zeros(n), np.ones(n_slack)])
    lb_full = np.concatenate([lb, np.zeros(n_slack)])
    ub_full = np.concatenate([ub, np.full(n_slack, np.inf)])
    out = lp.solve_lp(c, a_eq, asm.b_eq, a_ub, b_ub_full, lb_full, ub_full, opts.lp_tol)
    if out.status != lp.OPTIMAL or out.objective <= 1e-6:
        return InfeasibleError("unknown (elastic diagnosis inconclusive)")
    slack = out.x[n:]
    by_class: dict[str, float] = {}
    for i, row in enumerate(asm.eq_rows):
        amount = slack[i] + slack[n_eq + i]
        if amount > 1e-6:
            label = INFEASIBILITY_LABELS.get(row.kind, row.kind)
            by_class[label] = by_class.get(label, 0.0) + amount
    base_rows = list(asm.ub_rows) + [None] * cut_a.shape[0]
    for i, row in enumerate(base_rows):
        amount = slack[2 * n_eq + i]
        if amount > 1e-6:
            kind = K_NADIR_CUT if row is None else row.kind
            label = INFEASIBILITY_LABELS.get(kind, kind)
            by_class[label] = by_class.get(label, 0.0) + amount
    worst = max(by_class.items(), key=lambda kv: kv[1])[0] if by_class else "unknown"
    return InfeasibleError(worst, by_class)


# ---------------------------------------------------------------------------
# Extraction


def _per_hour(model: UCModel, x: np.ndarray, kind: str, unit: str) -> np.ndarray:
    T = model.scenario.horizon
    return np.array([x[model.vid(kind, unit, t)] for t in range(T)])


def _dispatch_from_x(model: UCModel, x: np.ndarray, objective: float) -> DispatchSolution:
    sc = model.scenario
    T = sc.horizon
    gen_p = {g.id: _per_hour(model, x, V_P, g.id) for g in sc.generators}
    gen_pfr = {g.id: _per_hour(model, x, V_PFRG, g.id) for g in sc.generators}
    gen_commit = {g.id: _per_hour(model, x, V_Y, g.id) for g in sc.generators}
    res_p = {r.id: _per_hour(model, x, V_PRES, r.id) for r in sc.res_units}
    sto_charge = {s.id: _per_hour(model, x, V_PCHA, s.id) for s in sc.storage_units}
    sto_discharge = {s.id: _per_hour(model, x, V_PDIS, s.id) for s in sc.storage_units}
    sto_cha_mode = {s.id: _per_hour(model, x, V_YCHA, s.id) for s in sc.storage_units}
    sto_dis_mode = {s.id: _per_hour(model, x, V_YDIS, s.id) for s in sc.storage_units}
    sto_soc = {s.id: _per_hour(model, x, V_E, s.id) for s in sc.storage_units}
    sto_pfr = {s.id: _per_hour(model, x, V_PFRS, s.id) for s in sc.storage_units}
    sto_efr = {s.id: _per_hour(model, x, V_EFRS, s.id) for s in sc.storage_units}
    sto_e0 = {s.id: float(x[model.vid(V_E0, s.id, -1)]) for s in sc.storage_units}

    # Aggregates are reported as their defining sums so they match exactly.
    inertia = np.zeros(T)
    for g in sc.generators:
        inertia += g.inertia_s * g.p_max_mw * gen_commit[g.id]
    for s in sc.storage_units:
        if s.inertia_s > 0:
            inertia += s.inertia_s * s.p_max_mw * (sto_cha_mode[s.id] + sto_dis_mode[s.id])
    pfr = sum((gen_pfr[g.id] for g in sc.generators), np.zeros(T))
    pfr = pfr + sum((sto_pfr[s.id] for s in sc.storage_units), np.zeros(T))
    efr = sum((sto_efr[s.id] for s in sc.storage_units), np.zeros(T))
    p_loss = np.array([x[model.vid(V_PLOSS, None, t)] for t in range(T)])

    return DispatchSolution(
        objective=objective,
        horizon=T,
        gen_p=gen_p,
        gen_pfr=gen_pfr,
        gen_commit=gen_commit,
        res_p=res_p,
        sto_charge=sto_charge,
        sto_discharge=sto_discharge,
        sto_cha_mode=sto_cha_mode,
        sto_dis_mode=sto_dis_mode,
        sto_soc=sto_soc,
        sto_pfr=sto_pfr,
        sto_efr=sto_efr,
        sto_e0=sto_e0,
        inertia_mws=inertia,
        pfr_mw=pfr,
        efr_mw=efr,
        p_loss_mw=p_loss,
    )


def _commitment_from_x(model: UCModel, x: np.ndarray) -> CommitmentSchedule:
    sc = model.scenario

    def rounded(kind, unit):
        vals = _per_hour(model, x, kind, unit)
        return np.rint(vals).astype(int)

    return CommitmentSchedule(
        gen_on={g.id: rounded(V_Y, g.id) for g in sc.generators},
        gen_start_up={g.id: rounded(V_YST, g.id) for g in sc.generators},
        gen_start_gen={g.id: rounded(V_YSG, g.id) for g in sc.generators},
        gen_shut_down={g.id: rounded(V_YSD, g.id) for g in sc.generators},
        sto_charging={s.id: rounded(V_YCHA, s.id) for s in sc.storage_units},
        sto_discharging={s.id: rounded(V_YDIS, s.id) for s in sc.storage_units},
    )


def _duals_from(
    model: UCModel,
    asm: _Assembled,
    out: lp.LpOutcome,
    cuts: list[NadirCut],
    opts: SolveOptions,
    stats: SolveStats,
) -> DualSolution:
    sc = model.scenario
    T = sc.horizon
    n_base_ub = asm.a_ub.shape[0]
    cut_marg = out.ub_marginals[n_base_ub:]
    base_marg = out.ub_marginals[:n_base_ub]

    z = lambda: np.zeros(T)
    lambda_e, lambda_h, lambda_pfr, lambda_efr = z(), z(), z(), z()
    mu_rocof, mu_qss, omega = z(), z(), z()
    mu1, mu2, mu3 = z(), z(), z()

    initial_rhs_term = 0.0
    as_payment_rhs = 0.0
    psi_mdt = {g.id: np.zeros(T) for g in sc.generators}

    for i, row in enumerate(asm.eq_rows):
        m = out.eq_marginals[i]
        if row.kind == K_BALANCE:
            lambda_e[row.t] = row.price_sign * m
        elif row.kind == K_HDEF:
            lambda_h[row.t] = row.price_sign * m
        elif row.kind == K_PFRDEF:
            lambda_pfr[row.t] = row.price_sign * m
        elif row.kind == K_EFRDEF:
            lambda_efr[row.t] = row.price_sign * m
        elif row.kind == K_COMMIT and row.rhs != 0.0:
            initial_rhs_term -= row.rhs * m
    for i, row in enumerate(asm.ub_rows):
        mu = -base_marg[i]
        if row.kind == K_ROCOF:
            mu_rocof[row.t] = mu
        elif row.kind == K_QSS:
            mu_qss[row.t] = mu
        elif row.kind == K_MAXLOSS:
            omega[row.t] += mu
            as_payment_rhs += row.rhs * mu
        elif row.kind == K_MDT:
            psi_mdt[row.unit][row.t] = mu
        elif row.kind == K_MUT and row.rhs != 0.0:
            # solved form kept the <= orientation; rhs constant is natural
            initial_rhs_term -= row.rhs * base_marg[i]
    for cut, m in zip(cuts, cut_marg):
        nu = -m
        mu1[cut.t] += nu * cut.a1
        mu2[cut.t] += nu * cut.a2
        mu3[cut.t] += nu

    psi_ub = {}
    psi_lb = {}
    for v in model.vardefs:
        if math.isfinite(v.ub):
            psi_ub[v.idx] = -out.upper_marginals[v.idx]
        if math.isfinite(v.lb):
            psi_lb[v.idx] = out.lower_marginals[v.idx]

    def ub_series(kind, unit):
        return np.array([psi_ub.get(model.vid(kind, unit, t), 0.0) for t in range(T)])

    def lb_series(kind, unit):
        return np.array([psi_lb.get(model.vid(kind, unit, t), 0.0) for t in range(T)])

    duals = DualSolution(
        lambda_e=lambda_e,
        lambda_h=lambda_h,
        lambda_pfr=lambda_pfr,
        lambda_efr=lambda_efr,
        mu_rocof=mu_rocof,
        mu_nadir_1=mu1,
        mu_nadir_2=mu2,
        mu_nadir_3=mu3,
        mu_qss=mu_qss,
        omega_loss=omega,
        psi_max_y={g.id: ub_series(V_Y, g.id) for g in sc.generators},
        psi_max_yst={g.id: ub_series(V_YST, g.id) for g in sc.generators},
        psi_max_ysg={g.id: ub_series(V_YSG, g.id) for g in sc.generators},
        psi_max_ysd={g.id: ub_series(V_YSD, g.id) for g in sc.generators},
        psi_mdt=psi_mdt,
        psi_cf={r.id: ub_series(V_PRES, r.id) for r in sc.res_units},
        psi_e_min={s.id: lb_series(V_E, s.id) for s in sc.storage_units},
        psi_e_max={s.id: ub_series(V_E, s.id) for s in sc.storage_units},
        psi_max_ycha={s.id: ub_series(V_YCHA, s.id) for s in sc.storage_units},
        psi_max_ydis={s.id: ub_series(V_YDIS, s.id) for s in sc.storage_units},
        psi_mutex=_mutex_duals(model, asm, base_marg),
        psi_ini=_scalar_row_duals(model, asm, base_marg, K_E0CAP),
        psi_end=_scalar_row_duals(model, asm, base_marg, K_EEND),
        initial_rhs_term=initial_rhs_term,
        as_payment_rhs=as_payment_rhs,
        dual_objective=_dual_objective(asm, out, cuts),
    )
    stats.max_cs_residual = _max_cs_residual(asm, out, cuts, model)
    scale = max(1.0, abs(out.objective))
    if stats.max_cs_residual > opts.duality_tol * scale:
        raise DualRecoveryError(
            f"complementary-slackness residual {stats.max_cs_residual:.3e} exceeds tolerance"
        )
    return duals


def _mutex_duals(model, asm, base_marg) -> dict[str, np.ndarray]:
    T = model.scenario.horizon
    res = {s.id: np.zeros(T) for s in model.scenario.storage_units}
    for i, row in enumerate(asm.ub_rows):
        if row.kind == K_MUTEX:
            res[row.unit][row.t] = -base_marg[i]
    return res


def _scalar_row_duals(model, asm, base_marg, kind) -> dict[str, float]:
    res = {}
    for i, row in enumerate(asm.ub_rows):
        if row.kind == kind:
            res[row.unit] = -base_marg[i]
    return res


def _dual_objective(asm: _Assembled, out: lp.LpOutcome, cuts) -> float:
    total = float(asm.b_eq @ out.eq_marginals) if len(asm.b_eq) else 0.0
    n_base = asm.a_ub.shape[0]
    if n_base:
        total += float(asm.b_ub @ out.ub_marginals[:n_base])
    # cut rows are homogeneous; bounds contribute their finite terms
    lb, ub = asm.lb, asm.ub
    fin = np.isfinite(lb)
    total += float(lb[fin] @ out.lower_marginals[fin])
    fin = np.isfinite(ub)
    total += float(ub[fin] @ out.upper_marginals[fin])
    return total


def _max_cs_residual(asm: _Assembled, out: lp.LpOutcome, cuts, model) -> float:
    x = out.x
    worst = 0.0
    if asm.a_eq.shape[0]:
        resid = asm.a_eq @ x - asm.b_eq
        worst = max(worst, float(np.max(np.abs(resid * out.eq_marginals))))
    n_base = asm.a_ub.shape[0]
    if n_base:
        slack = asm.b_ub - asm.a_ub @ x
        worst = max(worst, float(np.max(np.abs(slack * out.ub_marginals[:n_base]))))
    if len(cuts):
        cut_a = _cut_matrix(model, cuts)
        slack = -(cut_a @ x)
        worst = max(worst, float(np.max(np.abs(slack * out.ub_marginals[n_base:]))))
    fin = np.isfinite(asm.lb)
    worst = max(worst, float(np.max(np.abs((x - asm.lb)[fin] * out.lower_marginals[fin]), initial=0.0)))
    fin = np.isfinite(asm.ub)
    worst = max(worst, float(np.max(np.abs((asm.ub - x)[fin] * out.upper_marginals[fin]), initial=0.0)))
    return worst


def _verify_feasibility(asm: _Assembled, x: np.ndarray, tol: float) -> None:
    if asm.a_eq.shape[0]:
        resid = np.abs(asm.a_eq @ x - asm.b_eq) / np.maximum(1.0, np.abs(asm.b_eq))
        if resid.max() > tol:
            raise SolverError(f"equality residual {resid.max():.3e} above tolerance")
    if asm.a_ub.shape[0]:
        viol = (asm.a_ub @ x - asm.b_ub) / np.maximum(1.0, np.abs(asm.b_ub))
        if viol.max() > tol:
            raise SolverError(f"inequality violation {viol.max():.3e} above tolerance")


# ---------------------------------------------------------------------------
# Public solves


def solve_relaxed(
    model: UCModel, options: SolveOptions | None = None
) -> tuple[DispatchSolution, DualSolution, SolveStats]:
    """Solve the convex relaxation and recover the full dual vector.

    Guarantees on success: relative duality gap and per-row complementary
    slackness residual within ``options.duality_tol``.
    """
    if not model.relaxed:
        raise ValueError("solve_relaxed requires a model built with relaxed=True")
    opts = options or SolveOptions()
    stats = SolveStats()
    t0 = time.perf_counter()
    asm = _assemble(model)
    cuts = _initial_cuts(model)
    out = _oa_solve(model, asm, cuts, None, opts, stats)
    if out.status == lp.INFEASIBLE:
        raise _diagnose_infeasible(model, asm, cuts, None, opts)
    if out.status == lp.UNBOUNDED:
        raise UnboundedError("relaxed model is unbounded")
    if out.status != lp.OPTIMAL:
        raise SolverError(f"LP backend failure: {out.message}")
    _verify_feasibility(asm, out.x, opts.feas_tol)
    dispatch = _dispatch_from_x(model, out.x, out.objective)
    duals = _duals_from(model, asm, out, cuts, opts, stats)
    gap = abs(out.objective - duals.dual_objective) / max(1.0, abs(out.objective))
    stats.rel_duality_gap = gap
    stats.cuts = len(cuts)
    stats.wall_s = time.perf_counter() - t0
    if gap > opts.duality_tol:
        raise DualRecoveryError(f"relative duality gap {gap:.3e} exceeds tolerance")
    return dispatch, duals, stats


def _dangling_yst(model: UCModel) -> set[int]:
    # start-up indicators whose start-generating hour lies past the horizon;
    # they are unconstrained upward only and carry no cost, so they are
    # zeroed during extraction.
    T = model.scenario.horizon
    out = set()
    for g in model.scenario.generators:
        if g.start_up_h > 0:
            for t in range(max(0, T - g.start_up_h), T):
                out.add(model.vid(V_YST, g.id, t))
    return out


def _fractional(model, x, skip, tol) -> list[int]:
    bad = []
    for idx in model.binary_indices:
        if idx in skip:
            continue
        if min(x[idx], 1.0 - x[idx]) > tol:
            bad.append(idx)
    return bad


def _pick_branch_var(model: UCModel, x: np.ndarray, fractional: list[int]) -> int:
    branch_set = set(model.branch_indices)
    pool = [i for i in fractional if i in branch_set] or fractional
    # most fractional; ties by unit size descending, then index
    def key(idx):
        v = model.vardefs[idx]
        return (abs(x[idx] - 0.5), -v.branch_weight, idx)

    return min(pool, key=key)


def _heuristic_fix(model: UCModel, x: np.ndarray, tol: float) -> dict[int, tuple[float, float]] | None:
    """Round the relaxation up to a commitment pattern and fix all binaries."""
    sc = model.scenario
    T = sc.horizon
    patch: dict[int, tuple[float, float]] = {}
    for g in sc.generators:
        y_prev = model.initial_state.y0(g.id)
        y = [1 if x[model.vid(V_Y, g.id, t)] > tol else 0 for t in range(T)]
        for t in range(T):
            ysg = max(0, y[t] - (y[t - 1] if t else y_prev))
            ysd = max(0, (y[t - 1] if t else y_prev) - y[t])
            patch[model.vid(V_Y, g.id, t)] = (y[t], y[t])
            patch[model.vid(V_YSG, g.id, t)] = (ysg, ysg)
            patch[model.vid(V_YSD, g.id, t)] = (ysd, ysd)
        # start-up indicators consistent with the lead time
        yst = [0] * T
        for t in range(T):
            ysg_t = patch[model.vid(V_YSG, g.id, t)][0]
            if ysg_t:
                j = t - g.start_up_h
                if j < 0:
                    return None  # cannot start that early from a cold start
                yst[j] = 1
        for t in range(T):
            patch[model.vid(V_YST, g.id, t)] = (yst[t], yst[t])
    for s in sc.storage_units:
        for t in range(T):
            cha = x[model.vid(V_YCHA, s.id, t)]
            dis = x[model.vid(V_YDIS, s.id, t)]
            c = 1 if cha > tol and cha >= dis else 0
            d = 1 if dis > tol and dis > cha else 0
            patch[model.vid(V_YCHA, s.id, t)] = (c, c)
            patch[model.vid(V_YDIS, s.id, t)] = (d, d)
    return patch


def solve_mip(
    model: UCModel, rel_gap: float = 1e-6, options: SolveOptions | None = None
) -> tuple[CommitmentSchedule, DispatchSolution, SolveStats]:
    """Best-first branch-and-bound on the commitment binaries.

    Branches on the most fractional commitment variable (ties: unit size
    descending). Returns the incumbent with stats flagged when the node or
    time budget runs out before the gap is proven.
    """
    if model.relaxed:
        raise ValueError("solve_mip requires a model built with relaxed=False")
    opts = options or SolveOptions()
    stats = SolveStats()
    t0 = time.perf_counter()
    asm = _assemble(model)
    cuts = _initial_cuts(model)
    dangling = _dangling_yst(model)

    root = _oa_solve(model, asm, cuts, None, opts, stats)
    if root.status == lp.INFEASIBLE:
        raise _diagnose_infeasible(model, asm, cuts, None, opts)
    if root.status == lp.UNBOUNDED:
        raise UnboundedError("model is unbounded")
    if root.status != lp.OPTIMAL:
        raise SolverError(f"LP backend failure: {root.message}")

    incumbent: np.ndarray | None = None
    inc_obj = math.inf
    patch0 = _heuristic_fix(model, root.x, opts.integrality_tol)
    if patch0 is not None:
        try:
            h_out = _oa_solve(model, asm, cuts, patch0, opts, stats)
        except SolverError:
            h_out = None
        if h_out is not None and h_out.status == lp.OPTIMAL:
            incumbent, inc_obj = h_out.x.copy(), h_out.objective

    seq = 0
    heap: list[tuple[float, int, dict]] = [(root.objective, seq, {})]
    best_bound = root.objective
    budget_exhausted = False

    def threshold() -> float:
        return inc_obj - rel_gap * max(1.0, abs(inc_obj))

    while heap:
        bound, _, patch = heapq.heappop(heap)
        best_bound = bound
        if incumbent is not None and bound >= threshold():
            break
        if stats.nodes >= opts.max_nodes or (
            opts.time_limit_s is not None and time.perf_counter() - t0 > opts.time_limit_s
        ):
            budget_exhausted = True
            break
        stats.nodes += 1
        out = _oa_solve(model, asm, cuts, patch, opts, stats)
        if out.status != lp.OPTIMAL:
            continue
        if incumbent is not None and out.objective >= threshold():
            continue
        frac = _fractional(model, out.x, dangling, opts.integrality_tol)
        if not frac:
            if out.objective < inc_obj:
                incumbent, inc_obj = out.x.copy(), out.objective
            continue
        var = _pick_branch_var(model, out.x, frac)
        for val in (0.0, 1.0):
            seq += 1
            child = dict(patch)
            child[var] = (val, val)
            heapq.heappush(heap, (out.objective, seq, child))
    else:
        best_bound = inc_obj  # search space exhausted: proven optimal

    if heap and not budget_exhausted:
        best_bound = min(best_bound, heap[0][0])
    if incumbent is None:
        if budget_exhausted:
            raise SolverError("no integral solution found within the node/time budget")
        raise InfeasibleError("commitment logic (no integral commitment exists)")

    # polish: re-optimise the continuous dispatch with the binaries pinned to
    # their rounded values, so the returned point is cleanly feasible
    x = incumbent.copy()
    for idx in dangling:
        x[idx] = 0.0
    fixed = {idx: (round(x[idx]), round(x[idx])) for idx in model.binary_indices}
    polished = _oa_solve(model, asm, cuts, fixed, opts, stats)
    if polished.status == lp.OPTIMAL:
        x = polished.x
        inc_obj = polished.objective
    else:
        for idx in model.binary_indices:
            x[idx] = round(x[idx])
    stats.rel_mip_gap = max(0.0, (inc_obj - best_bound) / max(1.0, abs(inc_obj)))
    stats.budget_exhausted = budget_exhausted
    stats.cuts = len(cuts)
    stats.wall_s = time.perf_counter() - t0
    schedule = _commitment_from_x(model, x)
    dispatch = _dispatch_from_x(model, x, inc_obj)
    _check_schedule(model, schedule)
    return schedule, dispatch, stats


def _check_schedule(model: UCModel, sched: CommitmentSchedule) -> None:
    for g in model.scenario.generators:
        y = sched.gen_on[g.id]
        ysg = sched.gen_start_gen[g.id]
        ysd = sched.gen_shut_down[g.id]
        prev = model.initial_state.y0(g.id)
        for t in range(model.scenario.horizon):
            if y[t] != prev + ysg[t] - ysd[t]:
                raise SolverError(f"commitment transition identity violated for {g.id} at t={t}")
            prev = y[t]
    for s in model.scenario.storage_units:
        if np.any(sched.sto_charging[s.id] + sched.sto_discharging[s.id] > 1):
            raise SolverError(f"charge/discharge exclusivity violated for {s.id}")


def solve_fixed_binaries(
    model: UCModel, values: dict[int, int], options: SolveOptions | None = None
) -> tuple[float, DispatchSolution] | None:
    """Optimise the continuous dispatch for a fully fixed binary pattern.

    Returns None when the pattern is infeasible. Used by the exhaustive
    enumeration oracle and the heuristics; the nadir cone is enforced.
    """
    opts = options or SolveOptions()
    stats = SolveStats()
    asm = _assemble(model)
    cuts = _initial_cuts(model)
    patch = {idx: (float(v), float(v)) for idx, v in values.items()}
    out = _oa_solve(model, asm, cuts, patch, opts, stats)
    if out.status == lp.INFEASIBLE:
        return None
    if out.status != lp.OPTIMAL:
        raise SolverError(f"LP backend failure: {out.message}")
    return out.objective, _dispatch_from_x(model, out.x, out.objective)
