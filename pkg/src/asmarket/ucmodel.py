"""Frequency-secured unit-commitment model builder.

Variables, rows and the per-hour nadir cones are registered with named kinds
so the solvers can assemble matrices, recover duals under the conventions the
pricing layer expects, and tag infeasibility certificates by constraint class.

Rows are stored in their natural orientation (sense '=', '<=' or '>=',
right-hand side as written); the solver normalises to <= internally and maps
marginals back so that every inequality multiplier is >= 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .scenario import Scenario

# Variable kinds
V_P = "p"                 # thermal output (MW)
V_Y = "y"                 # commitment state
V_YST = "y_st"            # start-up
V_YSG = "y_sg"            # start generating
V_YSD = "y_sd"            # shut down
V_PFRG = "pfr_gen"        # thermal PFR headroom (MW)
V_PRES = "p_res"          # RES output (MW)
V_PCHA = "p_cha"          # storage charge (MW)
V_PDIS = "p_dis"          # storage discharge (MW)
V_YCHA = "y_cha"          # charging state
V_YDIS = "y_dis"          # discharging state
V_E = "e"                 # state of charge (MWh)
V_E0 = "e0"               # pre-horizon state of charge (MWh)
V_PFRS = "pfr_sto"        # storage PFR headroom (MW)
V_EFRS = "efr_sto"        # storage EFR headroom (MW)
V_H = "h_sys"             # aggregate inertia (MWs)
V_PFRT = "pfr_sys"        # aggregate PFR (MW)
V_EFRT = "efr_sys"        # aggregate EFR (MW)
V_PLOSS = "p_loss"        # secured loss size (MW)

# Row kinds
K_BALANCE = "balance"
K_HDEF = "inertia_aggregation"
K_PFRDEF = "pfr_aggregation"
K_EFRDEF = "efr_aggregation"
K_ROCOF = "rocof"
K_QSS = "qss"
K_MAXLOSS = "max_loss"
K_NADIR_CUT = "nadir_cut"
K_COMMIT = "commitment_transition"
K_SGLINK = "startup_lead"
K_MDT = "min_down_time"
K_MUT = "min_up_time"
K_PMIN = "gen_min"
K_PMAX = "gen_max"
K_PFRCAP = "gen_pfr_cap"
K_PFRMARGIN = "gen_pfr_margin"
K_CHALO = "storage_charge_min"
K_CHAHI = "storage_charge_max"
K_DISLO = "storage_discharge_min"
K_DISHI = "storage_discharge_max"
K_SPFRCAP = "storage_pfr_cap"
K_SPFRMARGIN = "storage_pfr_margin"
K_EFRCAP = "storage_efr_cap"
K_EFRMARGIN = "storage_efr_margin"
K_MUTEX = "storage_mode_exclusion"
K_EDYN = "storage_energy_dynamics"
K_E0CAP = "storage_initial_energy"
K_EEND = "storage_final_energy"

INFEASIBILITY_LABELS = {
    K_BALANCE: "energy balance",
    K_ROCOF: "RoCoF",
    K_QSS: "quasi-steady-state",
    K_MAXLOSS: "max loss",
    K_NADIR_CUT: "nadir",
}


@dataclass(frozen=True)
class FixedProfile:
    """Loss rule with the secured loss fixed by parameter, one value per hour."""

    p_mw: tuple[float, ...]

    @classmethod
    def constant(cls, value: float, horizon: int) -> "FixedProfile":
        return cls(p_mw=(float(value),) * horizon)


@dataclass(frozen=True)
class EndogenousMax:
    """Loss rule tracking the largest dispatched loss-eligible unit."""


LossRule = FixedProfile | EndogenousMax


@dataclass(frozen=True)
class InitialState:
    """Pre-horizon block for hour-1 transition and storage rows.

    Defaults: every generator off, storage at its e_ini. History sums before
    the horizon start are treated as zero.
    """

    gen_on: dict[str, int] = field(default_factory=dict)
    storage_e0_mwh: dict[str, float] = field(default_factory=dict)

    def y0(self, gen_id: str) -> int:
        return int(self.gen_on.get(gen_id, 0))

    def e0(self, storage, default_attr: str = "e_ini_mwh") -> float:
        return float(self.storage_e0_mwh.get(storage.id, getattr(storage, default_attr)))


@dataclass
class VarDef:
    idx: int
    kind: str
    unit: str | None
    t: int
    lb: float
    ub: float
    cost: float = 0.0
    binary: bool = False
    branch_weight: float = 0.0  # unit p_max; tie-break for branching


@dataclass
class RowDef:
    name: str
    kind: str
    sense: str  # '=', '<=', '>='
    rhs: float
    coeffs: list[tuple[int, float]]
    unit: str | None = None
    t: int = -1
    price_sign: int = 1  # equality rows: reported dual = price_sign * (d obj / d rhs)


@dataclass
class ConeDef:
    t: int
    idx_h: int
    idx_efr: int
    idx_pfr: int
    idx_ploss: int


class ModelError(Exception):
    pass


@dataclass
class UCModel:
    scenario: Scenario
    loss_rule: LossRule
    relaxed: bool
    initial_state: InitialState
    vardefs: list[VarDef]
    rows: list[RowDef]
    cones: list[ConeDef]
    var_index: dict[tuple[str, str | None, int], int]

    @property
    def n_vars(self) -> int:
        return len(self.vardefs)

    def vid(self, kind: str, unit: str | None, t: int) -> int:
        return self.var_index[(kind, unit, t)]

    def rows_of_kind(self, kind: str) -> list[RowDef]:
        return [r for r in self.rows if r.kind == kind]

    @property
    def branch_indices(self) -> list[int]:
        return [v.idx for v in self.vardefs if v.binary and v.kind in (V_Y, V_YCHA, V_YDIS)]

    @property
    def binary_indices(self) -> list[int]:
        return [v.idx for v in self.vardefs if v.binary]


def build_uc(
    scenario: Scenario,
    loss_rule: LossRule,
    relaxed: bool,
    initial_state: InitialState | None = None,
) -> UCModel:
    """Assemble the frequency-secured UC (mixed-integer form or its relaxation).

    The relaxed build replaces every binary with a [0, 1] box whose bound
    multipliers are the psi duals used by the pricing layer; the structure is
    otherwise identical.
    """
    scenario.check()
    T = scenario.horizon
    if not scenario.all_units:
        raise ModelError("empty fleet: scenario has no units")
    if isinstance(loss_rule, FixedProfile) and len(loss_rule.p_mw) != T:
        raise ModelError(
            f"loss profile length {len(loss_rule.p_mw)} does not match horizon {T}"
        )
    if isinstance(loss_rule, EndogenousMax) and not any(
        u.loss_eligible for u in scenario.all_units
    ):
        raise ModelError("EndogenousMax requires at least one loss-eligible unit")
    init = initial_state or InitialState()

    vardefs: list[VarDef] = []
    index: dict[tuple[str, str | None, int], int] = {}

    def add_var(kind, unit, t, lb, ub, cost=0.0, binary=False, weight=0.0) -> int:
        idx = len(vardefs)
        vardefs.append(
            VarDef(idx, kind, unit, t, lb, ub, cost, binary and not relaxed, weight)
        )
        index[(kind, unit, t)] = idx
        return idx

    for g in scenario.generators:
        lam_y = g.inertia_offer_gbp_per_mws * g.p_max_mw * g.inertia_s
        for t in range(T):
            add_var(V_P, g.id, t, 0.0, float("inf"), g.energy_offer_gbp_per_mwh)
            add_var(V_Y, g.id, t, 0.0, 1.0, lam_y, binary=True, weight=g.p_max_mw)
            add_var(V_YST, g.id, t, 0.0, 1.0, 0.0, binary=True, weight=g.p_max_mw)
            add_var(V_YSG, g.id, t, 0.0, 1.0, 0.0, binary=True, weight=g.p_max_mw)
            add_var(V_YSD, g.id, t, 0.0, 1.0, 0.0, binary=True, weight=g.p_max_mw)
            pfr_ub = float("inf") if g.pfr_max_mw > 0 else 0.0
            add_var(V_PFRG, g.id, t, 0.0, pfr_ub, g.pfr_offer_gbp_per_mw)
    for r in scenario.res_units:
        for t in range(T):
            add_var(V_PRES, r.id, t, 0.0, r.cf[t] * r.p_max_mw, r.energy_offer_gbp_per_mwh)
    for s in scenario.storage_units:
        lam_ys = s.inertia_offer_gbp_per_mws * s.p_max_mw * s.inertia_s
        for t in range(T):
            add_var(V_PCHA, s.id, t, 0.0, float("inf"))
            add_var(V_PDIS, s.id, t, 0.0, float("inf"), s.energy_offer_gbp_per_mwh)
            add_var(V_YCHA, s.id, t, 0.0, 1.0, lam_ys, binary=True, weight=s.p_max_mw)
            add_var(V_YDIS, s.id, t, 0.0, 1.0, lam_ys, binary=True, weight=s.p_max_mw)
            add_var(V_E, s.id, t, s.e_min_mwh, s.e_max_mwh)
            pfr_ub = float("inf") if s.pfr_max_mw > 0 else 0.0
            efr_ub = float("inf") if s.efr_max_mw > 0 else 0.0
            add_var(V_PFRS, s.id, t, 0.0, pfr_ub, s.pfr_offer_gbp_per_mw)
            add_var(V_EFRS, s.id, t, 0.0, efr_ub, s.efr_offer_gbp_per_mw)
        add_var(V_E0, s.id, -1, 0.0, float("inf"))
    ploss_lb = float("-inf")
    for t in range(T):
        add_var(V_H, None, t, float("-inf"), float("inf"))
        add_var(V_PFRT, None, t, float("-inf"), float("inf"))
        add_var(V_EFRT, None, t, float("-inf"), float("inf"))
        add_var(V_PLOSS, None, t, ploss_lb, float("inf"))

    rows: list[RowDef] = []
    cones: list[ConeDef] = []

    def add_row(name, kind, sense, rhs, coeffs, unit=None, t=-1, price_sign=1):
        rows.append(RowDef(name, kind, sense, float(rhs), coeffs, unit, t, price_sign))

    vid = lambda k, u, t: index[(k, u, t)]

    # --- thermal private constraints
    for g in scenario.generators:
        y0 = init.y0(g.id)
        for t in range(T):
            y = vid(V_Y, g.id, t)
            yst = vid(V_YST, g.id, t)
            ysg = vid(V_YSG, g.id, t)
            ysd = vid(V_YSD, g.id, t)
            p = vid(V_P, g.id, t)

            # y_t = y_{t-1} + y_sg - y_sd
            coeffs = [(y, 1.0), (ysg, -1.0), (ysd, 1.0)]
            rhs = float(y0) if t == 0 else 0.0
            if t > 0:
                coeffs.append((vid(V_Y, g.id, t - 1), -1.0))
            add_row(f"commit[{g.id},{t}]", K_COMMIT, "=", rhs, coeffs, g.id, t)

            # start generating lags the start-up decision by start_up_h
            if t >= g.start_up_h:
                link = [(ysg, 1.0)]
                if g.start_up_h > 0:
                    link.append((vid(V_YST, g.id, t - g.start_up_h), -1.0))
                else:
                    link.append((yst, -1.0))
                add_row(f"sg_link[{g.id},{t}]", K_SGLINK, "=", 0.0, link, g.id, t)
            else:
                add_row(f"sg_link[{g.id},{t}]", K_SGLINK, "=", 0.0, [(ysg, 1.0)], g.id, t)

            # min down time: y_st + y_{t-1} + sum y_sd over the trailing
            # window <= 1 (window ends at t-1; including t would forbid
            # the shutdown transition itself)
            mdt = [(yst, 1.0)]
            rhs = 1.0
            if t > 0:
                mdt.append((vid(V_Y, g.id, t - 1), 1.0))
            else:
                rhs -= y0
            for j in range(max(0, t - g.min_down_h), t):
                mdt.append((vid(V_YSD, g.id, j), 1.0))
            add_row(f"mdt[{g.id},{t}]", K_MDT, "<=", rhs, mdt, g.id, t)

            # min up time: y_sd - y_{t-1} + sum y_sg over trailing window <= 0
            mut = [(ysd, 1.0)]
            rhs = 0.0
            if t > 0:
                mut.append((vid(V_Y, g.id, t - 1), -1.0))
            else:
                rhs += y0
            for j in range(max(0, t - g.min_up_h), t):
                mut.append((vid(V_YSG, g.id, j), 1.0))
            add_row(f"mut[{g.id},{t}]", K_MUT, "<=", rhs, mut, g.id, t)

            if g.p_msg_mw > 0:
                add_row(f"p_min[{g.id},{t}]", K_PMIN, "<=", 0.0, [(y, g.p_msg_mw), (p, -1.0)], g.id, t)
            add_row(f"p_max[{g.id},{t}]", K_PMAX, "<=", 0.0, [(p, 1.0), (y, -g.p_max_mw)], g.id, t)
            if g.pfr_max_mw > 0:
                pfr = vid(V_PFRG, g.id, t)
                add_row(f"pfr_cap[{g.id},{t}]", K_PFRCAP, "<=", 0.0, [(pfr, 1.0), (y, -g.pfr_max_mw)], g.id, t)
                add_row(
                    f"pfr_margin[{g.id},{t}]", K_PFRMARGIN, "<=", 0.0,
                    [(pfr, 1.0), (p, 1.0), (y, -g.p_max_mw)], g.id, t,
                )

    # --- storage private constraints
    for s in scenario.storage_units:
        e0 = vid(V_E0, s.id, -1)
        for t in range(T):
            pcha = vid(V_PCHA, s.id, t)
            pdis = vid(V_PDIS, s.id, t)
            ycha = vid(V_YCHA, s.id, t)
            ydis = vid(V_YDIS, s.id, t)
            e = vid(V_E, s.id, t)

            prev = e0 if t == 0 else vid(V_E, s.id, t - 1)
            add_row(
                f"e_dyn[{s.id},{t}]", K_EDYN, "=", 0.0,
                [(e, 1.0), (prev, -1.0), (pcha, -s.eta_charge), (pdis, 1.0 / s.eta_discharge)],
                s.id, t,
            )
            if s.p_msg_mw > 0:
                add_row(f"cha_min[{s.id},{t}]", K_CHALO, "<=", 0.0, [(ycha, s.p_msg_mw), (pcha, -1.0)], s.id, t)
                add_row(f"dis_min[{s.id},{t}]", K_DISLO, "<=", 0.0, [(ydis, s.p_msg_mw), (pdis, -1.0)], s.id, t)
            add_row(f"cha_max[{s.id},{t}]", K_CHAHI, "<=", 0.0, [(pcha, 1.0), (ycha, -s.p_max_mw)], s.id, t)
            add_row(f"dis_max[{s.id},{t}]", K_DISHI, "<=", 0.0, [(pdis, 1.0), (ydis, -s.p_max_mw)], s.id, t)
            if s.pfr_max_mw > 0:
                pfr = vid(V_PFRS, s.id, t)
                add_row(
                    f"s_pfr_cap[{s.id},{t}]", K_SPFRCAP, "<=", 0.0,
                    [(pfr, 1.0), (ycha, -s.pfr_max_mw), (ydis, -s.pfr_max_mw)], s.id, t,
                )
                add_row(
                    f"s_pfr_margin[{s.id},{t}]", K_SPFRMARGIN, "<=", 0.0,
                    [(pfr, 1.0), (ydis, -s.p_max_mw), (pdis, 1.0), (pcha, -1.0)], s.id, t,
                )
            if s.efr_max_mw > 0:
                efr = vid(V_EFRS, s.id, t)
                add_row(
                    f"efr_cap[{s.id},{t}]", K_EFRCAP, "<=", 0.0,
                    [(efr, 1.0), (ycha, -s.efr_max_mw), (ydis, -s.efr_max_mw)], s.id, t,
                )
                add_row(
                    f"efr_margin[{s.id},{t}]", K_EFRMARGIN, "<=", 0.0,
                    [(efr, 1.0), (ycha, -s.p_max_mw), (ydis, -s.p_max_mw), (pdis, 1.0), (pcha, -1.0)],
                    s.id, t,
                )
            add_row(f"mode[{s.id},{t}]", K_MUTEX, "<=", 1.0, [(ycha, 1.0), (ydis, 1.0)], s.id, t)
        add_row(f"e_ini[{s.id}]", K_E0CAP, "<=", init.e0(s), [(e0, 1.0)], s.id, 0)
        add_row(
            f"e_end[{s.id}]", K_EEND, ">=", s.e_end_mwh, [(vid(V_E, s.id, T - 1), 1.0)], s.id, T - 1
        )

    # --- system-wide constraints
    params = scenario.params
    rocof_coef = params.f0_hz / (2.0 * params.rocof_max_hz_per_s)
    for t in range(T):
        h = vid(V_H, None, t)
        pfrt = vid(V_PFRT, None, t)
        efrt = vid(V_EFRT, None, t)
        ploss = vid(V_PLOSS, None, t)

        bal = [(vid(V_P, g.id, t), 1.0) for g in scenario.generators]
        bal += [(vid(V_PRES, r.id, t), 1.0) for r in scenario.res_units]
        for s in scenario.storage_units:
            bal += [(vid(V_PDIS, s.id, t), 1.0), (vid(V_PCHA, s.id, t), -1.0)]
        add_row(f"balance[{t}]", K_BALANCE, "=", scenario.demand_mw[t], bal, None, t, price_sign=1)

        hdef = [(h, 1.0)]
        hdef += [
            (vid(V_Y, g.id, t), -g.inertia_s * g.p_max_mw)
            for g in scenario.generators
            if g.inertia_s > 0
        ]
        for s in scenario.storage_units:
            if s.inertia_s > 0:
                hdef += [
                    (vid(V_YCHA, s.id, t), -s.inertia_s * s.p_max_mw),
                    (vid(V_YDIS, s.id, t), -s.inertia_s * s.p_max_mw),
                ]
        add_row(f"h_def[{t}]", K_HDEF, "=", 0.0, hdef, None, t, price_sign=-1)

        pdef = [(pfrt, 1.0)]
        pdef += [(vid(V_PFRG, g.id, t), -1.0) for g in scenario.generators if g.pfr_max_mw > 0]
        pdef += [(vid(V_PFRS, s.id, t), -1.0) for s in scenario.storage_units if s.pfr_max_mw > 0]
        add_row(f"pfr_def[{t}]", K_PFRDEF, "=", 0.0, pdef, None, t, price_sign=-1)

        edef = [(efrt, 1.0)]
        edef += [(vid(V_EFRS, s.id, t), -1.0) for s in scenario.storage_units if s.efr_max_mw > 0]
        add_row(f"efr_def[{t}]", K_EFRDEF, "=", 0.0, edef, None, t, price_sign=-1)

        if isinstance(loss_rule, FixedProfile):
            add_row(
                f"max_loss[{t}]", K_MAXLOSS, ">=", loss_rule.p_mw[t], [(ploss, 1.0)], None, t
            )
        else:
            for u in scenario.generators:
                if u.loss_eligible:
                    add_row(
                        f"max_loss[{u.id},{t}]", K_MAXLOSS, "<=", 0.0,
                        [(vid(V_P, u.id, t), 1.0), (ploss, -1.0)], u.id, t,
                    )
            for u in scenario.res_units:
                if u.loss_eligible:
                    add_row(
                        f"max_loss[{u.id},{t}]", K_MAXLOSS, "<=", 0.0,
                        [(vid(V_PRES, u.id, t), 1.0), (ploss, -1.0)], u.id, t,
                    )
            for u in scenario.storage_units:
                if u.loss_eligible:
                    add_row(
                        f"max_loss[{u.id},{t}]", K_MAXLOSS, "<=", 0.0,
                        [(vid(V_PDIS, u.id, t), 1.0), (ploss, -1.0)], u.id, t,
                    )

        add_row(
            f"rocof[{t}]", K_ROCOF, ">=", 0.0, [(h, 1.0), (ploss, -rocof_coef)], None, t
        )
        add_row(
            f"qss[{t}]", K_QSS, ">=", 0.0,
            [(efrt, 1.0), (pfrt, 1.0), (ploss, -1.0)], None, t,
        )
        cones.append(ConeDef(t=t, idx_h=h, idx_efr=efrt, idx_pfr=pfrt, idx_ploss=ploss))

    model = UCModel(
        scenario=scenario,
        loss_rule=loss_rule,
        relaxed=relaxed,
        initial_state=init,
        vardefs=vardefs,
        rows=rows,
        cones=cones,
        var_index=index,
    )
    _check_references(model)
    return model


def _check_references(model: UCModel) -> None:
    n = model.n_vars
    for row in model.rows:
        for idx, _ in row.coeffs:
            if not (0 <= idx < n):
                raise ModelError(f"row {row.name} references unregistered variable {idx}")
