"""Cost allocation for the hourly AS market as an airport game.

The coalition cost rule is C(M) = max of the members' stand-alone costs
(C(empty) = 0), which makes the game concave-free ("airport problem") and
admits closed forms: the sequential (telescoping) Shapley value and the
inductive nucleolus recursion over cost-identical groups. Both closed forms
are paired with independent brute-force oracles: full subset enumeration for
Shapley and a lexicographic sequence of LPs for the nucleolus.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog


class AllocationError(Exception):
    pass


@dataclass(frozen=True)
class AirportGame:
    """Players sorted ascending by stand-alone cost; ties by id."""

    players: tuple[tuple[str, float], ...]
    hour: int | None = None

    @classmethod
    def from_costs(cls, costs: dict[str, float] | list[tuple[str, float]], hour: int | None = None):
        items = list(costs.items()) if isinstance(costs, dict) else list(costs)
        for uid, w in items:
            if w < 0:
                raise AllocationError(f"negative stand-alone cost for {uid!r}: {w}")
        items.sort(key=lambda kv: (kv[1], kv[0]))
        return cls(players=tuple((u, float(w)) for u, w in items), hour=hour)

    @property
    def n(self) -> int:
        return len(self.players)

    @property
    def ids(self) -> list[str]:
        return [u for u, _ in self.players]

    @property
    def costs(self) -> np.ndarray:
        return np.array([w for _, w in self.players])

    @property
    def total(self) -> float:
        """Cost of the grand coalition: the largest stand-alone cost."""
        return self.players[-1][1] if self.players else 0.0


@dataclass
class NucleolusState:
    """One round of the inductive recursion."""

    iteration: int
    alpha: float
    split: int          # k_q: last group index assigned this round
    remaining: int      # unassigned unit count after the round


@dataclass
class Allocation:
    rule: str
    phi: dict[str, float]
    hour: int | None = None
    efficiency_gap: float = 0.0
    nucleolus_steps: tuple[NucleolusState, ...] = ()

    def vector(self, ids: list[str]) -> np.ndarray:
        return np.array([self.phi[u] for u in ids])


def _finalize(rule: str, game: AirportGame, phi: dict[str, float], hour=None, steps=()) -> Allocation:
    total = game.total
    paid = sum(phi.values())
    gap = abs(paid - total)
    if gap > 1e-9 * max(1.0, total):
        raise AllocationError(f"{rule}: allocations sum to {paid}, expected {total}")
    clean = {}
    for uid, v in phi.items():
        if v < -1e-9 * max(1.0, total):
            raise AllocationError(f"{rule}: negative charge {v} for {uid!r}")
        clean[uid] = max(float(v), 0.0)
    return Allocation(rule=rule, phi=clean, hour=hour, efficiency_gap=float(gap), nucleolus_steps=tuple(steps))


# ---------------------------------------------------------------------------
# Rules


def proportional(game: AirportGame) -> Allocation:
    """Each unit pays in proportion to its stand-alone cost."""
    costs = game.costs
    total = costs.sum()
    if game.n == 0 or game.total == 0.0:
        return Allocation(rule="proportional", phi={u: 0.0 for u in game.ids}, hour=game.hour)
    share = game.total / total
    phi = {u: w * share for (u, w) in game.players}
    return _finalize("proportional", game, phi, game.hour)


def shapley_airport(game: AirportGame) -> Allocation:
    """Telescoping closed form: each cost increment above the next-smaller
    player is shared equally by everyone at least that large."""
    n = game.n
    if n == 0:
        return Allocation(rule="shapley", phi={}, hour=game.hour)
    costs = game.costs
    increments = np.diff(costs, prepend=0.0)
    shares = increments / (n - np.arange(n))
    phi_sorted = np.cumsum(shares)
    phi = {u: float(v) for (u, _), v in zip(game.players, phi_sorted)}
    return _finalize("shapley", game, phi, game.hour)


def _coalition_costs(costs: np.ndarray) -> np.ndarray:
    """C(mask) = max member cost, vectorised over all 2^n coalitions."""
    n = len(costs)
    masks = np.arange(1 << n, dtype=np.int64)
    c = np.zeros(1 << n)
    for i in range(n):
        has = (masks >> i) & 1 == 1
        c[has] = np.maximum(c[has], costs[i])
    return c


def shapley_bruteforce(game: AirportGame, max_n: int = 12) -> Allocation:
    """Exact subset-weighted marginal-contribution sum (exponential)."""
    n = game.n
    if n > max_n:
        raise AllocationError(f"shapley_bruteforce: {n} players exceeds max_n={max_n}")
    if n == 0:
        return Allocation(rule="shapley_bruteforce", phi={}, hour=game.hour)
    costs = game.costs
    c = _coalition_costs(costs)
    masks = np.arange(1 << n, dtype=np.int64)
    sizes = np.zeros(1 << n, dtype=np.int64)
    for i in range(n):
        sizes += (masks >> i) & 1
    fact = [math.factorial(k) for k in range(n + 1)]
    weights = np.array([fact[k] * fact[n - k - 1] / fact[n] for k in range(n)])
    phi = {}
    for i, (uid, _) in enumerate(game.players):
        without = masks[(masks >> i) & 1 == 0]
        marg = c[without | (1 << i)] - c[without]
        phi[uid] = float(weights[sizes[without]] @ marg)
    return _finalize("shapley_bruteforce", game, phi, game.hour)


# ---------------------------------------------------------------------------
# Nucleolus


@dataclass(frozen=True)
class TypeGroup:
    cost: float
    members: tuple[str, ...]

    @property
    def count(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class TypedGroups:
    groups: tuple[TypeGroup, ...]

    @property
    def m(self) -> int:
        return len(self.groups)

    def counts(self) -> list[int]:
        return [g.count for g in self.groups]


def group_by_type(game: AirportGame, tol: float = 1e-9) -> TypedGroups:
    """Merge players whose costs agree within tol (relative, chained on the
    sorted sequence); the merged group cost is the band maximum."""
    groups: list[TypeGroup] = []
    members: list[str] = []
    cost = None
    for uid, w in game.players:
        if cost is not None and w - cost <= tol * max(1.0, w):
            members.append(uid)
            cost = max(cost, w)
        else:
            if members:
                groups.append(TypeGroup(cost=cost, members=tuple(members)))
            members = [uid]
            cost = w
    if members:
        groups.append(TypeGroup(cost=cost, members=tuple(members)))
    return TypedGroups(groups=tuple(groups))


def nucleolus_airport(groups: TypedGroups, hour: int | None = None) -> Allocation:
    """Inductive nucleolus for the airport game over cost-identical groups.

    Each round picks the excess level alpha_q minimising over the candidate
    split points; groups up to the split pay -alpha_q per member. When the
    split reaches the last or second-to-last group the allocation is
    complete, the final group absorbing the remainder exactly.
    """
    m = groups.m
    if m == 0:
        return Allocation(rule="nucleolus", phi={}, hour=hour)
    costs = [g.cost for g in groups.groups]
    if costs[-1] <= 0.0:
        raise AllocationError("nucleolus_airport requires at least one positive cost")
    counts = groups.counts()
    cum = np.cumsum(counts)  # l_k

    phi: dict[str, float] = {}
    steps: list[NucleolusState] = []
    assigned_total = 0.0
    k_prev = 0  # k_{q-1}; groups 1..k_prev already assigned (1-based)
    q = 0
    while k_prev < m - 1:
        q += 1
        best = math.inf
        best_k = None
        prior = cum[k_prev - 1] if k_prev else 0
        for k in range(k_prev + 1, m):  # k-terms over [k_q+1, m-1] (1-based)
            val = (costs[k - 1] - assigned_total) / (cum[k - 1] - prior + 1)
            if val < best - 1e-15:
                best = val
                best_k = k
        m_term = (costs[m - 1] - assigned_total) / (cum[m - 1] - prior)
        if m_term < best - 1e-15:
            best = m_term
            best_k = m
        assert best_k is not None and best_k > k_prev  # the split always advances
        alpha = -best
        for j in range(k_prev + 1, best_k + 1):
            g = groups.groups[j - 1]
            for uid in g.members:
                phi[uid] = best
            assigned_total += best * g.count
        remaining = int(cum[m - 1] - cum[best_k - 1])
        steps.append(NucleolusState(iteration=q, alpha=alpha, split=best_k, remaining=remaining))
        k_prev = best_k
        if k_prev >= m - 1:
            break
    if k_prev == m - 1:
        last = groups.groups[m - 1]
        share = (costs[m - 1] - assigned_total) / last.count
        for uid in last.members:
            phi[uid] = share
    return _finalize("nucleolus", AirportGame.from_costs(_expand(groups), hour), phi, hour, steps)


def _expand(groups: TypedGroups) -> list[tuple[str, float]]:
    return [(uid, g.cost) for g in groups.groups for uid in g.members]


def nucleolus(game: AirportGame, group_tol: float = 1e-9) -> Allocation:
    """Nucleolus of the airport game (grouping + recursion)."""
    return nucleolus_airport(group_by_type(game, group_tol), hour=game.hour)


# ---------------------------------------------------------------------------
# Lexicographic-LP nucleolus oracle


def _solve_small_lp(c, a_ub, b_ub, a_eq, b_eq):
    res = linprog(
        c,
        A_ub=a_ub if a_ub is not None and len(b_ub) else None,
        b_ub=b_ub if a_ub is not None and len(b_ub) else None,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=[(None, None)] * len(c),
        method="highs",
    )
    if res.status != 0:
        raise AllocationError(f"nucleolus oracle LP failed: {res.message}")
    return res


def nucleolus_lp_oracle(game: AirportGame, max_n: int = 8) -> Allocation:
    """Nucleolus by lexicographic minimisation of sorted coalition excesses.

    Each round minimises the worst remaining excess; the coalitions fixed at
    the optimum are those tight in EVERY optimal solution (positive duals,
    plus an auxiliary-LP check for the other tight candidates), i.e. the
    maximal tight set over the optimal face. Coalitions whose indicator rows
    become linearly dependent on the fixed system carry implied excesses and
    are retired, so every remaining round pins at least one new dimension.
    """
    n = game.n
    if n > max_n:
        raise AllocationError(f"nucleolus_lp_oracle: {n} players exceeds max_n={max_n}")
    if n == 0:
        return Allocation(rule="nucleolus_lp", phi={}, hour=game.hour)
    costs = game.costs
    if n == 1:
        return _finalize("nucleolus_lp", game, {game.ids[0]: float(costs[0])}, game.hour)
    scale = max(1.0, float(costs.max()))

    coal_cost = _coalition_costs(costs)
    full = (1 << n) - 1

    def members(mask):
        return np.array([(mask >> i) & 1 for i in range(n)], dtype=float)

    rows = {mask: members(mask) for mask in range(1, full)}

    fixed: dict[int, float] = {}
    free = set(rows)
    system = np.ones((1, n))  # efficiency row; grows with each fixed coalition

    def retire_implied():
        # rank-truncated orthonormal basis of the fixed row space
        _, s, vt = np.linalg.svd(system, full_matrices=False)
        basis = vt[s > 1e-10 * max(1.0, s[0])]
        for mask in sorted(free):
            row = rows[mask]
            resid = row - basis.T @ (basis @ row)
            if np.linalg.norm(resid) <= 1e-9 * math.sqrt(n):
                free.discard(mask)

    retire_implied()
    x = None
    for _ in range(n + 1):
        if not free:
            break
        free_list = sorted(free)
        a_ub = np.array([np.append(rows[mask], -1.0) for mask in free_list])
        b_ub = np.array([coal_cost[mask] for mask in free_list])
        a_eq = [np.append(np.ones(n), 0.0)]
        b_eq = [coal_cost[full]]
        for mask, level in fixed.items():
            a_eq.append(np.append(rows[mask], 0.0))
            b_eq.append(coal_cost[mask] + level)
        c = np.zeros(n + 1)
        c[-1] = 1.0
        res = _solve_small_lp(c, a_ub, b_ub, np.array(a_eq), np.array(b_eq))
        eps = float(res.x[-1])
        x = res.x[:n]

        excess = {mask: float(rows[mask] @ x - coal_cost[mask]) for mask in free_list}
        tight = [mask for mask in free_list if excess[mask] >= eps - 1e-7 * scale]
        duals = dict(zip(free_list, -res.ineqlin.marginals))
        forced = {mask for mask in tight if duals.get(mask, 0.0) > 1e-7}
        # remaining tight candidates: forced iff their excess cannot drop
        # below eps anywhere on the optimal face
        for mask in tight:
            if mask in forced:
                continue
            a_eq2 = np.vstack([a_eq, np.append(np.zeros(n), 1.0)])
            b_eq2 = np.append(b_eq, eps)
            obj = np.append(rows[mask], 0.0)
            res2 = _solve_small_lp(obj, a_ub, b_ub, a_eq2, b_eq2)
            if res2.fun >= coal_cost[mask] + eps - 1e-8 * scale:
                forced.add(mask)
        if not forced:
            # numerically flat round: pin the strongest dual to keep moving
            forced = {max(tight, key=lambda mask: duals.get(mask, 0.0))}
        for mask in forced:
            fixed[mask] = eps
            free.discard(mask)
            system = np.vstack([system, rows[mask]])
        if np.linalg.matrix_rank(system) >= n:
            break
        retire_implied()

    if np.linalg.matrix_rank(system) < n:
        raise AllocationError("nucleolus oracle failed to pin the allocation")
    rhs = np.array([coal_cost[full]] + [coal_cost[m] + lv for m, lv in fixed.items()])
    x, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    phi = {uid: float(x[i]) for i, uid in enumerate(game.ids)}
    return _finalize("nucleolus_lp", game, phi, game.hour)


# ---------------------------------------------------------------------------
# Core verification


@dataclass
class CoreReport:
    rule: str
    passed: bool
    efficiency_gap: float
    worst_ir_violation: float
    worst_coalition_excess: float
    worst_coalition: tuple[str, ...]
    coalitions_checked: int


def core_check(alloc: Allocation, game: AirportGame, tol: float = 1e-9) -> CoreReport:
    """Verify efficiency, individual and coalitional rationality over every
    coalition (2^n enumeration, n <= 20)."""
    n = game.n
    if n > 20:
        raise AllocationError(f"core_check: {n} players exceeds the 2^n enumeration limit (20)")
    costs = game.costs
    phi = alloc.vector(game.ids)
    scale = max(1.0, game.total)

    eff_gap = abs(float(phi.sum()) - game.total)
    ir = float(np.max(phi - costs)) if n else 0.0

    c = _coalition_costs(costs)
    masks = np.arange(1 << n, dtype=np.int64)
    paid = np.zeros(1 << n)
    for i in range(n):
        paid[(masks >> i) & 1 == 1] += phi[i]
    excess = paid - c
    excess[0] = -math.inf
    excess[-1] = -math.inf  # grand coalition covered by the efficiency check
    worst_idx = int(np.argmax(excess))
    worst = float(excess[worst_idx])
    coalition = tuple(game.ids[i] for i in range(n) if (worst_idx >> i) & 1)
    passed = eff_gap <= tol * scale and ir <= tol * scale and worst <= tol * scale
    return CoreReport(
        rule=alloc.rule,
        passed=passed,
        efficiency_gap=eff_gap,
        worst_ir_violation=ir,
        worst_coalition_excess=worst,
        worst_coalition=coalition,
        coalitions_checked=(1 << n) - 2,
    )


# ---------------------------------------------------------------------------
# Hourly driver


RULES = {
    "proportional": proportional,
    "shapley": shapley_airport,
    "nucleolus": nucleolus,
}


@dataclass
class AllocationSeries:
    rule: str
    per_hour: list[Allocation]
    by_unit: dict[str, float]
    by_technology: dict[str, float]


def allocate_hourly(standalone, rule: str, group_tol: float = 1e-9) -> AllocationSeries:
    """Apply a rule hour by hour to the stand-alone AS market sizes.

    Exact-zero players pay zero and are excluded from the game; dispatched
    units re-enter the output with a zero charge.
    """
    if rule not in RULES:
        raise AllocationError(f"unknown rule {rule!r}; expected one of {sorted(RULES)}")
    if rule == "nucleolus":
        fn = lambda g: nucleolus(g, group_tol)
    else:
        fn = RULES[rule]
    per_hour: list[Allocation] = []
    by_unit: dict[str, float] = {uid: 0.0 for uid in standalone.units()}
    for t in range(standalone.horizon):
        entries = standalone.per_hour(t)
        nonzero = [(u, w) for u, w in entries if w > 0.0]
        phi = {u: 0.0 for u, _ in entries}
        if nonzero:
            alloc = fn(AirportGame.from_costs(nonzero, hour=t))
            phi.update(alloc.phi)
            steps = alloc.nucleolus_steps
        else:
            steps = ()
        per_hour.append(Allocation(rule=rule, phi=phi, hour=t, nucleolus_steps=steps))
        for u, v in phi.items():
            by_unit[u] = by_unit.get(u, 0.0) + v
    by_tech: dict[str, float] = {}
    for uid, v in by_unit.items():
        tech = standalone.technology.get(uid, "unknown")
        by_tech[tech] = by_tech.get(tech, 0.0) + v
    return AllocationSeries(rule=rule, per_hour=per_hour, by_unit=by_unit, by_technology=by_tech)
