"""Thin wrapper around the HiGHS LP backend (scipy.optimize.linprog).

Marginal conventions (verified against scipy): every marginal is the
sensitivity of the optimal objective to the corresponding right-hand side or
bound. For a minimisation this means equality marginals are free-signed,
``A_ub x <= b_ub`` marginals are <= 0, lower-bound marginals >= 0 and
upper-bound marginals <= 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

OPTIMAL = 0
ITERATION_LIMIT = 1
INFEASIBLE = 2
UNBOUNDED = 3


@dataclass
class LpOutcome:
    status: int
    message: str
    objective: float
    x: np.ndarray | None
    eq_marginals: np.ndarray | None
    ub_marginals: np.ndarray | None
    lower_marginals: np.ndarray | None
    upper_marginals: np.ndarray | None
    iterations: int


def solve_lp(
    c: np.ndarray,
    a_eq: sparse.csr_matrix | None,
    b_eq: np.ndarray | None,
    a_ub: sparse.csr_matrix | None,
    b_ub: np.ndarray | None,
    lb: np.ndarray,
    ub: np.ndarray,
    feasibility_tol: float = 1e-9,
) -> LpOutcome:
    res = linprog(
        c,
        A_ub=a_ub if a_ub is not None and a_ub.shape[0] else None,
        b_ub=b_ub if b_ub is not None and len(b_ub) else None,
        A_eq=a_eq if a_eq is not None and a_eq.shape[0] else None,
        b_eq=b_eq if b_eq is not None and len(b_eq) else None,
        bounds=np.column_stack([lb, ub]),
        method="highs",
        options={
            "presolve": True,
            "primal_feasibility_tolerance": feasibility_tol,
            "dual_feasibility_tolerance": feasibility_tol,
        },
    )
    nit = int(res.nit) if res.nit is not None else 0
    if res.status != OPTIMAL:
        return LpOutcome(res.status, res.message, float("nan"), None, None, None, None, None, nit)
    return LpOutcome(
        status=OPTIMAL,
        message=res.message,
        objective=float(res.fun),
        x=np.asarray(res.x, dtype=float),
        eq_marginals=np.asarray(res.eqlin.marginals, dtype=float) if res.eqlin is not None else np.zeros(0),
        ub_marginals=np.asarray(res.ineqlin.marginals, dtype=float) if res.ineqlin is not None else np.zeros(0),
        lower_marginals=np.asarray(res.lower.marginals, dtype=float),
        upper_marginals=np.asarray(res.upper.marginals, dtype=float),
        iterations=nit,
    )
