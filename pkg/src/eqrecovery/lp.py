"""Sparse LP container, incremental builder and a HiGHS-backed solve."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

log = logging.getLogger(__name__)

__all__ = ["LinearProgram", "LPBuilder", "LPSolution", "solve_lp", "write_lp_text"]

OPTIMAL, INFEASIBLE, UNBOUNDED, FAILED = "optimal", "infeasible", "unbounded", "failed"


@dataclass
class LinearProgram:
    """``min c @ x + c0`` s.t. ``A_ub x <= b_ub``, ``A_eq x == b_eq``, ``lb <= x <= ub``."""

    c: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    names: list[str] = field(default_factory=list)
    c0: float = 0.0

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    def validate(self):
        n = self.n_vars
        for name, mat, rhs in (("A_ub", self.A_ub, self.b_ub), ("A_eq", self.A_eq, self.b_eq)):
            if mat.shape != (rhs.shape[0], n):
                raise ValueError(f"{name} has shape {mat.shape}, expected ({rhs.shape[0]}, {n})")
            if not np.all(np.isfinite(mat.data)) or not np.all(np.isfinite(rhs)):
                raise ValueError(f"{name} has non-finite entries")
        if self.lb.shape != (n,) or self.ub.shape != (n,):
            raise ValueError("bound vectors have the wrong length")
        if not np.all(np.isfinite(self.c)):
            raise ValueError("objective has non-finite entries")


class LPBuilder:
    def __init__(self):
        self._c: list[float] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self.names: list[str] = []
        self._ub_rows: list[tuple[np.ndarray, np.ndarray]] = []
        self._ub_rhs: list[float] = []
        self._eq_rows: list[tuple[np.ndarray, np.ndarray]] = []
        self._eq_rhs: list[float] = []
        self.c0 = 0.0

    @property
    def n_vars(self):
        return len(self._c)

    @property
    def n_ub(self):
        return len(self._ub_rhs)

    def add_var(self, name="", lb=0.0, ub=np.inf, cost=0.0) -> int:
        self._c.append(cost)
        self._lb.append(lb)
        self._ub.append(ub)
        self.names.append(name)
        return len(self._c) - 1

    def add_vars(self, count, prefix="", lb=0.0, ub=np.inf, cost=0.0) -> np.ndarray:
        start = self.n_vars
        for i in range(count):
            self.add_var(f"{prefix}{i}" if prefix else "", lb, ub, cost)
        return np.arange(start, start + count)

    def set_cost(self, idx, cost):
        self._c[idx] = cost

    def set_bounds(self, idx, lb=None, ub=None):
        if lb is not None:
            self._lb[idx] = lb
        if ub is not None:
            self._ub[idx] = ub

    def add_le(self, cols, vals, rhs) -> int:
        self._ub_rows.append((np.asarray(cols, dtype=np.int64), np.asarray(vals, dtype=float)))
        self._ub_rhs.append(float(rhs))
        return len(self._ub_rhs) - 1

    def add_eq(self, cols, vals, rhs) -> int:
        self._eq_rows.append((np.asarray(cols, dtype=np.int64), np.asarray(vals, dtype=float)))
        self._eq_rhs.append(float(rhs))
        return len(self._eq_rhs) - 1

    @staticmethod
    def _matrix(rows, n):
        if not rows:
            return sp.csr_matrix((0, n))
        lens = [len(c) for c, _ in rows]
        r = np.repeat(np.arange(len(rows)), lens)
        cols = np.concatenate([c for c, _ in rows])
        vals = np.concatenate([v for _, v in rows])
        return sp.csr_matrix((vals, (r, cols)), shape=(len(rows), n))

    def build(self) -> LinearProgram:
        n = self.n_vars
        return LinearProgram(
            c=np.array(self._c, dtype=float),
            A_ub=self._matrix(self._ub_rows, n),
            b_ub=np.array(self._ub_rhs, dtype=float),
            A_eq=self._matrix(self._eq_rows, n),
            b_eq=np.array(self._eq_rhs, dtype=float),
            lb=np.array(self._lb, dtype=float),
            ub=np.array(self._ub, dtype=float),
            names=list(self.names),
            c0=self.c0,
        )


@dataclass
class LPSolution:
    status: str
    x: np.ndarray | None
    objective: float | None
    primal_residual: float = np.nan
    duality_gap: float = np.nan
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def _residual(lp: LinearProgram, x: np.ndarray) -> float:
    res = [0.0]
    if lp.A_ub.shape[0]:
        res.append(np.max(lp.A_ub @ x - lp.b_ub))
    if lp.A_eq.shape[0]:
        res.append(np.max(np.abs(lp.A_eq @ x - lp.b_eq)))
    res.append(np.max(lp.lb - x, initial=0.0))
    res.append(np.max(x - lp.ub, initial=0.0))
    return float(max(res))


def _dual_objective(lp: LinearProgram, r) -> float:
    lb = np.where(np.isfinite(lp.lb), lp.lb, 0.0)
    ub = np.where(np.isfinite(lp.ub), lp.ub, 0.0)
    val = lp.b_ub @ r.ineqlin.marginals + lp.b_eq @ r.eqlin.marginals
    val += lb @ r.lower.marginals + ub @ r.upper.marginals
    return float(val) + lp.c0


def solve_lp(lp: LinearProgram, tol: float = 1e-9, time_limit: float | None = None) -> LPSolution:
    """Solve with HiGHS (dual simplex, deterministic single thread).

    Residual and duality gap are recomputed here from the returned point
    rather than trusted from the solver.
    """
    lp.validate()
    options = {
        "primal_feasibility_tolerance": tol,
        "dual_feasibility_tolerance": tol,
        "presolve": True,
    }
    if time_limit is not None:
        options["time_limit"] = time_limit
    bounds = np.column_stack([
        np.where(np.isfinite(lp.lb), lp.lb, -np.inf),
        np.where(np.isfinite(lp.ub), lp.ub, np.inf),
    ])
    r = linprog(
        lp.c,
        A_ub=lp.A_ub if lp.A_ub.shape[0] else None,
        b_ub=lp.b_ub if lp.A_ub.shape[0] else None,
        A_eq=lp.A_eq if lp.A_eq.shape[0] else None,
        b_eq=lp.b_eq if lp.A_eq.shape[0] else None,
        bounds=bounds,
        method="highs-ds",
        options=options,
    )
    if r.status == 2:
        return LPSolution(INFEASIBLE, None, None, message=r.message)
    if r.status == 3:
        return LPSolution(UNBOUNDED, None, None, message=r.message)
    if r.status != 0 or r.x is None:
        return LPSolution(FAILED, None, None, message=r.message)
    x = np.asarray(r.x)
    primal = float(lp.c @ x) + lp.c0
    resid = _residual(lp, x)
    gap = abs(primal - _dual_objective(lp, r)) / max(1.0, abs(primal))
    status = OPTIMAL
    if resid > 1e-7 or gap > 1e-7:
        log.warning("LP solution outside tolerance: residual=%.3g gap=%.3g", resid, gap)
        status = FAILED
    return LPSolution(status, x, primal, resid, gap, r.message)


def write_lp_text(lp: LinearProgram, path) -> None:
    """Dump in CPLEX LP format for cross-checking with external solvers."""

    def name(j):
        return lp.names[j] if j < len(lp.names) and lp.names[j] else f"x{j}"

    def terms(coefs):
        parts = []
        for j, v in coefs:
            sign = "-" if v < 0 else "+"
            parts.append(f"{sign} {abs(v):.17g} {name(j)}")
        text = " ".join(parts) or "0 x0"
        return text[2:] if text.startswith("+ ") else text

    with open(path, "w") as fh:
        fh.write("\\ objective constant %.17g\nMinimize\n obj: " % lp.c0)
        fh.write(terms([(j, v) for j, v in enumerate(lp.c) if v != 0]) + "\nSubject To\n")
        for label, mat, rhs, op in (("u", lp.A_ub, lp.b_ub, "<="), ("e", lp.A_eq, lp.b_eq, "=")):
            mat = mat.tocsr()
            for i in range(mat.shape[0]):
                row = mat.getrow(i)
                fh.write(f" {label}{i}: {terms(zip(row.indices, row.data))} {op} {rhs[i]:.17g}\n")
        fh.write("Bounds\n")
        for j in range(lp.n_vars):
            lo = "-inf" if not np.isfinite(lp.lb[j]) else f"{lp.lb[j]:.17g}"
            hi = "+inf" if not np.isfinite(lp.ub[j]) else f"{lp.ub[j]:.17g}"
            fh.write(f" {lo} <= {name(j)} <= {hi}\n")
        fh.write("End\n")
