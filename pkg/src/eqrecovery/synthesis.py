"""Robust estimator design: LP assembly, mu1 line search, certificates.

Error dynamics for sequence ``alpha`` in stacked form::

    xt = Theta w + Psi v + Xi xt0 + Upsilon s0 + H nu

with ``K = M + L``::

    Theta   = (I + H K C) Gamma W
    Psi     = (H K (I - C Gamma L) - Gamma L) V
    Xi      = (I + H K C) Phi
    Upsilon = A - Xi

With ``L`` and ``s0`` fixed, every matrix above is affine in ``(M, nu)``.
For box-bounded ``w``, ``v``, ``xt0`` the worst case of a row ``r`` is
``eta_w |Theta_r|_1 + eta_v |Psi_r|_1 + mu1 |Xi_r|_1 + |offset_r|``, which is
written into the LP with one epigraph variable per non-constant entry.

Row block ``d`` of ``xt`` only involves gain rows ``0..d-1``, i.e. the
length-``d`` event prefix, so each bound is emitted once per prefix-tree node
and shared by every sequence through that node.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import AllInfeasible, CertificateError, ConflictingZeroPattern
from .language import EventLanguage, PrefixTree, build_prefix_tree, event_matrix, language_to_dict
from .lp import LinearProgram, LPSolution, solve_lp, write_lp_text
from .model import StackedSystem, SystemModel, fingerprint, model_to_dict, stack_phi_gamma, stack_system
import scipy.sparse as sp

log = logging.getLogger(__name__)

__all__ = [
    "SynthesisOptions",
    "VariableLayout",
    "ResponseMatrices",
    "Certificate",
    "VerificationReport",
    "allocate_shared_variables",
    "apply_delay_pattern",
    "build_response",
    "gains_for_sequence",
    "RobustDesign",
    "assemble_robust_lp",
    "synthesize",
    "verify_certificate",
    "worst_case_profile",
    "closed_form_worst_case",
]


@dataclass
class SynthesisOptions:
    mu1_lo: float | None = None
    mu1_hi: float | None = None
    grid: int = 40
    refine: int = 20
    fixed_mu1: float | None = None
    weight_mu1: float = 1.0
    # scalar, or array of shape (n_sequences, T + 1)
    weights_mu2: float | np.ndarray = 1.0
    L_blocks: list | None = None
    s0: np.ndarray | None = None
    workers: int = 1
    lp_dump: str | None = None
    tol: float = 1e-9

    def mu1_grid(self, model: SystemModel) -> np.ndarray:
        if self.fixed_mu1 is not None:
            return np.array([float(self.fixed_mu1)])
        scale = model.eta_v if model.eta_w == 0 else model.eta_w + model.eta_v
        lo = self.mu1_lo if self.mu1_lo is not None else 1e-3 * scale
        hi = self.mu1_hi if self.mu1_hi is not None else 1e2 * scale
        if hi <= 0:
            return np.array([0.0])
        if self.grid < 2:
            raise ValueError("mu1 grid needs at least 2 points")
        return np.linspace(lo, hi, self.grid)


# -- variable layout ---------------------------------------------------------


@dataclass
class VariableLayout:
    """Per-node gain variables.

    ``M_mask[node]`` is an ``n x Tp`` boolean array marking free entries of
    gain row block ``depth - 1``; ``L_on[node]`` says whether the on-time
    measurement of that step exists (so a fixed ``L`` block may act).
    Root (depth 0) owns nothing.
    """

    n: int
    p: int
    T: int
    M_mask: list[np.ndarray | None]
    L_on: list[bool]
    M_idx: list[np.ndarray | None] = field(default_factory=list)
    nu_idx: list[np.ndarray | None] = field(default_factory=list)
    n_gain_vars: int = 0

    def index(self, start: int = 0) -> "VariableLayout":
        """Assign consecutive LP column indices to free entries."""
        nxt = start
        self.M_idx, self.nu_idx = [], []
        for mask in self.M_mask:
            if mask is None:
                self.M_idx.append(None)
                self.nu_idx.append(None)
                continue
            idx = np.full(mask.shape, -1, dtype=np.int64)
            cnt = int(mask.sum())
            idx[mask] = np.arange(nxt, nxt + cnt)
            nxt += cnt
            self.M_idx.append(idx)
            self.nu_idx.append(np.arange(nxt, nxt + self.n))
            nxt += self.n
        self.n_gain_vars = nxt - start
        return self


def allocate_shared_variables(tree: PrefixTree, n: int, p: int) -> VariableLayout:
    """One gain row block per node of depth >= 1, causal entries only."""
    T = tree.T
    masks: list[np.ndarray | None] = []
    for node in tree.nodes:
        if node.depth == 0:
            masks.append(None)
            continue
        k = node.depth - 1
        mask = np.zeros((n, T * p), dtype=bool)
        mask[:, :(k + 1) * p] = True
        masks.append(mask)
    return VariableLayout(n, p, T, masks, [node.depth > 0 for node in tree.nodes])


def apply_delay_pattern(layout: VariableLayout, tree: PrefixTree, ev: EventLanguage) -> VariableLayout:
    """Remove gain entries for data not yet available (event-matrix zeros)."""
    p = layout.p
    E = [event_matrix(seq) for seq in ev.sequences]
    for node in tree.nodes:
        if node.depth == 0:
            continue
        k = node.depth - 1
        rows = {tuple(E[a][k]) for a in node.sequences}
        if len(rows) != 1:
            raise ConflictingZeroPattern(f"sequences {node.sequences} disagree on availability at step {k}")
        row = E[node.sequences[0]][k]
        for i in range(k + 1):
            if not row[i]:
                layout.M_mask[node.id][:, i * p:(i + 1) * p] = False
        layout.L_on[node.id] = bool(row[k])
    return layout


# -- response matrices -------------------------------------------------------


@dataclass
class ResponseMatrices:
    Theta: np.ndarray | None
    Psi: np.ndarray
    Xi: np.ndarray
    Upsilon: np.ndarray
    Phi: np.ndarray
    Gamma: np.ndarray


def build_response(model: SystemModel, M: np.ndarray, L: np.ndarray, stacked: StackedSystem | None = None) -> ResponseMatrices:
    """Evaluate the stacked error-response matrices for one gain triple."""
    S = stacked or stack_system(model)
    n, p, T = model.n, model.p, model.T
    if M.shape != (T * n, T * p) or L.shape != (T * n, T * p):
        raise ValueError(f"M and L must be {(T * n, T * p)}, got {M.shape} and {L.shape}")
    L_blocks = [L[k * n:(k + 1) * n, k * p:(k + 1) * p] for k in range(T)]
    Phi, Gamma = stack_phi_gamma(model, L_blocks)
    K = M + L
    I_x = np.eye((T + 1) * n)
    F = I_x + S.H @ K @ S.C
    Theta = F @ Gamma @ S.W if S.W is not None else None
    Psi = (S.H @ K @ (np.eye(T * p) - S.C @ Gamma @ L) - Gamma @ L) @ S.V
    Xi = F @ Phi
    return ResponseMatrices(Theta, Psi, Xi, S.A - Xi, Phi, Gamma)


def closed_form_worst_case(model: SystemModel, resp: ResponseMatrices, mu1: float, nu: np.ndarray, s0: np.ndarray,
                           stacked: StackedSystem | None = None) -> np.ndarray:
    """Per-row maximum of |xt| over the noise and initial-error boxes."""
    S = stacked or stack_system(model)
    worst = mu1 * np.abs(resp.Xi).sum(axis=1) + model.eta_v * np.abs(resp.Psi).sum(axis=1)
    if resp.Theta is not None:
        worst += model.eta_w * np.abs(resp.Theta).sum(axis=1)
    worst += np.abs(S.H @ nu + resp.Upsilon @ s0)
    return worst


# -- LP assembly -------------------------------------------------------------


def _fixed_L(options: SynthesisOptions, model: SystemModel) -> list[np.ndarray]:
    if options.L_blocks is None:
        return [np.zeros((model.n, model.p)) for _ in range(model.T)]
    blocks = [np.asarray(b, dtype=float) for b in options.L_blocks]
    if len(blocks) != model.T or any(b.shape != (model.n, model.p) for b in blocks):
        raise ValueError(f"L_blocks must be {model.T} matrices of shape {(model.n, model.p)}")
    return blocks


class RobustDesign:
    """LP template for a fixed model, language and (L, s0); instantiate per mu1.

    The constraint matrix is ``A_base + mu1 * A_mu1`` and the right-hand side
    ``b_base - mu1 * b_mu1``; every other mu1 dependence is a variable bound.
    """

    def __init__(self, model: SystemModel, ev: EventLanguage, tree: PrefixTree | None = None,
                 options: SynthesisOptions | None = None):
        self.model = model
        self.ev = ev
        self.tree = tree or build_prefix_tree(ev)
        self.options = options or SynthesisOptions()
        self.stacked = stack_system(model)
        self.L_fixed = _fixed_L(self.options, model)
        n, T = model.n, model.T
        self.s0 = np.zeros(n) if self.options.s0 is None else np.asarray(self.options.s0, dtype=float).reshape(n)
        layout = allocate_shared_variables(self.tree, n, model.p)
        self.layout = apply_delay_pattern(layout, self.tree, ev).index(0)

        self._c: list[float] = [0.0] * self.layout.n_gain_vars
        self._lb: list[float] = [-np.inf] * self.layout.n_gain_vars
        self._ub: list[float] = [np.inf] * self.layout.n_gain_vars
        self.names = self._gain_names()
        self._rows_base: list[tuple[np.ndarray, np.ndarray]] = []
        self._rows_mu1: list[tuple[np.ndarray, np.ndarray]] = []
        self._rhs_base: list[float] = []
        self._rhs_mu1: list[float] = []

        self.bound_var = [self._var(f"b_n{nd.id}", 0.0) for nd in self.tree.nodes]
        for node in self.tree.nodes:
            self._emit_node(node)

        w = self.options.weights_mu2
        W = np.broadcast_to(np.asarray(w, dtype=float), (len(ev), T + 1))
        if np.any(W < 0) or self.options.weight_mu1 < 0:
            raise ValueError("cost weights must be non-negative")
        self.mu2_var = np.zeros((len(ev), T + 1), dtype=np.int64)
        for a in range(len(ev)):
            for k in range(T + 1):
                j = self._var(f"mu2_a{a}_k{k}", 0.0, cost=float(W[a, k]))
                self.mu2_var[a, k] = j
                self._row([self.bound_var[self.tree.paths[a][k]], j], [1.0, -1.0], 0.0)
        self._terminal = [self.bound_var[nd.id] for nd in self.tree.at_depth(T)]
        self._freeze()

    # helpers
    def _var(self, name, lb, ub=np.inf, cost=0.0):
        self._c.append(cost)
        self._lb.append(lb)
        self._ub.append(ub)
        self.names.append(name)
        return len(self._c) - 1

    def _row(self, cols, vals, rhs, mu1_cols=(), mu1_vals=(), rhs_mu1=0.0):
        self._rows_base.append((np.asarray(cols, dtype=np.int64), np.asarray(vals, dtype=float)))
        self._rows_mu1.append((np.asarray(mu1_cols, dtype=np.int64), np.asarray(mu1_vals, dtype=float)))
        self._rhs_base.append(float(rhs))
        self._rhs_mu1.append(float(rhs_mu1))

    def _gain_names(self):
        names = [""] * self.layout.n_gain_vars
        for nid, (mi, ni) in enumerate(zip(self.layout.M_idx, self.layout.nu_idx)):
            if mi is None:
                continue
            for (r, c), j in np.ndenumerate(mi):
                if j >= 0:
                    names[j] = f"M_n{nid}_{r}_{c}"
            for r, j in enumerate(ni):
                names[j] = f"nu_n{nid}_{r}"
        return names

    def _path_affine(self, node):
        """Affine forms of block row ``node.depth`` of Theta, Psi, Xi and the offset."""
        model, S, lay = self.model, self.stacked, self.layout
        n, p, T = model.n, model.p, model.T
        d = node.depth
        path = self.tree.paths[node.sequences[0]][1:d + 1]
        L_path = [np.zeros((n, p)) for _ in range(T)]
        for j, nid in enumerate(path):
            if lay.L_on[nid]:
                L_path[j] = self.L_fixed[j]
        Phi, Gamma = stack_phi_gamma(model, L_path)
        Ls = np.zeros((T * n, T * p))
        for j in range(T):
            Ls[j * n:(j + 1) * n, j * p:(j + 1) * p] = L_path[j]
        sl = slice(d * n, (d + 1) * n)
        Hd = S.H[sl]

        G_xi = S.C @ Phi
        G_psi = (np.eye(T * p) - S.C @ Gamma @ Ls) @ S.V
        const_xi = Phi[sl] + Hd @ Ls @ G_xi
        const_psi = Hd @ Ls @ G_psi - (Gamma @ Ls @ S.V)[sl]
        G_theta = const_theta = None
        if S.W is not None:
            G_theta = S.C @ Gamma @ S.W
            const_theta = (Gamma @ S.W)[sl] + Hd @ Ls @ G_theta

        cols = []
        blocks = []  # (j, bs, cs) per path node
        for j, nid in enumerate(path):
            bs, cs = np.nonzero(lay.M_idx[nid] >= 0)
            blocks.append((j, bs, cs, lay.M_idx[nid][bs, cs]))
            cols.append(lay.M_idx[nid][bs, cs])
        m_cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
        nu_cols = np.concatenate([lay.nu_idx[nid] for nid in path]) if path else np.zeros(0, dtype=np.int64)

        def coef(G):
            out = np.zeros((n, G.shape[1], m_cols.size))
            pos = 0
            for j, bs, cs, _ in blocks:
                Hdj = Hd[:, j * n:(j + 1) * n]
                out[:, :, pos:pos + bs.size] = Hdj[:, bs][:, None, :] * G[cs, :].T[None, :, :]
                pos += bs.size
            return out

        coef_xi = coef(G_xi)
        coef_psi = coef(G_psi)
        coef_theta = coef(G_theta) if G_theta is not None else None

        # offset = H nu + A s0 - Xi s0
        off_const = S.A[sl] @ self.s0 - const_xi @ self.s0
        off_m = -np.einsum("aqv,q->av", coef_xi, self.s0)
        off_nu = np.concatenate([Hd[:, j * n:(j + 1) * n] for j in range(d)], axis=1) if d else np.zeros((n, 0))
        return {
            "m_cols": m_cols, "nu_cols": nu_cols,
            "xi": (const_xi, coef_xi), "psi": (const_psi, coef_psi),
            "theta": (const_theta, coef_theta) if coef_theta is not None else None,
            "off": (off_const, off_m, off_nu),
        }

    def _emit_node(self, node):
        aff = self._path_affine(node)
        m_cols, nu_cols = aff["m_cols"], aff["nu_cols"]
        model = self.model
        b = self.bound_var[node.id]
        terms = [("psi", model.eta_v, False), ("xi", 1.0, True)]
        if aff["theta"] is not None:
            terms.insert(0, ("theta", model.eta_w, False))
        off_const, off_m, off_nu = aff["off"]
        for a in range(model.n):
            base_c, base_v = [], []
            mu_c, mu_v = [], []
            const_abs = 0.0
            const_abs_mu1 = 0.0
            for key, scale, is_mu1 in terms:
                if scale == 0.0:
                    continue
                const, cf = aff[key]
                for q in range(const.shape[1]):
                    row_coef = cf[a, q]
                    nz = np.nonzero(row_coef)[0]
                    if nz.size == 0:
                        if is_mu1:
                            const_abs_mu1 += abs(const[a, q])
                        else:
                            const_abs += scale * abs(const[a, q])
                        continue
                    t = self._var(f"t_{key}_n{node.id}_{a}_{q}", 0.0)
                    c_idx = m_cols[nz]
                    self._row(np.append(c_idx, t), np.append(row_coef[nz], -1.0), -const[a, q])
                    self._row(np.append(c_idx, t), np.append(-row_coef[nz], -1.0), const[a, q])
                    if is_mu1:
                        mu_c.append(t)
                        mu_v.append(1.0)
                    else:
                        base_c.append(t)
                        base_v.append(scale)
            om = off_m[a]
            nz_m = np.nonzero(om)[0]
            on = off_nu[a]
            nz_n = np.nonzero(on)[0]
            off_cols = np.concatenate([m_cols[nz_m], nu_cols[nz_n]])
            off_vals = np.concatenate([om[nz_m], on[nz_n]])
            for sign in (1.0, -1.0):
                cols = np.concatenate([np.asarray(base_c, dtype=np.int64), off_cols, [b]])
                vals = np.concatenate([np.asarray(base_v), sign * off_vals, [-1.0]])
                self._row(cols, vals, -const_abs - sign * off_const[a], mu_c, mu_v, const_abs_mu1)

    def _freeze(self):
        nv = len(self._c)

        def mat(rows):
            lens = [len(c) for c, _ in rows]
            r = np.repeat(np.arange(len(rows)), lens)
            cols = np.concatenate([c for c, _ in rows]) if rows else np.zeros(0, dtype=np.int64)
            vals = np.concatenate([v for _, v in rows]) if rows else np.zeros(0)
            return sp.csr_matrix((vals, (r, cols)), shape=(len(rows), nv))

        self.A_base = mat(self._rows_base)
        self.A_mu1 = mat(self._rows_mu1)
        self.b_base = np.array(self._rhs_base)
        self.b_mu1 = np.array(self._rhs_mu1)
        self.c = np.array(self._c)
        self.lb = np.array(self._lb)
        self.ub = np.array(self._ub)
        del self._rows_base, self._rows_mu1

    @property
    def n_vars(self) -> int:
        return self.c.size

    def lp(self, mu1: float) -> LinearProgram:
        if mu1 < 0:
            raise ValueError("mu1 must be >= 0")
        lb = self.lb.copy()
        ub = self.ub.copy()
        lb[self.mu2_var.ravel()] = mu1
        ub[self._terminal] = mu1
        A = (self.A_base + mu1 * self.A_mu1).tocsr()
        return LinearProgram(
            c=self.c.copy(), A_ub=A, b_ub=self.b_base - mu1 * self.b_mu1,
            A_eq=sp.csr_matrix((0, self.n_vars)), b_eq=np.zeros(0),
            lb=lb, ub=ub, names=list(self.names), c0=self.options.weight_mu1 * mu1,
        )

    def node_gains(self, x: np.ndarray) -> list[dict | None]:
        """Per-node gain blocks read from an LP solution vector."""
        out: list[dict | None] = []
        for node in self.tree.nodes:
            if node.depth == 0:
                out.append(None)
                continue
            idx = self.layout.M_idx[node.id]
            M_row = np.zeros(idx.shape)
            M_row[idx >= 0] = x[idx[idx >= 0]]
            k = node.depth - 1
            L = self.L_fixed[k].copy() if self.layout.L_on[node.id] else np.zeros_like(self.L_fixed[k])
            out.append({"M": M_row, "L": L, "nu": x[self.layout.nu_idx[node.id]].copy()})
        return out


def assemble_robust_lp(model: SystemModel, ev: EventLanguage, mu1: float,
                       options: SynthesisOptions | None = None, tree: PrefixTree | None = None) -> LinearProgram:
    return RobustDesign(model, ev, tree, options).lp(mu1)


# -- certificate ---------------------------------------------------------------


def gains_for_sequence(node_gains, tree: PrefixTree, alpha: int, n: int, p: int):
    """Stack (M, L, nu) for a sequence from its path through the tree."""
    T = tree.T
    M = np.zeros((T * n, T * p))
    L = np.zeros((T * n, T * p))
    nu = np.zeros(T * n)
    for k in range(T):
        g = node_gains[tree.paths[alpha][k + 1]]
        M[k * n:(k + 1) * n] = g["M"]
        L[k * n:(k + 1) * n, k * p:(k + 1) * p] = g["L"]
        nu[k * n:(k + 1) * n] = g["nu"]
    return M, L, nu


@dataclass
class Certificate:
    mu1: float
    mu2: np.ndarray                 # (n_sequences, T + 1)
    node_gains: list[dict | None]   # indexed by tree node id
    objective: float
    ev: EventLanguage
    tree: PrefixTree
    s0: np.ndarray
    n: int
    p: int
    model_fingerprint: str
    language_fingerprint: str
    solver: dict = field(default_factory=dict)
    grid_table: list[dict] = field(default_factory=list)

    @property
    def T(self) -> int:
        return self.tree.T

    def gains(self, alpha: int):
        return gains_for_sequence(self.node_gains, self.tree, alpha, self.n, self.p)

    @property
    def max_mu2(self) -> float:
        return float(self.mu2.max())


def model_fingerprint(model: SystemModel) -> str:
    return fingerprint(model_to_dict(model))


def language_fingerprint(ev: EventLanguage) -> str:
    return fingerprint({"T": ev.T, "words": [list(w) for w in ev.words]})


def _solve_point(args):
    design, mu1 = args
    lp = design.lp(mu1)
    sol = solve_lp(lp, tol=design.options.tol)
    return mu1, sol


def _run_grid(design: RobustDesign, grid, workers: int) -> list[tuple[float, LPSolution]]:
    if workers > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_solve_point, [(design, float(m)) for m in grid]))
    return [_solve_point((design, float(m))) for m in grid]


def synthesize(model: SystemModel, ev: EventLanguage, options: SynthesisOptions | None = None,
               tree: PrefixTree | None = None) -> Certificate:
    """Line search over mu1; at each grid point the design problem is an LP."""
    options = options or SynthesisOptions()
    if ev.T != model.T:
        raise ValueError(f"language horizon {ev.T} differs from model horizon {model.T}")
    design = RobustDesign(model, ev, tree, options)
    log.info("LP template: %d variables, %d rows", design.n_vars, design.A_base.shape[0])
    grid = options.mu1_grid(model)
    results = _run_grid(design, grid, options.workers)
    if options.fixed_mu1 is None and len(grid) > 1 and options.refine > 0:
        best = _best(results)
        if best is not None:
            i = int(np.argmin(np.abs(grid - best[0])))
            lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
            fine = np.linspace(lo, hi, options.refine)
            known = {float(m) for m, _ in results}
            results += _run_grid(design, [m for m in fine if float(m) not in known], options.workers)
    table = [{"mu1": float(m), "status": s.status, "J": s.objective} for m, s in sorted(results, key=lambda r: r[0])]
    best = _best(results)
    if best is None:
        raise AllInfeasible("no mu1 in the search range admits a feasible design", table)
    mu1, sol = best
    x = sol.x
    if options.lp_dump:
        write_lp_text(design.lp(mu1), options.lp_dump)
    mu2 = x[design.mu2_var]
    # the LP only guarantees mu2 >= max(mu1, worst); clip solver noise below mu1
    mu2 = np.maximum(mu2, mu1)
    cert = Certificate(
        mu1=float(mu1), mu2=mu2, node_gains=design.node_gains(x), objective=float(sol.objective),
        ev=ev, tree=design.tree, s0=design.s0.copy(), n=model.n, p=model.p,
        model_fingerprint=model_fingerprint(model), language_fingerprint=language_fingerprint(ev),
        solver={"backend": "highs-ds", "n_vars": design.n_vars, "n_rows": int(design.A_base.shape[0]),
                "primal_residual": sol.primal_residual, "duality_gap": sol.duality_gap,
                "grid_points": len(table)},
        grid_table=table,
    )
    return cert


def _best(results):
    ok = [(m, s) for m, s in results if s.ok]
    if not ok:
        return None
    jmin = min(s.objective for _, s in ok)
    return min(((m, s) for m, s in ok if s.objective <= jmin + 1e-9), key=lambda r: r[0])


# -- verification --------------------------------------------------------------


@dataclass
class VerificationReport:
    ok: bool
    violations: list[dict]
    structural: list[str]
    min_slack: float
    rows_checked: int

    def summary(self) -> str:
        if self.ok:
            return f"PASS: {self.rows_checked} rows, min slack {self.min_slack:.3e}"
        lines = [f"FAIL: {len(self.violations)} bound violations, {len(self.structural)} structural errors"]
        for v in self.violations:
            lines.append(f"  alpha={v['alpha']} step={v['step']} row={v['row']} worst={v['worst']:.9g} "
                         f"bound={v['bound']:.9g} margin={v['margin']:.3e}")
        lines.extend(f"  {s}" for s in self.structural)
        return "\n".join(lines)


def verify_certificate(model: SystemModel, cert: Certificate, tol: float = 1e-6) -> VerificationReport:
    """Re-evaluate every bound in closed form from the stored gains."""
    if cert.model_fingerprint != model_fingerprint(model):
        raise CertificateError("certificate was synthesized for a different model")
    if cert.language_fingerprint != language_fingerprint(cert.ev):
        raise CertificateError("certificate language fingerprint mismatch")
    n, p, T = model.n, model.p, model.T
    S = stack_system(model)
    violations, structural = [], []
    min_slack = np.inf
    rows = 0
    if cert.mu1 < 0:
        structural.append(f"mu1={cert.mu1} is negative")
    if np.any(cert.mu2 < cert.mu1 - tol):
        structural.append("some mu2 entries are below mu1")
    for a, seq in enumerate(cert.ev.sequences):
        M, L, nu = cert.gains(a)
        E = event_matrix(seq)
        for k in range(T):
            for i in range(T):
                blk = M[k * n:(k + 1) * n, i * p:(i + 1) * p]
                lblk = L[k * n:(k + 1) * n, i * p:(i + 1) * p]
                if (i > k or not E[k, i]) and np.any(blk != 0):
                    structural.append(f"alpha={a}: M block ({k},{i}) must be zero (data unavailable)")
                if (i != k or not E[k, i]) and np.any(lblk != 0):
                    structural.append(f"alpha={a}: L block ({k},{i}) must be zero")
        resp = build_response(model, M, L, S)
        worst = closed_form_worst_case(model, resp, cert.mu1, nu, cert.s0, S)
        for r, wv in enumerate(worst):
            k = r // n
            bounds = [("mu2", cert.mu2[a, k])] + ([("mu1", cert.mu1)] if k == T else [])
            for label, bound in bounds:
                rows += 1
                slack = bound - wv
                min_slack = min(min_slack, slack)
                if slack < -tol:
                    violations.append({"alpha": a, "step": k, "row": r % n, "kind": label,
                                       "worst": float(wv), "bound": float(bound), "margin": float(slack)})
    # prefix sharing: identical leading blocks for sequences sharing a prefix
    for node in cert.tree.nodes:
        if node.depth == 0 or len(node.sequences) < 2:
            continue
        i = node.depth
        ref = cert.gains(node.sequences[0])
        for b in node.sequences[1:]:
            other = cert.gains(b)
            if not (np.array_equal(ref[0][:i * n, :i * p], other[0][:i * n, :i * p])
                    and np.array_equal(ref[1][:i * n, :i * p], other[1][:i * n, :i * p])
                    and np.array_equal(ref[2][:i * n], other[2][:i * n])):
                structural.append(f"sequences {node.sequences[0]} and {b} share a length-{i} prefix but differ in gains")
    ok = not violations and not structural
    return VerificationReport(ok, violations, structural, float(min_slack), rows)


def worst_case_profile(model: SystemModel, cert: Certificate, alpha: int) -> np.ndarray:
    """Largest per-component worst-case error at each step ``0..T``."""
    M, L, nu = cert.gains(alpha)
    resp = build_response(model, M, L)
    worst = closed_form_worst_case(model, resp, cert.mu1, nu, cert.s0)
    return worst.reshape(model.T + 1, model.n).max(axis=1)
