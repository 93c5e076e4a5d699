"""LTV plant data and horizon-stacked matrices.

Plant::

    x_{k+1} = A_k x_k + B_k u_k + W_k w_k
    z_k     = C_k x_k + V_k v_k,       ||w_k||_inf <= eta_w, ||v_k||_inf <= eta_v

Stacked quantities follow the block layout used throughout the package:
state-like vectors carry ``T + 1`` blocks (steps ``0..T``), input-like
vectors carry ``T`` blocks (steps ``0..T-1``).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ModelError

__all__ = [
    "SystemModel",
    "StackedSystem",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "stack_system",
    "stack_phi_gamma",
    "transition",
    "fingerprint",
]


@dataclass(frozen=True, eq=False)
class SystemModel:
    A: tuple[np.ndarray, ...]
    B: tuple[np.ndarray, ...]
    C: tuple[np.ndarray, ...]
    V: tuple[np.ndarray, ...]
    W: tuple[np.ndarray, ...] | None = None
    eta_w: float = 0.0
    eta_v: float = 0.0

    def __post_init__(self):
        T = len(self.A)
        if T < 1:
            raise ModelError("model needs at least one step")
        for name in ("B", "C", "V") + (("W",) if self.W is not None else ()):
            if len(getattr(self, name)) != T:
                raise ModelError(f"{name} has {len(getattr(self, name))} steps, expected {T}")
        n = self.A[0].shape[0]
        m = self.B[0].shape[1]
        p = self.C[0].shape[0]
        for k in range(T):
            _check(f"A_{k}", self.A[k], (n, n))
            _check(f"B_{k}", self.B[k], (n, m))
            _check(f"C_{k}", self.C[k], (p, n))
            _check(f"V_{k}", self.V[k], (p, p))
            if self.W is not None:
                _check(f"W_{k}", self.W[k], (n, n))
        if self.eta_w < 0 or self.eta_v < 0:
            raise ModelError("noise bounds must be non-negative")
        if self.W is None and self.eta_w != 0:
            raise ModelError("eta_w must be 0 when W is absent")

    @property
    def T(self) -> int:
        return len(self.A)

    @property
    def n(self) -> int:
        return self.A[0].shape[0]

    @property
    def m(self) -> int:
        return self.B[0].shape[1]

    @property
    def p(self) -> int:
        return self.C[0].shape[0]

    @property
    def has_process_noise(self) -> bool:
        return self.W is not None

    def is_time_invariant(self) -> bool:
        mats = [self.A, self.B, self.C, self.V] + ([self.W] if self.W is not None else [])
        return all(np.array_equal(seq[0], seq[k]) for seq in mats for k in range(self.T))

    def scaled(self, lam: float) -> "SystemModel":
        """Same plant with both noise bounds multiplied by ``lam``."""
        return SystemModel(self.A, self.B, self.C, self.V, self.W, self.eta_w * lam, self.eta_v * lam)


def _check(name, mat, shape):
    if mat.shape != shape:
        raise ModelError(f"{name} has shape {mat.shape}, expected {shape}")
    if not np.all(np.isfinite(mat)):
        raise ModelError(f"{name} has non-finite entries")


def _per_step(data, T, name):
    """Broadcast a single matrix over T steps, or validate a per-step list."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 2:
        return tuple(arr.copy() for _ in range(T))
    if arr.ndim == 3:
        if arr.shape[0] != T:
            raise ModelError(f"{name} lists {arr.shape[0]} steps, expected T={T}")
        return tuple(a.copy() for a in arr)
    raise ModelError(f"{name} must be a matrix or a list of T matrices")


def model_from_dict(d: dict) -> SystemModel:
    for key in ("T", "A", "C"):
        if key not in d:
            raise ModelError(f"model is missing field {key!r}")
    T = int(d["T"])
    try:
        A = _per_step(d["A"], T, "A")
        C = _per_step(d["C"], T, "C")
        n = A[0].shape[0]
        p = C[0].shape[0]
        B = _per_step(d["B"], T, "B") if "B" in d else tuple(np.zeros((n, 0)) for _ in range(T))
        V = _per_step(d["V"], T, "V") if "V" in d else tuple(np.eye(p) for _ in range(T))
        W = _per_step(d["W"], T, "W") if d.get("W") is not None else None
    except ValueError as exc:
        if isinstance(exc, ModelError):
            raise
        raise ModelError(f"malformed matrix data: {exc}") from exc
    model = SystemModel(A, B, C, V, W, float(d.get("eta_w", 0.0)), float(d.get("eta_v", 0.0)))
    for key, val in (("n", model.n), ("m", model.m), ("p", model.p)):
        if key in d and int(d[key]) != val:
            raise ModelError(f"declared {key}={d[key]} but matrices imply {val}")
    return model


def load_model(path: str | Path) -> SystemModel:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    return model_from_dict(d)


def model_to_dict(model: SystemModel) -> dict:
    def ser(seq):
        return [m.tolist() for m in seq]

    return {
        "n": model.n, "m": model.m, "p": model.p, "T": model.T,
        "A": ser(model.A), "B": ser(model.B), "C": ser(model.C),
        "W": ser(model.W) if model.W is not None else None,
        "V": ser(model.V), "eta_w": model.eta_w, "eta_v": model.eta_v,
    }


def fingerprint(obj: dict) -> str:
    """SHA-256 of the canonical JSON encoding."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def transition(mats: Sequence[np.ndarray], k: int, i: int) -> np.ndarray:
    """Product ``mats[k-1] @ ... @ mats[i]``; identity when ``k == i``."""
    out = np.eye(mats[0].shape[0])
    for j in range(i, k):
        out = mats[j] @ out
    return out


@dataclass(frozen=True, eq=False)
class StackedSystem:
    A: np.ndarray      # (T+1)n x n
    C: np.ndarray      # Tp x (T+1)n
    H: np.ndarray      # (T+1)n x Tn
    W: np.ndarray | None  # Tn x Tn
    V: np.ndarray      # Tp x Tp
    R_T: np.ndarray    # n x (T+1)n
    n: int
    p: int
    T: int


def _stack_products(mats: Sequence[np.ndarray]):
    """Return the free-response stack [I; M^1_0; ...; M^T_0] and the block-lower H-type matrix."""
    T = len(mats)
    n = mats[0].shape[0]
    free = np.zeros(((T + 1) * n, n))
    forced = np.zeros(((T + 1) * n, T * n))
    free[:n] = np.eye(n)
    for k in range(1, T + 1):
        free[k * n:(k + 1) * n] = mats[k - 1] @ free[(k - 1) * n:k * n]
        # block (k, i) = M^k_{i+1}; the new column i = k-1 is the identity
        forced[k * n:(k + 1) * n, :(k - 1) * n] = mats[k - 1] @ forced[(k - 1) * n:k * n, :(k - 1) * n]
        forced[k * n:(k + 1) * n, (k - 1) * n:k * n] = np.eye(n)
    return free, forced


def stack_system(model: SystemModel) -> StackedSystem:
    T, n, p = model.T, model.n, model.p
    A, H = _stack_products(model.A)
    C = np.zeros((T * p, (T + 1) * n))
    V = np.zeros((T * p, T * p))
    for k in range(T):
        C[k * p:(k + 1) * p, k * n:(k + 1) * n] = model.C[k]
        V[k * p:(k + 1) * p, k * p:(k + 1) * p] = model.V[k]
    W = None
    if model.W is not None:
        W = np.zeros((T * n, T * n))
        for k in range(T):
            W[k * n:(k + 1) * n, k * n:(k + 1) * n] = model.W[k]
    R_T = np.zeros((n, (T + 1) * n))
    R_T[:, T * n:] = np.eye(n)
    return StackedSystem(A, C, H, W, V, R_T, n, p, T)


def stack_phi_gamma(model: SystemModel, L_blocks: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Stacks of ``Phi_k = A_k - L_k C_k`` with the same layout as the A-stack and H."""
    T, n, p = model.T, model.n, model.p
    if len(L_blocks) != T:
        raise ModelError(f"expected {T} L blocks, got {len(L_blocks)}")
    phis = []
    for k, Lk in enumerate(L_blocks):
        Lk = np.asarray(Lk, dtype=float)
        if Lk.shape != (n, p):
            raise ModelError(f"L_{k} has shape {Lk.shape}, expected {(n, p)}")
        phis.append(model.A[k] - Lk @ model.C[k])
    return _stack_products(phis)
