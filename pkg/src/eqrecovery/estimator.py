"""Online execution of a synthesized estimator.

Per step ``k``::

    u_e      = nu_k + sum_{i arrived} M_(k,i) zt_i
    xhat_k+1 = A_k xhat_k + B_k u_k - u_e
    s_k+1    = A_k s_k + u_e + L_k zt_k          (L term only for on-time z_k)

where ``zt_i = z_i - C_i (xhat_i + s_i)`` is evaluated with the step-``i``
values at the moment ``z_i`` arrives and then frozen.  Gains are read from the
prefix-tree node matching the arrival pattern seen so far.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import CertificateError, DuplicateArrival, PatternOutsideLanguage, StepBeyondHorizon
from .language import PrefixNode, event_index_from_availability, prefix_resolve
from .model import SystemModel
from .synthesis import Certificate, model_fingerprint, verify_certificate

__all__ = ["Estimator", "init_estimator"]


class Estimator:
    def __init__(self, model: SystemModel, cert: Certificate, xhat0, *, check: bool = True):
        if check:
            if cert.model_fingerprint != model_fingerprint(model):
                raise CertificateError("certificate does not belong to this model")
            report = verify_certificate(model, cert)
            if not report.ok:
                raise CertificateError("certificate failed verification:\n" + report.summary())
        self.model = model
        self.cert = cert
        self.k = 0
        self.xhat = np.asarray(xhat0, dtype=float).reshape(model.n).copy()
        self.s = np.asarray(cert.s0, dtype=float).copy()
        self.history: list[tuple[np.ndarray, np.ndarray]] = [(self.xhat.copy(), self.s.copy())]
        self.innovations: dict[int, np.ndarray] = {}
        self.arrived: set[int] = set()
        self.prefix: list[int] = []
        self.node: PrefixNode = cert.tree.root

    @property
    def T(self) -> int:
        return self.model.T

    def ingest(self, arrivals: Iterable[tuple[int, np.ndarray]] | dict) -> "Estimator":
        """Register measurements delivered at the current step."""
        if self.k >= self.T:
            raise StepBeyondHorizon("horizon exhausted; arrivals after T-1 are dropped by the caller")
        items = arrivals.items() if isinstance(arrivals, dict) else arrivals
        model = self.model
        for i, z in items:
            i = int(i)
            if i > self.k or i < 0:
                raise PatternOutsideLanguage(f"measurement from step {i} cannot arrive at step {self.k}")
            if i in self.arrived:
                raise DuplicateArrival(f"measurement from step {i} already received")
            xh_i, s_i = self.history[i]
            z = np.asarray(z, dtype=float).reshape(model.p)
            self.innovations[i] = z - model.C[i] @ (xh_i + s_i)
            self.arrived.add(i)
        self._resolve()
        return self

    def _resolve(self):
        event = event_index_from_availability(self.k, self.arrived)
        self.prefix = self.prefix[:self.k] + [event.index]
        self.node = prefix_resolve(self.cert.tree, self.prefix)

    def step(self, u=None) -> np.ndarray:
        if self.k >= self.T:
            raise StepBeyondHorizon(f"cannot step past the horizon T={self.T}")
        if len(self.prefix) <= self.k:
            self._resolve()
        model, k, n, p = self.model, self.k, self.model.n, self.model.p
        u = np.zeros(model.m) if u is None else np.asarray(u, dtype=float).reshape(model.m)
        g = self.cert.node_gains[self.node.id]
        u_e = g["nu"].copy()
        for i in sorted(self.arrived):
            u_e += g["M"][:, i * p:(i + 1) * p] @ self.innovations[i]
        xhat = model.A[k] @ self.xhat + model.B[k] @ u - u_e
        s = model.A[k] @ self.s + u_e
        if k in self.arrived:
            s += g["L"] @ self.innovations[k]
        self.xhat, self.s = xhat, s
        self.k += 1
        self.history.append((xhat.copy(), s.copy()))
        return xhat

    def current_bound(self) -> float:
        """Guaranteed infinity-norm error bound at the current step."""
        if self.k >= self.T:
            return self.cert.mu1
        return float(max(self.cert.mu2[a, self.k] for a in self.node.sequences))

    def consistent_sequences(self) -> tuple[int, ...]:
        return self.node.sequences


def init_estimator(model: SystemModel, cert: Certificate, xhat0, check: bool = True) -> Estimator:
    return Estimator(model, cert, xhat0, check=check)
