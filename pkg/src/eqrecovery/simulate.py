"""Monte Carlo rollouts through a delay channel with bound auditing."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .estimator import Estimator
from .language import parse_word
from .model import SystemModel
from .synthesis import Certificate

VIOLATION_TOL = 1e-6

__all__ = [
    "DelayChannel",
    "SimulationTrace",
    "BatchStats",
    "sample_truncated_normal",
    "run_trial",
    "batch_run",
    "periodic_run",
    "export_trace",
    "read_trace",
    "export_batch",
]


def sample_truncated_normal(bound: float, count, seed=None) -> np.ndarray:
    """Zero-mean normal with sigma = bound / 5, rejected outside [-bound, bound].

    ``seed`` may be an int or a ``numpy.random.Generator`` (consumed in place).
    """
    if bound < 0:
        raise ValueError("bound must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    shape = (count,) if np.isscalar(count) else tuple(count)
    if bound == 0:
        return np.zeros(shape)
    out = rng.normal(0.0, bound / 5.0, size=shape)
    bad = np.abs(out) > bound
    while bad.any():
        out[bad] = rng.normal(0.0, bound / 5.0, size=int(bad.sum()))
        bad = np.abs(out) > bound
    return out


@dataclass(frozen=True)
class DelayChannel:
    word: tuple[int, ...]
    schedule: dict

    @classmethod
    def from_word(cls, word) -> "DelayChannel":
        word = parse_word(word)
        T = len(word)
        schedule: dict[int, list[int]] = {k: [] for k in range(T)}
        for i, d in enumerate(word):
            if i + d < T:
                schedule[i + d].append(i)
        return cls(word, {k: tuple(v) for k, v in schedule.items()})

    def arrivals_by(self, k: int) -> set[int]:
        return {i for step in range(k + 1) for i in self.schedule.get(step, ())}


@dataclass
class SimulationTrace:
    word: tuple[int, ...]
    seed: int | None
    x: np.ndarray          # (T+1, n)
    xhat: np.ndarray       # (T+1, n)
    bound: np.ndarray      # (T+1,)
    arrivals: list[tuple[int, ...]]   # per step 0..T (empty at T)
    events: list[int | None]          # per step; None at T
    w: np.ndarray
    v: np.ndarray
    xt0: np.ndarray

    @property
    def error(self) -> np.ndarray:
        return self.x - self.xhat

    @property
    def error_norm(self) -> np.ndarray:
        return np.abs(self.error).max(axis=1)

    @property
    def violations(self) -> np.ndarray:
        return self.error_norm > self.bound + VIOLATION_TOL

    @property
    def n_violations(self) -> int:
        return int(self.violations.sum())


def run_trial(model: SystemModel, cert: Certificate, word, seed=None, x0=None, u_sequence=None,
              xt0=None, noise_scale: float = 1.0, check: bool = False) -> SimulationTrace:
    """One rollout of plant, channel and estimator.

    Draw order from the seeded stream: initial error, then process noise,
    then measurement noise.  ``noise_scale = 0`` gives a noise-free run.
    """
    T, n, p = model.T, model.n, model.p
    channel = DelayChannel.from_word(word)
    if len(channel.word) != T:
        raise ValueError(f"word length {len(channel.word)} differs from horizon {T}")
    cert.ev.sequence_of_word(channel.word)
    rng = np.random.default_rng(seed)
    x0 = np.ones(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n)
    if u_sequence is None:
        u_sequence = np.zeros((T, model.m))
    u_sequence = np.asarray(u_sequence, dtype=float)
    if u_sequence.shape != (T, model.m):
        raise ValueError(f"input sequence must have shape {(T, model.m)}, got {u_sequence.shape}")
    drawn = sample_truncated_normal(cert.mu1, n, rng) * noise_scale
    xt0 = drawn if xt0 is None else np.asarray(xt0, dtype=float)
    w = sample_truncated_normal(model.eta_w, (T, n), rng) * noise_scale
    v = sample_truncated_normal(model.eta_v, (T, p), rng) * noise_scale

    est = Estimator(model, cert, x0 - xt0, check=check)
    xs = [x0]
    for k in range(T):
        xs.append(model.A[k] @ xs[k] + model.B[k] @ u_sequence[k]
                  + (model.W[k] @ w[k] if model.W is not None else 0.0))
    z = [model.C[k] @ xs[k] + model.V[k] @ v[k] for k in range(T)]

    xhat, bound, arrivals, events = [est.xhat.copy()], [], [], []
    for k in range(T):
        delivered = channel.schedule[k]
        est.ingest([(i, z[i]) for i in delivered])
        bound.append(est.current_bound())
        arrivals.append(delivered)
        events.append(est.prefix[k])
        xhat.append(est.step(u_sequence[k]))
    bound.append(est.current_bound())
    arrivals.append(())
    events.append(None)
    return SimulationTrace(channel.word, seed, np.array(xs), np.array(xhat), np.array(bound),
                           arrivals, events, w, v, xt0)


@dataclass
class BatchStats:
    word: tuple[int, ...]
    n_trials: int
    violation_count: int
    terminal_violations: int
    max_error: np.ndarray
    bound: np.ndarray
    traces: list[SimulationTrace] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "word": list(self.word), "n_trials": self.n_trials,
            "violation_count": self.violation_count, "terminal_violations": self.terminal_violations,
            "max_error": self.max_error.tolist(), "bound": self.bound.tolist(),
        }


def batch_run(model: SystemModel, cert: Certificate, word, n_trials: int, seed0: int = 0,
              x0=None, keep_traces: bool = True) -> BatchStats:
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    traces = [run_trial(model, cert, word, seed0 + t, x0=x0) for t in range(n_trials)]
    norms = np.array([tr.error_norm for tr in traces])
    bound = traces[0].bound
    terminal = int(sum(tr.error_norm[-1] > cert.mu1 + VIOLATION_TOL for tr in traces))
    return BatchStats(
        word=traces[0].word, n_trials=n_trials,
        violation_count=int(sum(tr.n_violations for tr in traces)),
        terminal_violations=terminal,
        max_error=norms.max(axis=0), bound=bound,
        traces=traces if keep_traces else [],
    )


def periodic_run(model: SystemModel, cert: Certificate, words: Sequence, seed=None, x0=None,
                 n_periods: int | None = None) -> list[SimulationTrace]:
    """Reuse one certificate across consecutive horizons.

    The state and the error at the end of a period seed the next one; each
    period's initial error is therefore inherited, not sampled.
    """
    words = list(words)
    if n_periods is not None:
        words = [words[i % len(words)] for i in range(n_periods)]
    rng = np.random.default_rng(seed)
    traces = []
    x = x0
    xt = None
    for word in words:
        sub_seed = int(rng.integers(2**63 - 1))
        tr = run_trial(model, cert, word, sub_seed, x0=x, xt0=xt)
        traces.append(tr)
        x = tr.x[-1]
        xt = tr.error[-1]
    return traces


def periodic_boundary_errors(traces: Sequence[SimulationTrace]) -> np.ndarray:
    return np.array([tr.error_norm[-1] for tr in traces])


_CSV_FMT = "{:.17g}"


def export_trace(trace: SimulationTrace, path, fmt: str = "csv") -> Path:
    path = Path(path)
    n = trace.x.shape[1]
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["k", "error_norm", "bound"] + [f"err_{i}" for i in range(n)] + ["arrivals", "event"])
            for k in range(len(trace.bound)):
                wr.writerow(
                    [k, _CSV_FMT.format(trace.error_norm[k]), _CSV_FMT.format(trace.bound[k])]
                    + [_CSV_FMT.format(e) for e in trace.error[k]]
                    + [";".join(str(i) for i in trace.arrivals[k]),
                       "" if trace.events[k] is None else trace.events[k]]
                )
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump({
                "word": list(trace.word), "seed": trace.seed,
                "error_norm": trace.error_norm.tolist(), "bound": trace.bound.tolist(),
                "error": trace.error.tolist(), "x": trace.x.tolist(), "xhat": trace.xhat.tolist(),
                "arrivals": [list(a) for a in trace.arrivals], "events": trace.events,
            }, fh, indent=1)
    else:
        raise ValueError(f"unknown trace format {fmt!r}")
    return path


def read_trace(path) -> dict:
    """Read back an exported trace as plain arrays."""
    path = Path(path)
    if path.suffix == ".json":
        with open(path) as fh:
            d = json.load(fh)
        return {k: np.asarray(d[k]) for k in ("error_norm", "bound", "error")} | {"arrivals": d["arrivals"]}
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n = sum(h.startswith("err_") for h in header)
    return {
        "k": np.array([int(r[0]) for r in body]),
        "error_norm": np.array([float(r[1]) for r in body]),
        "bound": np.array([float(r[2]) for r in body]),
        "error": np.array([[float(x) for x in r[3:3 + n]] for r in body]),
        "arrivals": [[int(i) for i in r[3 + n].split(";") if i] for r in body],
    }


def export_batch(stats: BatchStats, out_dir, fmt: str = "csv") -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    word = "".join(map(str, stats.word)) if max(stats.word) < 10 else "-".join(map(str, stats.word))
    ext = "csv" if fmt == "csv" else "json"
    files = [export_trace(tr, out_dir / f"trace_{word}_{i:04d}.{ext}", fmt) for i, tr in enumerate(stats.traces)]
    summary = out_dir / f"summary_{word}.json"
    with open(summary, "w") as fh:
        json.dump(stats.to_dict(), fh, indent=1)
    return files + [summary]
