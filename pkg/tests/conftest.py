import numpy as np
import pytest

from eqrecovery.cli import data_path
from eqrecovery.language import compile_language
from eqrecovery.model import SystemModel, load_model, model_from_dict

LANG_T2 = {"type": "max_delay", "T": 2, "tau_bar": 2}
BATCH_REACTOR_LANG = {"type": "max_delay", "T": 5, "tau_bar": 2}


def random_model(rng, n, p, T, process_noise=True, eta_w=0.05, eta_v=0.1):
    A = tuple(rng.normal(scale=0.6, size=(n, n)) for _ in range(T))
    B = tuple(rng.normal(size=(n, 1)) for _ in range(T))
    C = tuple(rng.normal(size=(p, n)) for _ in range(T))
    V = tuple(np.eye(p) + 0.1 * rng.normal(size=(p, p)) for _ in range(T))
    W = tuple(np.eye(n) + 0.1 * rng.normal(size=(n, n)) for _ in range(T)) if process_noise else None
    return SystemModel(A, B, C, V, W, eta_w if process_noise else 0.0, eta_v)


def blocks(M, n, p, T):
    """Stacked (Tn x Tp) matrix -> nested list of n x p blocks."""
    return [[M[k * n:(k + 1) * n, i * p:(i + 1) * p] for i in range(T)] for k in range(T)]


def scalar_model(a=1.1, c=1.0, T=2, eta_w=0.05, eta_v=0.1, with_w=True):
    d = {"T": T, "A": [[a]], "B": [[1.0]], "C": [[c]], "eta_v": eta_v}
    if with_w:
        d.update(W=[[1.0]], eta_w=eta_w)
    return model_from_dict(d)


@pytest.fixture(scope="session")
def lang_t2():
    return compile_language(LANG_T2)


@pytest.fixture(scope="session")
def batch_reactor():
    return load_model(data_path("batch_reactor.json"))


@pytest.fixture(scope="session")
def br_language():
    return compile_language(BATCH_REACTOR_LANG)


@pytest.fixture(scope="session")
def br_certificate(batch_reactor, br_language):
    """Full-size batch-reactor synthesis; several minutes, computed once per session."""
    import time

    from eqrecovery.synthesis import synthesize

    _, ev, tree = br_language
    t0 = time.perf_counter()
    cert = synthesize(batch_reactor, ev, tree=tree)
    return cert, time.perf_counter() - t0


@pytest.fixture(scope="session")
def small_case(lang_t2):
    """Stable scalar plant on the T=2, tau_bar=2 language with its certificate."""
    from eqrecovery.synthesis import synthesize

    model = scalar_model(a=0.8)
    _, ev, tree = lang_t2
    return model, synthesize(model, ev, tree=tree)


@pytest.fixture(scope="session")
def planar_case():
    """Two-state plant, T=3, tau_bar=1, with its certificate."""
    from eqrecovery.synthesis import synthesize

    model = model_from_dict({
        "T": 3, "A": [[0.9, 0.2], [0.0, 0.7]], "B": [[0.0], [0.1]], "C": [[1.0, 0.0]],
        "W": [[1.0, 0.0], [0.0, 1.0]], "eta_w": 0.02, "eta_v": 0.05,
    })
    lang, ev, tree = compile_language({"type": "max_delay", "T": 3, "tau_bar": 1})
    return model, lang, synthesize(model, ev, tree=tree)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report_criterion(num, name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {name}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
