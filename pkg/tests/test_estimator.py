import copy

import numpy as np
import pytest

from eqrecovery.errors import CertificateError, DuplicateArrival, PatternOutsideLanguage, StepBeyondHorizon
from eqrecovery.estimator import Estimator, init_estimator
from eqrecovery.language import compile_language
from eqrecovery.model import model_from_dict
from eqrecovery.synthesis import SynthesisOptions, synthesize

from conftest import LANG_T2, blocks, scalar_model
from oracles import availability_tensor, recursive_error


def test_scalar_T1_by_hand():
    a, b, c, u = 0.9, 2.0, 1.5, 0.3
    model = model_from_dict({"T": 1, "A": [[a]], "B": [[b]], "C": [[c]], "eta_v": 0.1})
    lang, ev, tree = compile_language({"type": "word_list", "T": 1, "words": ["0"]})
    cert = synthesize(model, ev, SynthesisOptions(fixed_mu1=1.0), tree)
    m = cert.node_gains[tree.paths[0][1]]["M"][0, 0]
    nu = cert.node_gains[tree.paths[0][1]]["nu"][0]
    est = Estimator(model, cert, [0.4])
    z = 1.0
    est.ingest({0: [z]})
    out = est.step([u])
    innov = z - c * (0.4 + 0.0)
    assert out[0] == pytest.approx(a * 0.4 + b * u - (nu + m * innov), abs=1e-15)
    assert est.s[0] == pytest.approx(nu + m * innov, abs=1e-15)


def _zero_cert(model, spec):
    lang, ev, tree = compile_language(spec)
    cert = synthesize(model, ev, SynthesisOptions(fixed_mu1=100.0), tree)
    for g in cert.node_gains:
        if g is not None:
            g["M"][:] = 0.0
            g["nu"][:] = 0.0
    return cert


def test_zero_gains_propagate_open_loop():
    model = model_from_dict({"T": 3, "A": [[0.5, 1.0], [0.0, 0.9]], "B": [[0.0], [1.0]], "C": [[1.0, 0.0]],
                             "eta_v": 0.01})
    cert = _zero_cert(model, {"type": "max_delay", "T": 3, "tau_bar": 1})
    est = Estimator(model, cert, [1.0, -1.0], check=False)
    x = np.array([1.0, -1.0])
    for k in range(3):
        est.ingest({k: [123.0]})
        u = np.array([0.1 * k])
        x = model.A[k] @ x + model.B[k] @ u
        assert np.array_equal(est.step(u), x)


def test_matches_recursive_oracle(planar_case):
    model, lang, cert = planar_case
    rng = np.random.default_rng(3)
    n, p, T = model.n, model.p, model.T
    for word in lang.words:
        a = cert.ev.sequence_of_word(word)
        M, L, nu = cert.gains(a)
        E = availability_tensor(word)
        x0 = rng.normal(size=n)
        xt0 = rng.uniform(-cert.mu1, cert.mu1, size=n)
        w = rng.uniform(-model.eta_w, model.eta_w, size=(T, n))
        v = rng.uniform(-model.eta_v, model.eta_v, size=(T, p))
        xs = [x0]
        for k in range(T):
            xs.append(model.A[k] @ xs[k] + model.W[k] @ w[k])
        z = [model.C[k] @ xs[k] + model.V[k] @ v[k] for k in range(T)]
        est = Estimator(model, cert, x0 - xt0)
        errs = [xs[0] - est.xhat]
        for k in range(T):
            est.ingest([(i, z[i]) for i in range(T) if i + word[i] == k])
            errs.append(xs[k + 1] - est.step())
        ref = recursive_error(model.A, model.C, model.W, model.V, blocks(M, n, p, T),
                              [L[k * n:(k + 1) * n, k * p:(k + 1) * p] for k in range(T)],
                              [nu[k * n:(k + 1) * n] for k in range(T)], cert.s0, E, w, v, xt0)
        assert np.allclose(np.concatenate(errs), ref, atol=1e-12)


def test_input_errors(small_case):
    model, cert = small_case
    est = Estimator(model, cert, [0.0])
    with pytest.raises(PatternOutsideLanguage):
        est.ingest({1: [0.0]})
    est.ingest({0: [0.0]})
    with pytest.raises(DuplicateArrival):
        est.ingest({0: [0.0]})
    est.step()
    est.ingest({})
    est.step()
    with pytest.raises(StepBeyondHorizon):
        est.ingest({1: [0.0]})
    with pytest.raises(StepBeyondHorizon):
        est.step()


def test_unreachable_pattern(small_case):
    model, cert = small_case
    est = Estimator(model, cert, [0.0])
    est.ingest({0: [0.0]})
    est.step()
    # a step-0 sample reported at step 1 after it already arrived is a duplicate
    with pytest.raises(DuplicateArrival):
        est.ingest({0: [0.0]})


def test_pattern_outside_restricted_language():
    model = scalar_model(a=0.8)
    _, ev, tree = compile_language({"type": "word_list", "T": 2, "words": ["00", "01"]})
    cert = synthesize(model, ev, SynthesisOptions(fixed_mu1=1.0), tree)
    est = Estimator(model, cert, [0.0])
    with pytest.raises(PatternOutsideLanguage):
        est.ingest({})


def test_current_bound(planar_case):
    model, _, cert = planar_case
    est = init_estimator(model, cert, [0.0, 0.0])
    assert est.current_bound() == pytest.approx(cert.mu2[:, 0].max())
    for k in range(model.T):
        est.ingest({k: [0.0]})
        a = cert.ev.sequence_of_word((0,) * model.T)
        if k == model.T - 1:
            assert est.consistent_sequences() == (a,)
        assert est.current_bound() == pytest.approx(max(cert.mu2[b, k] for b in est.consistent_sequences()))
        est.step()
    assert est.current_bound() == cert.mu1


def test_causality(planar_case):
    """Changing z_j never changes estimates at steps <= j."""
    model, _, cert = planar_case
    rng = np.random.default_rng(0)
    zs = rng.normal(size=(model.T, 1))

    def run(zz):
        est = Estimator(model, cert, [0.0, 0.0], check=False)
        out = [est.xhat.copy()]
        for k in range(model.T):
            est.ingest({k: zz[k]})
            out.append(est.step())
        return out

    base = run(zs)
    for j in range(model.T):
        alt = zs.copy()
        alt[j] += 5.0
        other = run(alt)
        for k in range(j + 1):
            assert np.array_equal(base[k], other[k])


def test_prefix_consistency_bit_identical(lang_t2):
    model = scalar_model(a=0.8)
    lang, ev, tree = lang_t2
    cert = synthesize(model, ev, SynthesisOptions(fixed_mu1=1.0), tree)
    z = [np.array([0.3]), np.array([-0.2])]

    def first_step(word):
        est = Estimator(model, cert, [0.1], check=False)
        est.ingest([(i, z[i]) for i in range(2) if i + word[i] == 0])
        return est.step()

    groups = {}
    for word in lang.words:
        groups.setdefault(word[0] == 0, []).append(first_step(word))
    for outs in groups.values():
        assert all(o.tobytes() == outs[0].tobytes() for o in outs)


def test_tampered_certificate_refused(small_case):
    model, cert = small_case
    bad = copy.deepcopy(cert)
    bad.mu2[0, 1] = 0.0
    with pytest.raises(CertificateError):
        Estimator(model, bad, [0.0])
    with pytest.raises(CertificateError):
        Estimator(scalar_model(a=0.7), cert, [0.0])
    Estimator(model, bad, [0.0], check=False)
