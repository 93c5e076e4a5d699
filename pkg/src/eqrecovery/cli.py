"""Command-line entry point.

Exit codes: 0 success, 1 verification or bound failure, 2 usage error,
3 infeasible design.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from .certio import load_certificate, save_certificate
from .errors import AllInfeasible, CertificateError, LanguageError, ModelError, PatternOutsideLanguage
from .language import (
    build_prefix_tree,
    compile_language,
    enumerate_language,
    event_matrix,
    language_to_dict,
    load_language,
    parse_word,
    reduce_language,
)
from .model import load_model
from .simulate import batch_run, export_batch
from .synthesis import SynthesisOptions, synthesize, verify_certificate

log = logging.getLogger("eqrecovery")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3

REFERENCE_MU1 = 0.33
REFERENCE_MAX_MU2 = 0.6912


def data_path(name: str) -> Path:
    return Path(str(resources.files("eqrecovery") / "data" / name))


class UsageError(Exception):
    pass


def _floats(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.replace(",", " ").split()])


def _options(args) -> SynthesisOptions:
    opts = SynthesisOptions()
    if args.mu1_lo is not None:
        opts.mu1_lo = args.mu1_lo
    if args.mu1_hi is not None:
        opts.mu1_hi = args.mu1_hi
    if args.mu1_grid is not None:
        if args.mu1_grid < 2:
            raise UsageError("--mu1-grid must be >= 2")
        opts.grid = args.mu1_grid
    if args.refine is not None:
        opts.refine = args.refine
    opts.fixed_mu1 = args.mu1
    if args.weights:
        if os.path.exists(args.weights):
            with open(args.weights) as fh:
                w = json.load(fh)
            opts.weight_mu1 = float(w.get("mu1", 1.0))
            opts.weights_mu2 = np.asarray(w.get("mu2", 1.0), dtype=float)
        else:
            vals = _floats(args.weights)
            if vals.size != 2:
                raise UsageError("--weights takes 'MU1,MU2' or a JSON file")
            opts.weight_mu1, opts.weights_mu2 = float(vals[0]), float(vals[1])
        if opts.weight_mu1 < 0 or np.any(np.asarray(opts.weights_mu2) < 0):
            raise UsageError("cost weights must be non-negative")
    if args.fix_L:
        with open(args.fix_L) as fh:
            opts.L_blocks = json.load(fh)
    if args.s0:
        opts.s0 = _floats(args.s0)
    opts.lp_dump = args.lp_dump
    opts.workers = args.workers or 1
    return opts


def _load_lang(args):
    if not args.language:
        raise UsageError("--language is required")
    text = args.language
    if os.path.exists(text):
        lang = load_language(text)
    else:
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--language is neither a file nor inline JSON: {exc}") from exc
        lang = enumerate_language(spec)
    ev = reduce_language(lang)
    return lang, ev, build_prefix_tree(ev)


def _require(path, flag):
    if not path:
        raise UsageError(f"{flag} is required")
    if not os.path.exists(path):
        raise UsageError(f"{flag} {path}: no such file")
    return path


def cmd_language(args) -> int:
    lang, ev, tree = _load_lang(args)
    print(f"T={lang.T} tau_bar={lang.tau_bar}")
    print(f"words: {len(lang)}")
    print(f"event sequences: {len(ev)}")
    print(f"prefix tree nodes: {len(tree.nodes)}")
    if args.verbose or len(lang) <= 16:
        for a, seq in enumerate(ev.sequences):
            words = ", ".join("".join(map(str, w)) if max(w) < 10 else str(list(w)) for w in ev.words_of_sequence(a))
            print(f"  E'{a + 1}: {seq}   <- {words}")
            for row in event_matrix(seq):
                print("     " + " ".join(str(int(v)) for v in row))
    if args.out:
        out = {
            "language": language_to_dict(lang),
            "sequences": [list(s.indices) for s in ev.sequences],
            "word_map": list(ev.word_map),
            "event_matrices": [event_matrix(s).tolist() for s in ev.sequences],
            "tree": [{"id": nd.id, "depth": nd.depth, "key": list(nd.key), "sequences": list(nd.sequences)}
                     for nd in tree.nodes],
        }
        with open(args.out, "w") as fh:
            json.dump(out, fh, indent=1)
    return EXIT_OK


def _print_grid(table):
    print("  mu1            status      J")
    for row in table:
        J = "" if row["J"] is None else f"{row['J']:.9g}"
        print(f"  {row['mu1']:<14.9g} {row['status']:<11} {J}")


def cmd_synth(args) -> int:
    model = load_model(_require(args.model, "--model"))
    lang, ev, tree = _load_lang(args)
    opts = _options(args)
    t0 = time.perf_counter()
    try:
        cert = synthesize(model, ev, opts, tree)
    except AllInfeasible as exc:
        print(f"infeasible: {exc}")
        _print_grid(exc.table)
        return EXIT_INFEASIBLE
    out = args.cert or "certificate.json"
    save_certificate(cert, out)
    if args.verbose:
        _print_grid(cert.grid_table)
    print(f"mu1      = {cert.mu1:.6g}")
    print(f"max mu2  = {cert.max_mu2:.6g}")
    print(f"J        = {cert.objective:.9g}")
    print(f"LP size  = {cert.solver['n_vars']} vars x {cert.solver['n_rows']} rows, "
          f"{cert.solver['grid_points']} grid points, {time.perf_counter() - t0:.1f} s")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    model = load_model(_require(args.model, "--model"))
    cert = load_certificate(_require(args.cert, "--cert"))
    if args.language:
        _, ev, _ = _load_lang(args)
        if list(ev.words) != list(cert.ev.words):
            raise CertificateError("certificate language differs from --language")
    report = verify_certificate(model, cert)
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_FAIL


def _words_arg(text, cert):
    if text in (None, "all"):
        return list(cert.ev.words) if text == "all" else None
    if text.startswith("#"):
        return [cert.ev.words[int(text[1:])]]
    return [parse_word(text.split(",") if "," in text else text)]


def cmd_simulate(args) -> int:
    model = load_model(_require(args.model, "--model"))
    cert = load_certificate(_require(args.cert, "--cert"))
    report = verify_certificate(model, cert)
    if not report.ok:
        print(report.summary())
        return EXIT_FAIL
    words = _words_arg(args.word, cert)
    if not words:
        raise UsageError("--word is required (digits, comma list, '#index' or 'all')")
    out = Path(args.out) if args.out else None
    trials = args.trials or 50
    total = 0
    for w in words:
        stats = batch_run(model, cert, w, trials, args.seed, keep_traces=out is not None)
        total += stats.violation_count + stats.terminal_violations
        if out is not None:
            export_batch(stats, out)
        label = "".join(map(str, w))
        print(f"word {label}: {trials} trials, violations={stats.violation_count}, "
              f"terminal>mu1={stats.terminal_violations}, max err={np.array2string(stats.max_error, precision=4)}")
    print(f"total violations: {total}")
    return EXIT_OK if total == 0 else EXIT_FAIL


def cmd_reproduce(args) -> int:
    if args.target != "batch-reactor":
        raise UsageError(f"unknown target {args.target}")
    model = load_model(data_path("batch_reactor.json"))
    tau_bar = 1 if args.reduced else 2
    lang, ev, tree = compile_language({"type": "max_delay", "T": model.T, "tau_bar": tau_bar})
    opts = _options(args)
    t0 = time.perf_counter()
    cert = synthesize(model, ev, opts, tree)
    elapsed = time.perf_counter() - t0
    report = verify_certificate(model, cert)
    word = (2, 1, 2, 1, 0) if tau_bar == 2 else (1, 0, 1, 1, 0)
    stats = batch_run(model, cert, word, args.trials or 50, args.seed, keep_traces=bool(args.out))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        save_certificate(cert, Path(args.out) / "certificate.json")
        export_batch(stats, args.out)
    checks = [
        ("certificate verifies", report.ok, report.summary().splitlines()[0]),
        ("simulation has no violations", stats.violation_count + stats.terminal_violations == 0,
         f"{stats.violation_count} step / {stats.terminal_violations} terminal"),
    ]
    if tau_bar == 2:
        checks += [
            ("mu1 in [0.297, 0.363]", 0.297 <= cert.mu1 <= 0.363, f"mu1={cert.mu1:.4f} (reference {REFERENCE_MU1})"),
            ("max mu2 within 10% of 0.6912", abs(cert.max_mu2 - REFERENCE_MAX_MU2) <= 0.1 * REFERENCE_MAX_MU2,
             f"max mu2={cert.max_mu2:.4f} (reference {REFERENCE_MAX_MU2})"),
        ]
    print(f"batch reactor, T={model.T}, tau_bar={tau_bar}: {len(lang)} words, {len(ev)} sequences, "
          f"{len(tree.nodes)} prefix nodes; synthesis {elapsed:.1f} s")
    ok = True
    for name, passed, detail in checks:
        ok &= bool(passed)
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eqrecovery", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, synth=False):
        p.add_argument("--model")
        p.add_argument("--language", help="language spec file or inline JSON")
        p.add_argument("--cert")
        p.add_argument("--out")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trials", type=int)
        p.add_argument("--word")
        p.add_argument("--workers", type=int, default=None)
        if synth:
            p.add_argument("--mu1-lo", type=float)
            p.add_argument("--mu1-hi", type=float)
            p.add_argument("--mu1-grid", type=int)
            p.add_argument("--refine", type=int)
            p.add_argument("--mu1", type=float, help="fix mu1 instead of searching")
            p.add_argument("--weights", help="'MU1,MU2' weights or a JSON file")
            p.add_argument("--lp-dump")
            p.add_argument("--fix-L", help="JSON list of T fixed L_k blocks")
            p.add_argument("--s0", help="comma-separated initial auxiliary state")
        p.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("language", help="compile a delay language"))
    common(sub.add_parser("synth", help="synthesize a certificate"), synth=True)
    common(sub.add_parser("verify", help="check a certificate in closed form"))
    common(sub.add_parser("simulate", help="Monte Carlo audit of a certificate"))
    rp = sub.add_parser("reproduce", help="run a built-in example end to end")
    rp.add_argument("target", choices=["batch-reactor"])
    rp.add_argument("--reduced", action="store_true", help="tau_bar = 1 variant")
    common(rp, synth=True)
    return parser


COMMANDS = {
    "language": cmd_language,
    "synth": cmd_synth,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "reproduce": cmd_reproduce,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.workers is None:
        args.workers = os.cpu_count() or 1
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LanguageError, ModelError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CertificateError as exc:
        print(f"certificate error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except PatternOutsideLanguage as exc:
        print(f"pattern outside language: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AllInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
