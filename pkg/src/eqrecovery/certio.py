"""JSON (de)serialization of certificates."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import CertificateError
from .language import build_prefix_tree, enumerate_language, reduce_language
from .synthesis import Certificate

FORMAT_VERSION = 1


def certificate_to_dict(cert: Certificate) -> dict:
    nodes = []
    for node in cert.tree.nodes:
        entry = {"id": node.id, "depth": node.depth, "key": list(node.key),
                 "parent": node.parent, "sequences": list(node.sequences)}
        g = cert.node_gains[node.id]
        if g is not None:
            entry.update(M=g["M"].tolist(), L=g["L"].tolist(), nu=g["nu"].tolist())
        nodes.append(entry)
    return {
        "format": FORMAT_VERSION,
        "T": cert.T, "n": cert.n, "p": cert.p,
        "mu1": cert.mu1,
        "mu2": cert.mu2.tolist(),
        "objective": cert.objective,
        "s0": cert.s0.tolist(),
        "language": {"type": "word_list", "T": cert.T, "words": [list(w) for w in cert.ev.words]},
        "word_map": list(cert.ev.word_map),
        "sequences": [list(s.indices) for s in cert.ev.sequences],
        # node id path (root first) for every sequence
        "paths": [list(p) for p in cert.tree.paths],
        "nodes": nodes,
        "model_fingerprint": cert.model_fingerprint,
        "language_fingerprint": cert.language_fingerprint,
        "solver": cert.solver,
        "grid": cert.grid_table,
    }


def save_certificate(cert: Certificate, path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(certificate_to_dict(cert), fh, indent=1)
    return path


def certificate_from_dict(d: dict) -> Certificate:
    if d.get("format") != FORMAT_VERSION:
        raise CertificateError(f"unsupported certificate format {d.get('format')!r}")
    lang = enumerate_language(d["language"])
    ev = reduce_language(lang)
    tree = build_prefix_tree(ev)
    if [list(s.indices) for s in ev.sequences] != d["sequences"]:
        raise CertificateError("stored event sequences do not match the stored language")
    n, p = int(d["n"]), int(d["p"])
    gains: list[dict | None] = [None] * len(tree.nodes)
    for entry in d["nodes"]:
        key = tuple(entry["key"])
        if key not in tree.by_key:
            raise CertificateError(f"certificate node {key} is not a prefix of the language")
        if entry["depth"] == 0:
            continue
        gains[tree.by_key[key]] = {
            "M": np.array(entry["M"], dtype=float).reshape(n, d["T"] * p),
            "L": np.array(entry["L"], dtype=float).reshape(n, p),
            "nu": np.array(entry["nu"], dtype=float).reshape(n),
        }
    if any(g is None for nd, g in zip(tree.nodes, gains) if nd.depth > 0):
        raise CertificateError("certificate is missing gains for some prefix nodes")
    return Certificate(
        mu1=float(d["mu1"]), mu2=np.array(d["mu2"], dtype=float), node_gains=gains,
        objective=float(d["objective"]), ev=ev, tree=tree, s0=np.array(d["s0"], dtype=float),
        n=n, p=p, model_fingerprint=d["model_fingerprint"], language_fingerprint=d["language_fingerprint"],
        solver=d.get("solver", {}), grid_table=d.get("grid", []),
    )


def load_certificate(path) -> Certificate:
    with open(path) as fh:
        return certificate_from_dict(json.load(fh))
