"""Delay-word languages and their event-based reduction.

A delay word ``tau = (tau(0), ..., tau(T-1))`` says that the measurement taken
at step ``i`` is delivered at step ``i + tau(i)``.  Any delivery at or after
the horizon ``T`` is treated as a missing measurement.

An *event* at step ``k`` is the bit string ``d_0 d_1 ... d_k`` where
``d_l = 1`` iff the measurement from step ``l`` is available at step ``k``.
It is stored by its index ``j = sum_l d_l * 2**(k - l)`` (``d_0`` is the most
significant bit).  The event sequence of a word is the list of its per-step
event indices; words that produce identical sequences cannot be told apart
at run time and are merged by :func:`reduce_language`.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import LanguageError, PatternOutsideLanguage

__all__ = [
    "DelayLanguage",
    "Event",
    "EventSequence",
    "EventLanguage",
    "PrefixNode",
    "PrefixTree",
    "enumerate_language",
    "load_language",
    "language_to_dict",
    "parse_word",
    "word_to_event_sequence",
    "reduce_language",
    "build_prefix_tree",
    "event_matrix",
    "event_index_from_availability",
    "prefix_resolve",
    "compile_language",
]


def parse_word(word) -> tuple[int, ...]:
    """Accept ``"0210"``-style digit strings or integer sequences."""
    if isinstance(word, str):
        if not word.isdigit():
            raise LanguageError(f"word {word!r} must contain only digits")
        return tuple(int(c) for c in word)
    try:
        delays = tuple(int(d) for d in word)
    except (TypeError, ValueError) as exc:
        raise LanguageError(f"cannot parse word {word!r}") from exc
    if any(d < 0 for d in delays):
        raise LanguageError(f"word {word!r} has a negative delay")
    return delays


@dataclass(frozen=True)
class DelayLanguage:
    T: int
    tau_bar: int
    words: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.T < 1:
            raise LanguageError("horizon T must be >= 1")
        if not self.words:
            raise LanguageError("language has no words")
        if len(set(self.words)) != len(self.words):
            raise LanguageError("language contains repeated words")
        for w in self.words:
            if len(w) != self.T:
                raise LanguageError(f"word {w} has length {len(w)}, expected T={self.T}")
            for i, d in enumerate(w):
                # a delay reaching past the horizon is a missing sample, always admissible
                if d > self.tau_bar and i + d < self.T:
                    raise LanguageError(f"word {w}: delay {d} at position {i} exceeds tau_bar={self.tau_bar}")

    def __len__(self):
        return len(self.words)


def enumerate_language(spec: Mapping | DelayLanguage) -> DelayLanguage:
    """Build a :class:`DelayLanguage` from a language specification.

    Supported forms::

        {"type": "max_delay", "T": 5, "tau_bar": 2}
        {"type": "word_list", "T": 6, "words": [[0, 6, 0, 0, 0, 0], ...]}
        {"type": "missing", "T": 4, "max_missing": 1}

    ``word_list`` may carry an explicit ``tau_bar``; otherwise the largest
    in-horizon delay is used.  ``missing`` yields every word in which at most
    ``max_missing`` samples never arrive (sentinel delay ``T``) and all others
    are on time.
    """
    if isinstance(spec, DelayLanguage):
        return spec
    kind = spec.get("type")
    if "T" not in spec:
        raise LanguageError("language spec is missing field 'T'")
    T = int(spec["T"])
    if kind == "max_delay":
        if "tau_bar" not in spec:
            raise LanguageError("max_delay spec is missing field 'tau_bar'")
        tau_bar = int(spec["tau_bar"])
        if tau_bar < 0:
            raise LanguageError("tau_bar must be >= 0")
        words = tuple(itertools.product(range(tau_bar + 1), repeat=T))
        return DelayLanguage(T, tau_bar, words)
    if kind == "word_list":
        raw = spec.get("words")
        if not raw:
            raise LanguageError("word_list spec has no words")
        words = tuple(parse_word(w) for w in raw)
        if "tau_bar" in spec:
            tau_bar = int(spec["tau_bar"])
        else:
            tau_bar = max((d for w in words for i, d in enumerate(w) if i + d < T), default=0)
        return DelayLanguage(T, tau_bar, words)
    if kind == "missing":
        max_missing = int(spec.get("max_missing", 1))
        words = []
        for count in range(max_missing + 1):
            for idx in itertools.combinations(range(T), count):
                words.append(tuple(T if i in idx else 0 for i in range(T)))
        return DelayLanguage(T, 0, tuple(words))
    raise LanguageError(f"unknown language spec type {kind!r}")


def load_language(path: str | Path) -> DelayLanguage:
    with open(path) as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise LanguageError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    return enumerate_language(spec)


def language_to_dict(lang: DelayLanguage) -> dict:
    return {"type": "word_list", "T": lang.T, "tau_bar": lang.tau_bar, "words": [list(w) for w in lang.words]}


@dataclass(frozen=True)
class Event:
    step: int
    index: int

    def __post_init__(self):
        if self.step < 0 or not 0 <= self.index < 2 ** (self.step + 1):
            raise ValueError(f"invalid event e_{{{self.step},{self.index}}}")

    @property
    def bits(self) -> str:
        return format(self.index, f"0{self.step + 1}b")

    def available(self, source: int) -> bool:
        """Whether the sample from step ``source`` is available at this event's step."""
        if source > self.step:
            return False
        return bool((self.index >> (self.step - source)) & 1)

    def __str__(self):
        return f"e_{self.step},{self.index}"


@dataclass(frozen=True)
class EventSequence:
    indices: tuple[int, ...]

    def __len__(self):
        return len(self.indices)

    @property
    def events(self) -> tuple[Event, ...]:
        return tuple(Event(k, j) for k, j in enumerate(self.indices))

    def available(self, step: int, source: int) -> bool:
        return source <= step and bool((self.indices[step] >> (step - source)) & 1)

    def prefix(self, length: int) -> tuple[int, ...]:
        return self.indices[:length]

    def __str__(self):
        return " ".join(str(e) for e in self.events)


def word_to_event_sequence(word: Sequence[int]) -> EventSequence:
    """Map a delay word to its event sequence."""
    T = len(word)
    indices = []
    for k in range(T):
        j = 0
        for ell in range(k + 1):
            if word[k - ell] <= ell:
                j += 1 << ell
        indices.append(j)
    return EventSequence(tuple(indices))


@dataclass(frozen=True)
class EventLanguage:
    """Reduced event-based language.

    ``word_map[a]`` is the index into ``sequences`` of the word ``words[a]``.
    """

    T: int
    sequences: tuple[EventSequence, ...]
    word_map: tuple[int, ...]
    words: tuple[tuple[int, ...], ...] = ()

    def __len__(self):
        return len(self.sequences)

    def sequence_of_word(self, word: Sequence[int]) -> int:
        try:
            return self.word_map[self.words.index(tuple(word))]
        except ValueError:
            raise PatternOutsideLanguage(f"word {tuple(word)} is not in the language") from None

    def words_of_sequence(self, alpha: int) -> list[tuple[int, ...]]:
        return [w for w, a in zip(self.words, self.word_map) if a == alpha]


def reduce_language(lang: DelayLanguage) -> EventLanguage:
    seen: dict[tuple[int, ...], int] = {}
    sequences = []
    word_map = []
    for w in lang.words:
        seq = word_to_event_sequence(w)
        if seq.indices not in seen:
            seen[seq.indices] = len(sequences)
            sequences.append(seq)
        word_map.append(seen[seq.indices])
    return EventLanguage(lang.T, tuple(sequences), tuple(word_map), lang.words)


def event_matrix(seq: EventSequence) -> np.ndarray:
    """T x T lower-triangular availability matrix; row = step, column = source."""
    T = len(seq)
    E = np.zeros((T, T), dtype=np.int8)
    for k in range(T):
        for l in range(k + 1):
            E[k, l] = seq.available(k, l)
    return E


def event_index_from_availability(step: int, arrived: Iterable[int]) -> Event:
    index = 0
    for l in set(arrived):
        if l < 0 or l > step:
            raise ValueError(f"source time {l} is not in [0, {step}]")
        index |= 1 << (step - l)
    return Event(step, index)


@dataclass
class PrefixNode:
    id: int
    depth: int
    key: tuple[int, ...]
    parent: int | None
    sequences: tuple[int, ...]
    children: dict[int, int] = field(default_factory=dict)


@dataclass
class PrefixTree:
    """Trie over event sequences.

    Node ``paths[alpha][d]`` is the node id of the length-``d`` prefix of
    sequence ``alpha``; ``paths[alpha][0]`` is the root.
    """

    T: int
    nodes: list[PrefixNode]
    paths: list[list[int]]
    by_key: dict[tuple[int, ...], int]

    @property
    def root(self) -> PrefixNode:
        return self.nodes[0]

    def at_depth(self, depth: int) -> list[PrefixNode]:
        return [nd for nd in self.nodes if nd.depth == depth]

    def leaf(self, alpha: int) -> PrefixNode:
        return self.nodes[self.paths[alpha][-1]]

    def resolve(self, observed: Sequence[int]) -> PrefixNode:
        return prefix_resolve(self, observed)


def build_prefix_tree(ev: EventLanguage) -> PrefixTree:
    T = ev.T
    members: dict[tuple[int, ...], list[int]] = {}
    for alpha, seq in enumerate(ev.sequences):
        for d in range(T + 1):
            members.setdefault(seq.prefix(d), []).append(alpha)
    # breadth-first ids: parents before children, siblings in first-occurrence order
    keys = sorted(members, key=lambda key: (len(key), min(members[key])))
    by_key = {key: i for i, key in enumerate(keys)}
    nodes = []
    for i, key in enumerate(keys):
        parent = by_key[key[:-1]] if key else None
        nodes.append(PrefixNode(i, len(key), key, parent, tuple(members[key])))
        if parent is not None:
            nodes[parent].children[key[-1]] = i
    paths = [[by_key[seq.prefix(d)] for d in range(T + 1)] for seq in ev.sequences]
    return PrefixTree(T, nodes, paths, by_key)


def prefix_resolve(tree: PrefixTree, observed: Sequence[int] | EventSequence) -> PrefixNode:
    """Return the node whose key equals the observed event-index prefix."""
    if isinstance(observed, EventSequence):
        observed = observed.indices
    key = tuple(int(j) for j in observed)
    if len(key) > tree.T:
        raise PatternOutsideLanguage(f"prefix of length {len(key)} exceeds horizon {tree.T}")
    try:
        return tree.nodes[tree.by_key[key]]
    except KeyError:
        raise PatternOutsideLanguage(f"observed event prefix {key} is not generated by any word") from None


def compile_language(spec) -> tuple[DelayLanguage, EventLanguage, PrefixTree]:
    """Enumerate, reduce and index a language in one call."""
    lang = enumerate_language(spec)
    ev = reduce_language(lang)
    return lang, ev, build_prefix_tree(ev)
