"""Equalized-recovery state estimators for LTV systems with delayed or missing measurements."""

from .errors import (
    AllInfeasible,
    CertificateError,
    ConflictingZeroPattern,
    DuplicateArrival,
    LanguageError,
    ModelError,
    PatternOutsideLanguage,
    StepBeyondHorizon,
)
from .language import (
    DelayLanguage,
    EventLanguage,
    EventSequence,
    PrefixTree,
    build_prefix_tree,
    compile_language,
    enumerate_language,
    event_matrix,
    reduce_language,
    word_to_event_sequence,
)
from .model import SystemModel, load_model, model_from_dict, stack_system
from .synthesis import Certificate, SynthesisOptions, synthesize, verify_certificate, worst_case_profile
from .estimator import Estimator, init_estimator
from .certio import load_certificate, save_certificate
from .simulate import batch_run, periodic_run, run_trial

__version__ = "0.1.0"
