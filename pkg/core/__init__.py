"""Core keystroke-dynamics modules: logs, features, one-class SVM, authentication, cohorts, evaluation."""
from .errors import KeydynError
from .events import KeystrokeLog, Phase, load_log, parse_log, serialize_log, slice_strokes, stroke_count
from .features import FeatureMatrix, extract_features
from .ocsvm import OcsvmConfig, OcsvmModel, parse_model, serialize_model, train
from .authenticator import AuthConfig, DecisionTrace, run_stream
from .synth import CohortSpec, TypistProfile, default_cohort, generate_log
from .evaluation import EvalReport, InitialProtocol, KFoldProtocol, run_initial, run_kfold
from .files import write_text_atomic

__all__ = [
    "KeydynError",
    "KeystrokeLog",
    "Phase",
    "load_log",
    "parse_log",
    "serialize_log",
    "slice_strokes",
    "stroke_count",
    "FeatureMatrix",
    "extract_features",
    "OcsvmConfig",
    "OcsvmModel",
    "parse_model",
    "serialize_model",
    "train",
    "AuthConfig",
    "DecisionTrace",
    "run_stream",
    "CohortSpec",
    "TypistProfile",
    "default_cohort",
    "generate_log",
    "EvalReport",
    "InitialProtocol",
    "KFoldProtocol",
    "run_initial",
    "run_kfold",
    "write_text_atomic"
]
