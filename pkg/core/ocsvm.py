"""
One-class SVM (nu formulation, RBF kernel) trained with an SMO-style solver.

The dual problem solved for l training points:

    minimize    1/2 a^T Q a,   Q_ij = exp(-gamma * |x_i - x_j|^2)
    subject to  0 <= a_i <= 1 / (nu * l),   sum(a) = 1

and the decision function is f(x) = sum_i a_i k(x_i, x) - rho.
"""

import hashlib
import logging
import math
from dataclasses import dataclass, replace
from typing import List, Union

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    CorruptModel,
    InsufficientData,
    InvalidConfig,
    NoConvergence,
    NonFiniteInput,
    VersionMismatch,
)
from .features import N_FEATURES, DigraphFeatures, FeatureMatrix, Scaler, fit_scaler


logger = logging.getLogger(__name__)

GAMMA_SCALE = "scale"
MODEL_MAGIC = "keydyn-model"
MODEL_VERSION = "v1"
# Floor for the curvature of a working pair; duplicated points give zero.
TAU = 1e-12


@dataclass(frozen=True)
class OcsvmConfig:
    """
    Solver hyperparameters.

    Attributes:
        nu: Upper bound on the training outlier fraction, in (0, 1]
        gamma: RBF width, or "scale" for 1 / (4 * mean column variance)
        kkt_tol: Stop once the maximal KKT violation is at most this
        max_iter: Maximum number of pair updates
        alpha_floor: Coefficients at or below this are not stored
    """

    nu: float = 0.1
    gamma: Union[float, str] = GAMMA_SCALE
    kkt_tol: float = 1e-3
    max_iter: int = 100_000
    alpha_floor: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.nu <= 1.0:
            raise InvalidConfig(f"nu must be in (0, 1], got {self.nu}")
        if isinstance(self.gamma, str):
            if self.gamma != GAMMA_SCALE:
                raise InvalidConfig(f"gamma must be a positive number or {GAMMA_SCALE!r}, got {self.gamma!r}")
        elif not (math.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidConfig(f"gamma must be positive, got {self.gamma}")
        if not self.kkt_tol > 0:
            raise InvalidConfig(f"kkt_tol must be positive, got {self.kkt_tol}")
        if self.max_iter < 1:
            raise InvalidConfig(f"max_iter must be positive, got {self.max_iter}")
        if self.alpha_floor < 0:
            raise InvalidConfig(f"alpha_floor must be non-negative, got {self.alpha_floor}")

    @property
    def min_train_rows(self) -> int:
        return max(4, math.ceil(1.0 / self.nu - 1e-12))

    def resolve_gamma(self, scaled: np.ndarray) -> float:
        """Return the numeric RBF width for standardized training features."""
        if not isinstance(self.gamma, str):
            return float(self.gamma)
        variance = float(np.var(scaled, axis=0).mean()) if len(scaled) else 0.0
        if variance <= 0.0:
            variance = 1.0
        return 1.0 / (4.0 * variance)


@dataclass(frozen=True)
class Verdict:
    label: int
    score: float


@dataclass(frozen=True, eq=False)
class DualSolution:
    alpha: np.ndarray
    gradient: np.ndarray
    iterations: int
    violation: float
    converged: bool


@dataclass(frozen=True, eq=False)
class OcsvmModel:
    """
    Trained one-class SVM.

    support_vectors live in the scaled feature space; scaler maps raw
    millisecond features into it. config holds the resolved gamma.
    """

    support_vectors: np.ndarray
    alpha: np.ndarray
    rho: float
    gamma: float
    scaler: Scaler
    config: OcsvmConfig
    train_user: str
    train_digest: str
    converged: bool = True
    iterations: int = 0

    @property
    def n_support(self) -> int:
        return len(self.alpha)


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    return np.exp(-gamma * cdist(a, b, "sqeuclidean"))


def dual_objective(q: np.ndarray, alpha: np.ndarray) -> float:
    return 0.5 * float(alpha @ q @ alpha)


def kkt_violation(q: np.ndarray, alpha: np.ndarray, upper: float) -> float:
    """
    Maximal pair violation of the dual optimality conditions.

    Zero (or negative) means alpha is optimal: no coefficient that may grow has
    a smaller gradient than a coefficient that may shrink.
    """
    gradient = q @ alpha
    return _violation(gradient, alpha, upper)


def _violation(gradient: np.ndarray, alpha: np.ndarray, upper: float) -> float:
    can_grow = alpha < upper
    can_shrink = alpha > 0
    if not can_grow.any() or not can_shrink.any():
        return 0.0
    return float(gradient[can_shrink].max() - gradient[can_grow].min())


def initial_alpha(l: int, upper: float) -> np.ndarray:
    """Feasible start: the first floor(1/upper) coefficients at the bound, remainder on the next."""
    alpha = np.zeros(l)
    full = min(l, int(math.floor(1.0 / upper)))
    alpha[:full] = upper
    if full < l:
        alpha[full] = min(upper, max(0.0, 1.0 - full * upper))
    return alpha


def solve_dual(q: np.ndarray, upper: float, tol: float, max_iter: int) -> DualSolution:
    """
    Solve the one-class dual by two-coordinate (SMO) updates.

    The working pair is the maximal violating pair; ties go to the lowest
    index, so the result is a deterministic function of the inputs.

    Args:
        q: Kernel matrix (l x l)
        upper: Box bound 1 / (nu * l)
        tol: KKT tolerance
        max_iter: Maximum pair updates

    Returns:
        DualSolution with converged=False if max_iter was hit first
    """
    l = q.shape[0]
    alpha = initial_alpha(l, upper)
    gradient = q @ alpha

    iterations = 0
    while iterations < max_iter:
        i = int(np.where(alpha < upper, gradient, np.inf).argmin())
        j = int(np.where(alpha > 0, gradient, -np.inf).argmax())
        if gradient[j] - gradient[i] <= tol:
            break

        curvature = max(q[i, i] + q[j, j] - 2.0 * q[i, j], TAU)
        room_i = upper - alpha[i]
        room_j = alpha[j]
        step = min((gradient[j] - gradient[i]) / curvature, room_i, room_j)

        alpha[i] = upper if step == room_i else alpha[i] + step
        alpha[j] = 0.0 if step == room_j else alpha[j] - step
        gradient += step * (q[i] - q[j])
        iterations += 1

    violation = _violation(gradient, alpha, upper)
    return DualSolution(
        alpha=alpha,
        gradient=gradient,
        iterations=iterations,
        violation=violation,
        converged=violation <= tol,
    )


def _kernel_sums(points: np.ndarray, support_vectors: np.ndarray, alpha: np.ndarray, gamma: float) -> np.ndarray:
    # fsum is exactly rounded, so a score never depends on batch size or order.
    weighted = rbf_kernel(points, support_vectors, gamma) * alpha
    return np.array([math.fsum(row) for row in weighted], dtype=np.float64)


def _compute_rho(
    scaled: np.ndarray,
    alpha: np.ndarray,
    upper: float,
    support_vectors: np.ndarray,
    support_alpha: np.ndarray,
    stored: np.ndarray,
    gamma: float,
) -> float:
    free = stored & (alpha < upper)
    if free.any():
        values = _kernel_sums(scaled[free], support_vectors, support_alpha, gamma)
        return float(np.clip(values.mean(), values.min(), values.max()))

    at_upper = alpha >= upper
    at_lower = ~stored
    upper_values = _kernel_sums(scaled[at_upper], support_vectors, support_alpha, gamma)
    if not at_lower.any():
        return float(upper_values.max())
    lower_values = _kernel_sums(scaled[at_lower], support_vectors, support_alpha, gamma)
    return float((lower_values.min() + upper_values.max()) / 2.0)


def training_digest(features: FeatureMatrix) -> str:
    return hashlib.sha256(np.ascontiguousarray(features.values).tobytes()).hexdigest()


def train(features: FeatureMatrix, cfg: OcsvmConfig, user_id: str = "") -> OcsvmModel:
    """
    Fit a scaler and a one-class SVM on a genuine user's digraph features.

    Args:
        features: Raw (unscaled) training features
        cfg: Solver configuration
        user_id: Label of the genuine user, recorded in the model

    Returns:
        OcsvmModel; converged is False when max_iter was reached first

    Raises:
        InsufficientData: Fewer than max(4, ceil(1/nu)) rows
        NonFiniteInput: Features contain NaN or infinity
    """
    l = len(features)
    if l < cfg.min_train_rows:
        raise InsufficientData(
            f"need at least {cfg.min_train_rows} feature rows for nu={cfg.nu}, got {l}"
        )
    if not np.isfinite(features.values).all():
        raise NonFiniteInput("training features contain NaN or infinity")

    scaler = fit_scaler(features)
    scaled = scaler.transform(features.values)
    gamma = cfg.resolve_gamma(scaled)
    upper = 1.0 / (cfg.nu * l)

    q = rbf_kernel(scaled, scaled, gamma)
    solution = solve_dual(q, upper, cfg.kkt_tol, cfg.max_iter)
    if not solution.converged:
        logger.warning(
            "Solver hit max_iter=%d for user=%s with KKT violation %.3g > %.3g",
            cfg.max_iter, user_id, solution.violation, cfg.kkt_tol,
        )

    stored = solution.alpha > cfg.alpha_floor
    support_vectors = scaled[stored]
    support_alpha = solution.alpha[stored]
    rho = _compute_rho(scaled, solution.alpha, upper, support_vectors, support_alpha, stored, gamma)

    support_vectors.setflags(write=False)
    support_alpha.setflags(write=False)
    model = OcsvmModel(
        support_vectors=support_vectors,
        alpha=support_alpha,
        rho=rho,
        gamma=gamma,
        scaler=scaler,
        config=replace(cfg, gamma=gamma),
        train_user=user_id,
        train_digest=training_digest(features),
        converged=solution.converged,
        iterations=solution.iterations,
    )
    logger.info(
        "Trained model user=%s rows=%d support=%d gamma=%.4g rho=%.6g iterations=%d",
        user_id, l, model.n_support, gamma, rho, solution.iterations,
    )
    return model


def require_converged(model: OcsvmModel) -> OcsvmModel:
    if not model.converged:
        raise NoConvergence(
            f"model for user={model.train_user} stopped at max_iter={model.config.max_iter}"
        )
    return model


def decision_scores(model: OcsvmModel, values: np.ndarray) -> np.ndarray:
    """Signed decision values for raw (n, 4) feature rows."""
    values = np.asarray(values, dtype=np.float64).reshape(-1, N_FEATURES)
    if not np.isfinite(values).all():
        raise NonFiniteInput("feature rows contain NaN or infinity")
    if len(values) == 0:
        return np.empty(0)
    scaled = model.scaler.transform(values)
    return _kernel_sums(scaled, model.support_vectors, model.alpha, model.gamma) - model.rho


def predict_labels(model: OcsvmModel, values: np.ndarray) -> np.ndarray:
    """+1 / -1 per row; a score of exactly 0 counts as genuine."""
    return np.where(decision_scores(model, values) >= 0.0, 1, -1)


def decision(model: OcsvmModel, x: DigraphFeatures) -> Verdict:
    score = float(decision_scores(model, x.as_array())[0])
    return Verdict(1 if score >= 0.0 else -1, score)


def predict_block(model: OcsvmModel, block: FeatureMatrix) -> List[Verdict]:
    scores = decision_scores(model, block.values)
    return [Verdict(1 if s >= 0.0 else -1, float(s)) for s in scores]


# --- model file ---

def _join(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def _body_lines(model: OcsvmModel) -> List[str]:
    cfg = model.config
    lines = [
        f"{MODEL_MAGIC} {MODEL_VERSION}",
        f"user={model.train_user}",
        f"nu={cfg.nu!r}",
        f"gamma={model.gamma!r}",
        f"rho={model.rho!r}",
        f"scaler_mean={_join(model.scaler.mean)}",
        f"scaler_std={_join(model.scaler.std)}",
        f"kkt_tol={cfg.kkt_tol!r}",
        f"max_iter={cfg.max_iter}",
        f"alpha_floor={cfg.alpha_floor!r}",
        f"iterations={model.iterations}",
        f"converged={'true' if model.converged else 'false'}",
        f"train_digest={model.train_digest}",
    ]
    lines.extend(
        _join([a, *sv]) for a, sv in zip(model.alpha, model.support_vectors)
    )
    return lines


def _digest(lines: List[str]) -> str:
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


def serialize_model(model: OcsvmModel) -> str:
    """
    Render a model in keydyn-model v1 text format.

    The digest line hashes every other line, so a truncated or edited file
    fails to parse.
    """
    lines = _body_lines(model)
    header_end = lines.index(f"train_digest={model.train_digest}") + 1
    lines.insert(header_end, f"digest={_digest(lines)}")
    return "\n".join(lines) + "\n"


def parse_model(source: Union[str, bytes]) -> OcsvmModel:
    """
    Parse a keydyn-model v1 file.

    Raises:
        VersionMismatch: Magic line carries another version
        CorruptModel: Truncation, digest mismatch or unparsable values
    """
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError:
            raise CorruptModel("model file is not valid UTF-8") from None

    lines = source.splitlines()
    if not lines:
        raise CorruptModel("empty model file")
    magic = lines[0].split()
    if len(magic) != 2 or magic[0] != MODEL_MAGIC:
        raise CorruptModel(f"not a model file: {lines[0][:40]!r}")
    if magic[1] != MODEL_VERSION:
        raise VersionMismatch(f"model format {magic[1]!r}, expected {MODEL_VERSION!r}")

    digest_at = next((n for n, line in enumerate(lines) if line.startswith("digest=")), None)
    if digest_at is None:
        raise CorruptModel("missing digest line")
    body = lines[:digest_at] + lines[digest_at + 1:]
    if _digest(body) != lines[digest_at][len("digest="):]:
        raise CorruptModel("digest mismatch (file truncated or modified)")

    header = {}
    for line in lines[1:digest_at]:
        key, sep, value = line.partition("=")
        if not sep:
            raise CorruptModel(f"bad header line {line!r}")
        header[key] = value

    try:
        scaler = Scaler(
            tuple(float(v) for v in header["scaler_mean"].split(",")),
            tuple(float(v) for v in header["scaler_std"].split(",")),
        )
        gamma = float(header["gamma"])
        config = OcsvmConfig(
            nu=float(header["nu"]),
            gamma=gamma,
            kkt_tol=float(header["kkt_tol"]),
            max_iter=int(header["max_iter"]),
            alpha_floor=float(header["alpha_floor"]),
        )
        rows = np.array(
            [[float(v) for v in line.split(",")] for line in lines[digest_at + 1:] if line],
            dtype=np.float64,
        ).reshape(-1, N_FEATURES + 1)
        model = OcsvmModel(
            support_vectors=rows[:, 1:].copy(),
            alpha=rows[:, 0].copy(),
            rho=float(header["rho"]),
            gamma=gamma,
            scaler=scaler,
            config=config,
            train_user=header["user"],
            train_digest=header["train_digest"],
            converged=header["converged"] == "true",
            iterations=int(header["iterations"]),
        )
    except (KeyError, ValueError) as e:
        raise CorruptModel(f"unreadable model field: {e}") from None
    if len(scaler.mean) != N_FEATURES or len(scaler.std) != N_FEATURES or model.n_support == 0:
        raise CorruptModel("model has wrong scaler width or no support vectors")
    return model
