"""
Evaluation harness: the initial train/test protocol and the k-fold protocol.

Every genuine user's model is streamed against every user's test data,
including the user's own. Impostor runs that exhaust the data are false
accepts; genuine runs that get rejected are false rejects.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .authenticator import (
    AuthConfig,
    DecisionTrace,
    RunClass,
    classify_outcome,
    decide_blocks,
    split_blocks,
)
from .errors import InsufficientData, InvalidConfig
from .events import KeystrokeLog, Phase, slice_strokes, stroke_count
from .features import FeatureMatrix, extract_features
from .ocsvm import GAMMA_SCALE, OcsvmConfig, OcsvmModel, train


logger = logging.getLogger(__name__)

CohortLogs = Mapping[Phase, Mapping[str, KeystrokeLog]]

PROTOCOL_INITIAL = "initial"
PROTOCOL_KFOLD = "kfold"
AVG_BLOCKS_RULE = "mean_over_all_runs"
REJECT_RULE = "intruder_fraction>=threshold"


class FoldStrategy(str, Enum):
    ALL_FOLDS = "all"
    SINGLE_RANDOM_FOLD = "single"


@dataclass(frozen=True)
class InitialProtocol:
    train_strokes: int = 1500
    test_strokes: int = 500
    block_sizes: Tuple[int, ...] = (30, 50, 80, 100)
    threshold: float = 0.65

    def __post_init__(self):
        if self.train_strokes < 2 or self.test_strokes < 2:
            raise InvalidConfig("train_strokes and test_strokes must be at least 2")
        if not self.block_sizes:
            raise InvalidConfig("block_sizes must not be empty")
        for size in self.block_sizes:
            AuthConfig(size, self.threshold)
            if size > self.test_strokes:
                raise InvalidConfig(f"block size {size} exceeds test_strokes {self.test_strokes}")


@dataclass(frozen=True)
class KFoldProtocol:
    """
    Attributes:
        n_folds: Number of equal contiguous folds per user
        block_size: Strokes per authentication block
        threshold: Rejection threshold
        fold_strategy: Every fold in turn, or one seeded fold per user
        seed: Drives the fold shuffle
        total_strokes: Strokes per user and phase split into folds
    """

    n_folds: int = 5
    block_size: int = 80
    threshold: float = 0.65
    fold_strategy: FoldStrategy = FoldStrategy.ALL_FOLDS
    seed: int = 0
    total_strokes: int = 2000

    def __post_init__(self):
        AuthConfig(self.block_size, self.threshold)
        if self.n_folds < 2:
            raise InvalidConfig(f"n_folds must be at least 2, got {self.n_folds}")
        if self.total_strokes % self.n_folds:
            raise InvalidConfig(f"{self.total_strokes} strokes do not split into {self.n_folds} equal folds")
        if self.fold_size < self.block_size:
            raise InvalidConfig(f"fold of {self.fold_size} strokes cannot hold a {self.block_size}-stroke block")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidConfig(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def fold_size(self) -> int:
        return self.total_strokes // self.n_folds


@dataclass(frozen=True)
class RunRecord:
    phase: str
    protocol: str
    param: int
    fold: int
    model_user: str
    test_user: str
    outcome: RunClass
    blocks: int

    @property
    def is_error(self) -> bool:
        return self.outcome in (RunClass.FALSE_ACCEPT, RunClass.FALSE_REJECT)


@dataclass(frozen=True)
class RunMatrix:
    """Every (model_user, test_user, fold) run of one report cell."""

    phase: str
    protocol: str
    param: int
    records: Tuple[RunRecord, ...]
    traces: Tuple[DecisionTrace, ...]

    def count(self, outcome: RunClass) -> int:
        return sum(1 for r in self.records if r.outcome is outcome)


@dataclass(frozen=True)
class ReportCell:
    phase: str
    protocol: str
    param: int
    far: float
    frr: float
    avg_blocks: float
    impostor_runs: int
    genuine_runs: int


@dataclass(frozen=True)
class EvalReport:
    config: Tuple[Tuple[str, str], ...]
    cells: Tuple[ReportCell, ...]
    confusions: Tuple[RunRecord, ...] = ()
    notes: Tuple[str, ...] = ()

    def config_value(self, key: str) -> Optional[str]:
        return dict(self.config).get(key)

    def cell(self, phase: str, protocol: str, param: int) -> ReportCell:
        for cell in self.cells:
            if (cell.phase, cell.protocol, cell.param) == (phase, protocol, param):
                return cell
        raise KeyError(f"no cell for phase={phase} protocol={protocol} param={param}")


@dataclass(frozen=True)
class Finding:
    """Outcome of one expected-trend check; offending lists the cells that break it."""

    scope: str
    metric: str
    expectation: str
    passed: bool
    offending: Tuple[str, ...] = ()


# --- run grid ---

def _train_task(task: Tuple[str, FeatureMatrix, OcsvmConfig]) -> OcsvmModel:
    user_id, features, cfg = task
    return train(features, cfg, user_id)


def train_models(
    tasks: Sequence[Tuple[str, FeatureMatrix]],
    cfg: OcsvmConfig,
    workers: int = 1,
) -> List[OcsvmModel]:
    """Train one model per (user_id, features) task; result order matches task order."""
    jobs = [(user_id, features, cfg) for user_id, features in tasks]
    if workers <= 1 or len(jobs) <= 1:
        return [_train_task(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_train_task, jobs))


def build_run_matrix(
    phase: Phase,
    protocol: str,
    param: int,
    models: Sequence[Tuple[int, OcsvmModel]],
    test_blocks: Mapping[Tuple[str, int], Sequence[FeatureMatrix]],
    auth_cfg: AuthConfig,
) -> RunMatrix:
    """
    Stream every test user's blocks through every model.

    Args:
        phase: Phase the data belongs to
        protocol: Protocol name recorded on each run
        param: Block size (initial) or fold count (kfold)
        models: (fold, model) pairs, in (model_user, fold) order
        test_blocks: Block features keyed by (test_user, fold)
        auth_cfg: Decision loop configuration

    Returns:
        RunMatrix ordered by (model_user, fold, test_user)
    """
    test_users = sorted({user for user, _ in test_blocks})
    records, traces = [], []
    for fold, model in models:
        for test_user in test_users:
            trace = decide_blocks(model, test_blocks[(test_user, fold)], auth_cfg, test_user)
            outcome = classify_outcome(trace, model.train_user == test_user)
            traces.append(trace)
            records.append(RunRecord(
                phase.value, protocol, param, fold, model.train_user, test_user,
                outcome, trace.blocks_consumed,
            ))
    return RunMatrix(phase.value, protocol, param, tuple(records), tuple(traces))


def summarize(matrix: RunMatrix) -> ReportCell:
    """Aggregate FAR, FRR and average blocks for one cell."""
    false_accepts = matrix.count(RunClass.FALSE_ACCEPT)
    impostor_runs = false_accepts + matrix.count(RunClass.TRUE_REJECT)
    false_rejects = matrix.count(RunClass.FALSE_REJECT)
    genuine_runs = false_rejects + matrix.count(RunClass.TRUE_ACCEPT)
    blocks = [r.blocks for r in matrix.records]
    return ReportCell(
        phase=matrix.phase,
        protocol=matrix.protocol,
        param=matrix.param,
        far=false_accepts / impostor_runs if impostor_runs else 0.0,
        frr=false_rejects / genuine_runs if genuine_runs else 0.0,
        avg_blocks=float(np.mean(blocks)) if blocks else 0.0,
        impostor_runs=impostor_runs,
        genuine_runs=genuine_runs,
    )


def _eligible_users(
    logs: Mapping[str, KeystrokeLog],
    needed: int,
    phase: Phase,
    notes: List[str],
) -> List[str]:
    users = []
    for user_id in sorted(logs):
        count = stroke_count(logs[user_id])
        if count < needed:
            logger.warning("Skipping user=%s phase=%s: %d strokes < %d", user_id, phase.value, count, needed)
            notes.append(f"skipped phase={phase.value} user={user_id} strokes={count} needed={needed}")
        else:
            users.append(user_id)
    if len(users) < 2:
        raise InsufficientData(f"phase={phase.value} has {len(users)} eligible users, need at least 2")
    return users


def _ordered_phases(cohort_logs: CohortLogs) -> List[Phase]:
    return [phase for phase in Phase if phase in cohort_logs]


def _ocsvm_config_echo(cfg: OcsvmConfig) -> List[Tuple[str, str]]:
    gamma = cfg.gamma if cfg.gamma == GAMMA_SCALE else repr(float(cfg.gamma))
    return [
        ("ocsvm.nu", repr(cfg.nu)),
        ("ocsvm.gamma", gamma),
        ("ocsvm.kkt_tol", repr(cfg.kkt_tol)),
        ("ocsvm.max_iter", str(cfg.max_iter)),
        ("ocsvm.alpha_floor", repr(cfg.alpha_floor)),
        ("auth.reject_rule", REJECT_RULE),
        ("auth.drop_partial_final_block", "true"),
        ("avg_blocks", AVG_BLOCKS_RULE),
    ]


# --- protocols ---

def run_initial(
    cohort_logs: CohortLogs,
    protocol: InitialProtocol,
    cfg: OcsvmConfig,
    workers: int = 1,
) -> EvalReport:
    """
    Train on each user's first train_strokes, test on the following test_strokes.

    Args:
        cohort_logs: Logs keyed by phase, then user_id
        protocol: Split sizes, block sizes and threshold
        cfg: One-class SVM configuration
        workers: Processes used for model training

    Returns:
        EvalReport with one cell per (phase, block size)

    Raises:
        InsufficientData: A phase has fewer than 2 eligible users
    """
    needed = protocol.train_strokes + protocol.test_strokes
    cells, confusions, notes = [], [], []

    for phase in _ordered_phases(cohort_logs):
        logs = cohort_logs[phase]
        users = _eligible_users(logs, needed, phase, notes)
        tasks = [
            (user_id, extract_features(slice_strokes(logs[user_id], 0, protocol.train_strokes)))
            for user_id in users
        ]
        models = [(0, model) for model in train_models(tasks, cfg, workers)]
        test_logs = {
            user_id: slice_strokes(logs[user_id], protocol.train_strokes, protocol.test_strokes)
            for user_id in users
        }

        for block_size in protocol.block_sizes:
            auth_cfg = AuthConfig(block_size, protocol.threshold)
            blocks = {(user_id, 0): split_blocks(log, auth_cfg) for user_id, log in test_logs.items()}
            matrix = build_run_matrix(phase, PROTOCOL_INITIAL, block_size, models, blocks, auth_cfg)
            cell = summarize(matrix)
            cells.append(cell)
            confusions.extend(r for r in matrix.records if r.is_error)
            logger.info(
                "initial phase=%s block=%d far=%.4f frr=%.4f avg_blocks=%.4f",
                phase.value, block_size, cell.far, cell.frr, cell.avg_blocks,
            )

    config = [("protocol", PROTOCOL_INITIAL)] + _ocsvm_config_echo(cfg) + [
        ("auth.threshold", repr(protocol.threshold)),
        ("initial.train_strokes", str(protocol.train_strokes)),
        ("initial.test_strokes", str(protocol.test_strokes)),
        ("initial.block_sizes", ",".join(str(b) for b in protocol.block_sizes)),
    ] + [
        (f"max_blocks_per_run.{b}", str(protocol.test_strokes // b)) for b in protocol.block_sizes
    ]
    return EvalReport(tuple(config), tuple(cells), tuple(confusions), tuple(notes))


def fold_order(protocol: KFoldProtocol, phase: Phase, user_index: int) -> List[int]:
    """Seeded fold permutation for one user; its first entry is the single random fold."""
    phase_index = list(Phase).index(phase)
    rng = np.random.default_rng(np.random.SeedSequence([protocol.seed, phase_index, user_index]))
    return [int(f) for f in rng.permutation(protocol.n_folds)]


def fold_training_features(log: KeystrokeLog, protocol: KFoldProtocol, test_fold: int) -> FeatureMatrix:
    """Features of every fold except test_fold; digraphs never bridge the removed fold."""
    size = protocol.fold_size
    segments = [(0, test_fold * size), ((test_fold + 1) * size, protocol.total_strokes)]
    return FeatureMatrix.concat([
        extract_features(slice_strokes(log, start, end - start))
        for start, end in segments if end - start >= 2
    ])


def run_kfold_sweep(
    cohort_logs: CohortLogs,
    protocols: Sequence[KFoldProtocol],
    cfg: OcsvmConfig,
    workers: int = 1,
) -> EvalReport:
    """
    Run the k-fold protocol for several fold counts into one report.

    All protocols must agree on everything except n_folds.
    """
    if not protocols:
        raise InvalidConfig("at least one k-fold protocol is required")
    first = protocols[0]
    for other in protocols[1:]:
        if (other.block_size, other.threshold, other.fold_strategy, other.seed, other.total_strokes) != (
            first.block_size, first.threshold, first.fold_strategy, first.seed, first.total_strokes
        ):
            raise InvalidConfig("k-fold protocols in one sweep may only differ in n_folds")

    auth_cfg = AuthConfig(first.block_size, first.threshold)
    cells, confusions, notes = [], [], []

    for phase in _ordered_phases(cohort_logs):
        logs = cohort_logs[phase]
        users = _eligible_users(logs, first.total_strokes, phase, notes)
        for protocol in protocols:
            plan = []
            for index, user_id in enumerate(users):
                order = fold_order(protocol, phase, index)
                folds = sorted(order) if protocol.fold_strategy is FoldStrategy.ALL_FOLDS else order[:1]
                plan.extend((user_id, fold) for fold in folds)

            tasks = [
                (user_id, fold_training_features(logs[user_id], protocol, fold)) for user_id, fold in plan
            ]
            trained = train_models(tasks, cfg, workers)
            models = [(fold, model) for (_, fold), model in zip(plan, trained)]

            needed_folds = sorted({fold for _, fold in plan})
            blocks = {
                (user_id, fold): split_blocks(
                    slice_strokes(logs[user_id], fold * protocol.fold_size, protocol.fold_size), auth_cfg
                )
                for user_id in users for fold in needed_folds
            }
            matrix = build_run_matrix(phase, PROTOCOL_KFOLD, protocol.n_folds, models, blocks, auth_cfg)
            cell = summarize(matrix)
            cells.append(cell)
            confusions.extend(r for r in matrix.records if r.is_error)
            logger.info(
                "kfold phase=%s folds=%d far=%.4f frr=%.4f avg_blocks=%.4f",
                phase.value, protocol.n_folds, cell.far, cell.frr, cell.avg_blocks,
            )

    config = [("protocol", PROTOCOL_KFOLD)] + _ocsvm_config_echo(cfg) + [
        ("auth.threshold", repr(first.threshold)),
        ("kfold.n_folds", ",".join(str(p.n_folds) for p in protocols)),
        ("kfold.block_size", str(first.block_size)),
        ("kfold.fold_strategy", first.fold_strategy.value),
        ("kfold.seed", str(first.seed)),
        ("kfold.total_strokes", str(first.total_strokes)),
    ] + [
        (f"max_blocks_per_run.{p.n_folds}", str(p.fold_size // p.block_size)) for p in protocols
    ]
    return EvalReport(tuple(config), tuple(cells), tuple(confusions), tuple(notes))


def run_kfold(
    cohort_logs: CohortLogs,
    protocol: KFoldProtocol,
    cfg: OcsvmConfig,
    workers: int = 1,
) -> EvalReport:
    """
    Cross-validated evaluation with block_size-stroke blocks.

    Under ALL_FOLDS each fold is the test fold once (the rest trains); under
    SINGLE_RANDOM_FOLD one seeded fold per user is tested. Impostor streams
    use the same fold index of the other user.
    """
    return run_kfold_sweep(cohort_logs, [protocol], cfg, workers)


# --- findings ---

def _monotone_finding(scope: str, metric: str, cells: Sequence[ReportCell], increasing: bool) -> Finding:
    offending = []
    for before, after in zip(cells, cells[1:]):
        a, b = getattr(before, metric), getattr(after, metric)
        if (b < a) if increasing else (b > a):
            offending.append(f"{before.param}:{a!r}->{after.param}:{b!r}")
    expectation = "non-decreasing" if increasing else "non-increasing"
    return Finding(scope, metric, expectation, not offending, tuple(offending))


def trend_check(report: EvalReport) -> List[Finding]:
    """
    Check the block-size trade-off: FAR should not fall and FRR should not
    rise as blocks grow.

    Returns:
        Two findings (far, frr) per phase of the initial protocol
    """
    findings = []
    by_phase: Dict[str, List[ReportCell]] = {}
    for cell in report.cells:
        if cell.protocol == PROTOCOL_INITIAL:
            by_phase.setdefault(cell.phase, []).append(cell)
    for phase, cells in by_phase.items():
        cells = sorted(cells, key=lambda c: c.param)
        findings.append(_monotone_finding(phase, "far", cells, increasing=True))
        findings.append(_monotone_finding(phase, "frr", cells, increasing=False))
    return findings


def phase_comparison(report: EvalReport) -> List[Finding]:
    """
    Check whether free use of the computer authenticates at least as well as
    prompted typing: Freestyle FAR and avg_blocks no higher than Prompted, per
    (protocol, param).
    """
    prompted = {(c.protocol, c.param): c for c in report.cells if c.phase == Phase.PROMPTED.value}
    freestyle = {(c.protocol, c.param): c for c in report.cells if c.phase == Phase.FREESTYLE.value}
    findings = []
    for key in sorted(prompted.keys() & freestyle.keys()):
        scope = f"{key[0]}/{key[1]}"
        for metric in ("far", "avg_blocks"):
            a, b = getattr(prompted[key], metric), getattr(freestyle[key], metric)
            offending = () if b <= a else (f"prompted:{a!r}<freestyle:{b!r}",)
            findings.append(Finding(scope, metric, "freestyle<=prompted", not offending, offending))
    return findings


def all_passed(findings: Iterable[Finding]) -> bool:
    return all(f.passed for f in findings)
