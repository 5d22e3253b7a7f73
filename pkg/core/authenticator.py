"""
Block-based continuous authentication loop.

The test stream is cut into consecutive blocks of block_size strokes. Each
block yields block_size - 1 digraphs (none crossing a block boundary). A block
is rejected when the fraction of its digraphs labeled -1 reaches the
threshold; the run stops at the first rejection or when the blocks run out.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

from .errors import InsufficientData, InvalidConfig, MalformedLine
from .events import KeystrokeLog, slice_strokes, stroke_count
from .features import FeatureMatrix, extract_features
from .ocsvm import OcsvmModel, predict_labels


logger = logging.getLogger(__name__)


class Decision(str, Enum):
    CONTINUE = "Continue"
    REJECT = "Reject"


class Outcome(str, Enum):
    REJECTED = "Rejected"
    DATA_EXHAUSTED = "DataExhausted"


class RunClass(str, Enum):
    TRUE_REJECT = "TrueReject"
    FALSE_ACCEPT = "FalseAccept"
    FALSE_REJECT = "FalseReject"
    TRUE_ACCEPT = "TrueAccept"


@dataclass(frozen=True)
class AuthConfig:
    """
    Attributes:
        block_size: Strokes per block
        threshold: Intruder-label fraction at or above which a block is rejected
        drop_partial_final_block: Ignore trailing strokes that do not fill a block
    """

    block_size: int = 80
    threshold: float = 0.65
    drop_partial_final_block: bool = True

    def __post_init__(self):
        if self.block_size < 2:
            raise InvalidConfig(f"block_size must be at least 2, got {self.block_size}")
        if not 0.0 < self.threshold < 1.0:
            raise InvalidConfig(f"threshold must be in (0, 1), got {self.threshold}")


@dataclass(frozen=True)
class BlockVerdict:
    block_index: int
    intruder_fraction: float
    decision: Decision


@dataclass(frozen=True)
class DecisionTrace:
    model_user: str
    test_user: str
    verdicts: Tuple[BlockVerdict, ...]
    outcome: Outcome

    @property
    def blocks_consumed(self) -> int:
        return len(self.verdicts)


def split_blocks(test_log: KeystrokeLog, cfg: AuthConfig) -> List[FeatureMatrix]:
    """
    Cut a test log into per-block feature matrices.

    Raises:
        InsufficientData: The log holds fewer strokes than one block
    """
    total = stroke_count(test_log)
    if total < cfg.block_size:
        raise InsufficientData(
            f"test log of user={test_log.user_id} has {total} strokes, block needs {cfg.block_size}"
        )
    blocks = []
    for start in range(0, total, cfg.block_size):
        length = min(cfg.block_size, total - start)
        if length < cfg.block_size and cfg.drop_partial_final_block:
            break
        blocks.append(extract_features(slice_strokes(test_log, start, length)))
    return blocks


def block_verdict(block_index: int, labels: np.ndarray, threshold: float) -> BlockVerdict:
    fraction = float(np.count_nonzero(labels == -1)) / len(labels) if len(labels) else 0.0
    decision = Decision.REJECT if fraction >= threshold else Decision.CONTINUE
    return BlockVerdict(block_index, fraction, decision)


def decide_blocks(
    model: OcsvmModel,
    blocks: Sequence[FeatureMatrix],
    cfg: AuthConfig,
    test_user: str = "",
) -> DecisionTrace:
    """Run the decision loop over pre-extracted blocks; stops at the first Reject."""
    verdicts = []
    for index, block in enumerate(blocks):
        verdict = block_verdict(index, predict_labels(model, block.values), cfg.threshold)
        verdicts.append(verdict)
        logger.debug(
            "model=%s test=%s block=%d intruder_fraction=%.4f %s",
            model.train_user, test_user, index, verdict.intruder_fraction, verdict.decision.value,
        )
        if verdict.decision is Decision.REJECT:
            return DecisionTrace(model.train_user, test_user, tuple(verdicts), Outcome.REJECTED)
    return DecisionTrace(model.train_user, test_user, tuple(verdicts), Outcome.DATA_EXHAUSTED)


def run_stream(model: OcsvmModel, test_log: KeystrokeLog, cfg: AuthConfig) -> DecisionTrace:
    """
    Stream a test log through a model block by block.

    Args:
        model: Genuine user's trained model
        test_log: Keystrokes to authenticate
        cfg: Block size, threshold and partial-block policy

    Returns:
        DecisionTrace ending in Rejected or DataExhausted

    Raises:
        InsufficientData: Fewer strokes than one block
    """
    trace = decide_blocks(model, split_blocks(test_log, cfg), cfg, test_log.user_id)
    logger.info(
        "Run model=%s test=%s outcome=%s blocks=%d",
        trace.model_user, trace.test_user, trace.outcome.value, trace.blocks_consumed,
    )
    return trace


def classify_outcome(trace: DecisionTrace, ground_truth_same_user: bool) -> RunClass:
    rejected = trace.outcome is Outcome.REJECTED
    if ground_truth_same_user:
        return RunClass.FALSE_REJECT if rejected else RunClass.TRUE_ACCEPT
    return RunClass.TRUE_REJECT if rejected else RunClass.FALSE_ACCEPT


def rejection_window_chars(trace: DecisionTrace, cfg: AuthConfig) -> int:
    """Keystrokes typed before the run was decided (blocks consumed x block size)."""
    return trace.blocks_consumed * cfg.block_size


# --- trace dump ---

TRACE_HEADER = "block_index,intruder_fraction,decision"


def format_trace(trace: DecisionTrace) -> str:
    lines = [TRACE_HEADER]
    lines.extend(
        f"{v.block_index},{v.intruder_fraction!r},{v.decision.value}" for v in trace.verdicts
    )
    lines.append(f"outcome={trace.outcome.value} blocks={trace.blocks_consumed}")
    return "\n".join(lines) + "\n"


def parse_trace(source: str, model_user: str = "", test_user: str = "") -> DecisionTrace:
    lines = [line.strip() for line in source.splitlines() if line.strip()]
    if len(lines) < 2 or lines[0] != TRACE_HEADER:
        raise MalformedLine("line=1 missing trace header " + TRACE_HEADER)
    verdicts = []
    try:
        for line in lines[1:-1]:
            index, fraction, decision = line.split(",")
            verdicts.append(BlockVerdict(int(index), float(fraction), Decision(decision)))
        outcome_field, blocks_field = lines[-1].split()
        outcome = Outcome(outcome_field.removeprefix("outcome="))
        blocks = int(blocks_field.removeprefix("blocks="))
    except ValueError as e:
        raise MalformedLine(f"line={len(lines)} unreadable trace: {e}") from None
    if blocks != len(verdicts):
        raise MalformedLine(f"line={len(lines)} trailer says {blocks} blocks, found {len(verdicts)}")
    return DecisionTrace(model_user, test_user, tuple(verdicts), outcome)
