"""Online selection over a stream of sparse feature columns.

Columns are buffered into blocks of ``block_size``.  Each full block (and
the trailing partial block) is completed by latent factor analysis and then
scanned column by column:

* marginal p-value against the label decides Relevant / FuzzyRelevant /
  Irrelevant, with the relevant cut-off ``mu`` derived from the block's
  missing rate;
* a relevant column is discarded if some subset of the selected set renders
  it conditionally independent of the label; otherwise it is admitted and
  the existing members are re-checked for redundancy;
* fuzzy-relevant columns are scored by neighborhood dependency degree and
  held as candidates until the end of the block, when the best of them are
  merged into the selected set.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .citests import conditioning_subsets, fisher_z_test, g2_test
from .errors import DivergenceError, ValidationError
from .fuzzy import AlphaBand, TrapezoidParams, fuzzy_alpha
from .lfa import FeatureBlock, LfaConfig, complete, train
from .nrs import DEFAULT_RADIUS, NeighborhoodSpace

log = logging.getLogger(__name__)

# p-values above this are independent whatever the fuzzy threshold
INDEPENDENCE_LEVEL = 0.1


class Verdict(str, enum.Enum):
    RELEVANT = "relevant"
    FUZZY_RELEVANT = "fuzzy"
    IRRELEVANT = "irrelevant"


class Admission(str, enum.Enum):
    RELEVANCE = "relevance"
    FUZZY_MERGE = "fuzzy"


@dataclass(frozen=True)
class SelectorConfig:
    block_size: int = 15
    lfa: LfaConfig = field(default_factory=LfaConfig)
    band: AlphaBand = field(default_factory=AlphaBand)
    trapezoid: TrapezoidParams = field(default_factory=TrapezoidParams)
    k_max: int = 3
    radius: float = DEFAULT_RADIUS
    seed: int = 0
    discrete: bool = False
    # False replaces observed cells by their low-rank reconstruction as well
    keep_observed: bool = True

    def __post_init__(self):
        if self.block_size < 1:
            raise ValidationError(f"block size must be >= 1, got {self.block_size}")
        if self.k_max < 1:
            raise ValidationError(f"max conditioning size must be >= 1, got {self.k_max}")
        if not (self.radius >= 0 and math.isfinite(self.radius)):
            raise ValidationError(f"radius must be a finite non-negative number, got {self.radius}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class SelectedFeature:
    column_index: int
    values: np.ndarray
    admitted_at_block: int
    via: Admission
    p: float
    gamma: float | None = None


@dataclass(eq=False)
class FuzzyCandidate:
    column_index: int
    values: np.ndarray
    p: float
    gamma: float


@dataclass
class TraceRecord:
    index: int
    block: int
    verdict: str
    p: float
    mu: float
    gamma: float | None = None
    decision: str = ""
    witness: list[int] | None = None
    removed: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class SelectionState:
    selected: list[SelectedFeature] = field(default_factory=list)
    fuzzy: list[FuzzyCandidate] = field(default_factory=list)
    blocks_processed: int = 0
    trace: list[TraceRecord] = field(default_factory=list)

    @property
    def indices(self) -> list[int]:
        return [f.column_index for f in self.selected]

    def check_invariants(self):
        idx = self.indices
        if len(set(idx)) != len(idx):
            raise AssertionError(f"duplicate indices in selected set: {idx}")
        if set(idx) & {c.column_index for c in self.fuzzy}:
            raise AssertionError("a column is both selected and a fuzzy candidate")


def classify_relevance(p: float, mu: float) -> Verdict:
    if p <= mu:
        return Verdict.RELEVANT
    if p <= INDEPENDENCE_LEVEL:
        return Verdict.FUZZY_RELEVANT
    return Verdict.IRRELEVANT


def _ci_p(x, labels, S, discrete: bool) -> float:
    if discrete:
        return g2_test(x, labels, S).p_value
    return fisher_z_test(x, labels, S, n=len(labels)).p_value


def relevance_p(column, labels, discrete: bool = False) -> float:
    """Marginal p-value of the column against the label (empty conditioning set)."""
    return _ci_p(column, np.asarray(labels, dtype=np.float64), (), discrete)


def redundancy_check_new(candidate, selected: Sequence[SelectedFeature], labels, k_max: int,
                         discrete: bool = False):
    """Search the selected set for a subset that screens ``candidate`` off the label.

    Returns
    -------
    (bool, tuple of int or None)
        ``(True, None)`` to keep; ``(False, witness_indices)`` to discard.
    """
    y = np.asarray(labels, dtype=np.float64)
    for subset in conditioning_subsets(list(selected), k_max):
        if _ci_p(candidate, y, [f.values for f in subset], discrete) > INDEPENDENCE_LEVEL:
            return False, tuple(f.column_index for f in subset)
    return True, None


def redundancy_prune_existing(selected: list[SelectedFeature], labels, k_max: int,
                              protect: int | None = None, discrete: bool = False):
    """Drop members made redundant by the rest of the set.

    Members are visited in admission order and removals apply immediately.
    The member with column index ``protect`` (the one just admitted) is never
    itself a removal candidate.

    Returns
    -------
    (list of SelectedFeature, list of (SelectedFeature, witness))
    """
    y = np.asarray(labels, dtype=np.float64)
    current = list(selected)
    removed = []
    for member in list(current):
        if member.column_index == protect:
            continue
        others = [f for f in current if f is not member]
        for subset in conditioning_subsets(others, k_max):
            if _ci_p(member.values, y, [f.values for f in subset], discrete) > INDEPENDENCE_LEVEL:
                current.remove(member)
                removed.append((member, tuple(f.column_index for f in subset)))
                break
    return current, removed


def score_fuzzy(candidate, labels, radius: float = DEFAULT_RADIUS) -> float:
    return NeighborhoodSpace(candidate, radius=radius, scale=True).dependency_degree(labels)


def merge_fuzzy(state: SelectionState) -> SelectionState:
    """Move the best fuzzy candidates into the selected set and clear the candidates.

    Up to ``max(1, len(selected) // 2)`` candidates are merged, ranked by
    dependency degree (descending), then p-value, then column index.
    """
    if state.fuzzy:
        n_add = max(1, len(state.selected) // 2)
        ranked = sorted(state.fuzzy, key=lambda c: (-c.gamma, c.p, c.column_index))
        for cand in ranked[:n_add]:
            state.selected.append(
                SelectedFeature(cand.column_index, cand.values, state.blocks_processed,
                                Admission.FUZZY_MERGE, cand.p, cand.gamma)
            )
            for rec in reversed(state.trace):
                if rec.index == cand.column_index:
                    rec.decision = "merged"
                    break
    state.fuzzy = []
    return state


def block_lfa_config(cfg: SelectorConfig, block_number: int) -> LfaConfig:
    """Per-block LFA config whose init seed is derived from the run seed and block number."""
    seed = int(np.random.SeedSequence([cfg.seed, cfg.lfa.init_seed, block_number]).generate_state(1)[0])
    return replace(cfg.lfa, init_seed=seed)


def process_block(block: FeatureBlock, state: SelectionState, cfg: SelectorConfig,
                  labels, column_indices: Sequence[int] | None = None) -> SelectionState:
    """Complete one block and run relevance, redundancy and fuzzy analysis on its columns.

    ``column_indices`` names the stream index of each block column; it defaults
    to ``block.start_index + j``.
    """
    if block.width < 1:
        raise ValidationError("block must hold at least one column")
    y = np.asarray(labels)
    if column_indices is None:
        column_indices = range(block.start_index, block.start_index + block.width)
    block_no = state.blocks_processed
    mu = fuzzy_alpha(block.missing_rate, cfg.band, cfg.trapezoid)
    lfa_cfg = block_lfa_config(cfg, block_no)
    try:
        factors = train(block, lfa_cfg)
    except DivergenceError as exc:
        raise DivergenceError(exc.eta, exc.epoch, block_index=block_no) from None
    completed = complete(block, factors, keep_observed=cfg.keep_observed)
    log.debug("block %d: %d epochs, missing rate %.3f, mu %.4f",
              block_no, factors.epochs, block.missing_rate, mu)

    for j, col_idx in enumerate(column_indices):
        values = completed.values[:, j].copy()
        p = relevance_p(values, y, cfg.discrete)
        verdict = classify_relevance(p, mu)
        rec = TraceRecord(int(col_idx), block_no, verdict.value, p, mu)
        state.trace.append(rec)
        if verdict is Verdict.RELEVANT:
            keep, witness = redundancy_check_new(values, state.selected, y, cfg.k_max, cfg.discrete)
            if not keep:
                rec.decision = "redundant"
                rec.witness = list(witness)
                continue
            rec.decision = "selected"
            state.selected.append(
                SelectedFeature(int(col_idx), values, block_no, Admission.RELEVANCE, p)
            )
            state.selected, removed = redundancy_prune_existing(
                state.selected, y, cfg.k_max, protect=int(col_idx), discrete=cfg.discrete
            )
            rec.removed = [{"index": f.column_index, "witness": list(w)} for f, w in removed]
        elif verdict is Verdict.FUZZY_RELEVANT:
            gamma = score_fuzzy(values, y, cfg.radius)
            rec.gamma = gamma
            rec.decision = "candidate"
            state.fuzzy.append(FuzzyCandidate(int(col_idx), values, p, gamma))
        else:
            rec.decision = "discarded"

    merge_fuzzy(state)
    state.blocks_processed += 1
    return state


def _blocks(stream: Iterable, block_size: int):
    buf_idx, buf_cols = [], []
    for idx, col in stream:
        buf_idx.append(int(idx))
        buf_cols.append(np.asarray(col, dtype=np.float64))
        if len(buf_cols) == block_size:
            yield buf_idx, buf_cols
            buf_idx, buf_cols = [], []
    if buf_cols:
        yield buf_idx, buf_cols


def run(stream: Iterable, labels, cfg: SelectorConfig = SelectorConfig()) -> SelectionState:
    """Consume ``(index, column)`` pairs and return the final selection state.

    The returned state carries the per-column trace.
    """
    y = np.asarray(labels)
    if np.unique(y).size < 2:
        raise ValidationError("selection needs at least 2 label classes")
    state = SelectionState()
    seen = False
    for idx, cols in _blocks(stream, cfg.block_size):
        seen = True
        for c in cols:
            if c.shape != y.shape:
                raise ValidationError(f"column length {c.shape[0]} != label count {y.shape[0]}")
        block = FeatureBlock.from_columns(idx[0], cols)
        process_block(block, state, cfg, y, column_indices=idx)
        state.check_invariants()
    if not seen:
        raise ValidationError("stream yielded no columns")
    return state


def selection_to_dict(state: SelectionState, cfg: SelectorConfig) -> dict:
    return {
        "selected": [
            {"index": f.column_index, "via": f.via.value, "p": f.p, "gamma": f.gamma}
            for f in state.selected
        ],
        "blocks": state.blocks_processed,
        "config": cfg.to_dict(),
    }
