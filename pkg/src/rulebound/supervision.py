"""Supervision bookkeeping: which labels to trust, mask, or self-correct.

Labels implicated in rule violations of the originally given supervision get
flagged once, up front. Masking modes drop flagged entries from the loss;
the relabel schedule later re-admits an entry when the model grows confident
about it, permanently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rules import RuleSet, violation_matrix

CORRECTION_MODES = ("off", "mask_only", "relabel")

ORIGIN_GIVEN = 0
ORIGIN_MASKED = 1
ORIGIN_SELF_CORRECTED = 2


@dataclass
class SupervisionState:
    """Per-entry training targets plus where each target came from.

    `mask` is 1 where the entry participates in the loss; an entry is masked
    exactly when its origin is ORIGIN_MASKED.
    """

    targets: np.ndarray  # float64 entries, each 0.0 or 1.0
    mask: np.ndarray  # uint8
    flags: np.ndarray  # uint8, rule-implicated positions of the original labels
    origin: np.ndarray  # uint8 origin codes

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=np.uint8)
        self.flags = np.asarray(self.flags, dtype=np.uint8)
        self.origin = np.asarray(self.origin, dtype=np.uint8)
        shape = self.targets.shape
        if not (self.mask.shape == self.flags.shape == self.origin.shape == shape):
            raise ValueError("supervision arrays must share one shape")
        if not ((self.targets == 0) | (self.targets == 1)).all():
            raise ValueError("targets must be 0 or 1")
        if not ((self.mask == 0) == (self.origin == ORIGIN_MASKED)).all():
            raise ValueError("mask and origin disagree")

    def copy(self) -> "SupervisionState":
        return SupervisionState(
            self.targets.copy(), self.mask.copy(), self.flags.copy(), self.origin.copy()
        )

    @property
    def n_masked(self) -> int:
        return int((self.mask == 0).sum())


def flag_inconsistent(rs: RuleSet, Y) -> np.ndarray:
    """Flag matrix: entry (i, j) is 1 when label j appears (either polarity)
    in at least one rule violated by row i."""
    violations = violation_matrix(rs, Y)
    flags = np.zeros(violations.shape[:1] + (len(rs.vocabulary),), dtype=np.uint8)
    for r, rule in enumerate(rs.rules):
        rows = violations[:, r]
        if rows.any():
            for label in rule.mentioned_labels():
                flags[rows, label] = 1
    return flags


def init_supervision(Y, F, mode: str) -> SupervisionState:
    """Initial state: targets are the given labels; masking modes drop flagged entries."""
    if mode not in CORRECTION_MODES:
        raise ValueError(f"correction mode must be one of {CORRECTION_MODES}, got {mode!r}")
    Y = np.asarray(Y)
    F = np.asarray(F)
    if Y.shape != F.shape:
        raise ValueError(f"labels {Y.shape} and flags {F.shape} differ in shape")
    targets = Y.astype(np.float64)
    mask = np.ones(Y.shape, dtype=np.uint8)
    origin = np.full(Y.shape, ORIGIN_GIVEN, dtype=np.uint8)
    if mode != "off":
        hit = F == 1
        mask[hit] = 0
        origin[hit] = ORIGIN_MASKED
    return SupervisionState(targets, mask, F.astype(np.uint8), origin)


def correct_labels(state: SupervisionState, P, tau: float) -> tuple[SupervisionState, int]:
    """Adopt confident predictions at still-masked entries.

    A masked entry becomes 1 when its probability is at least tau, 0 when at
    most 1 - tau, and rejoins the loss; corrections are permanent. Returns
    the updated state and how many entries were corrected.
    """
    if not 0.5 < tau < 1:
        raise ValueError(f"tau must lie in (0.5, 1), got {tau}")
    P = np.asarray(P, dtype=np.float64)
    if P.shape != state.targets.shape:
        raise ValueError(f"predictions {P.shape} and targets {state.targets.shape} differ")
    masked = state.origin == ORIGIN_MASKED
    up = masked & (P >= tau)
    down = masked & (P <= 1.0 - tau)
    hit = up | down
    n_corrected = int(hit.sum())
    if n_corrected == 0:
        return state, 0
    out = state.copy()
    out.targets[up] = 1.0
    out.targets[down] = 0.0
    out.mask[hit] = 1
    out.origin[hit] = ORIGIN_SELF_CORRECTED
    return out, n_corrected
