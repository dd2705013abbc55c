"""Smooth relaxation of label rules over predicted probabilities.

Boolean structure is relaxed multiplicatively: a rule's violation degree is
the product of its antecedent literal values with the complements of its
consequent literal values. The degree lives in [0, 1], is polynomial in the
probabilities, and agrees with crisp evaluation at 0/1 vectors (1 exactly on
violating assignments, 0 on satisfied ones). Factors multiply in the rule's
stored literal order, so repeated evaluation is bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rules import Literal, Rule, RuleSet


@dataclass(frozen=True)
class PenaltyResult:
    """Violation degree of one rule at one probability vector, with its gradient."""

    value: float
    grad: np.ndarray


@dataclass(frozen=True)
class BatchPenaltyResult:
    """Per-sample violation degrees of one rule, with per-sample gradient rows."""

    values: np.ndarray  # (n,)
    grads: np.ndarray  # (n, n_labels)


def _check_probabilities(p) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if not np.isfinite(arr).all() or (arr < 0).any() or (arr > 1).any():
        raise ValueError("probabilities must lie in [0, 1]")
    return arr


def _check_rule_fits(rule: Rule, width: int) -> None:
    top = max(lit.label for lit in rule.antecedent + rule.consequent)
    if top >= width:
        raise ValueError(f"rule mentions label index {top} but vector has length {width}")


def literal_value(lit: Literal, p) -> float:
    """Relaxed truth value of a literal: p[label], or its complement when negated."""
    arr = _check_probabilities(p)
    if arr.ndim != 1:
        raise ValueError(f"probability vector must be 1-D, got shape {arr.shape}")
    if lit.label >= arr.shape[0]:
        raise ValueError(f"literal label {lit.label} outside vector of length {arr.shape[0]}")
    value = arr[lit.label]
    return float(1.0 - value) if lit.negated else float(value)


def _factors(rule: Rule, P: np.ndarray):
    """Per-factor values, d(factor)/d(probability) signs, and source columns.

    Factor order is the rule's stored order: antecedent then consequent.
    """
    values = []
    signs = []
    columns = []
    for lit in rule.antecedent:
        col = P[:, lit.label]
        values.append(1.0 - col if lit.negated else col)
        signs.append(-1.0 if lit.negated else 1.0)
        columns.append(lit.label)
    for lit in rule.consequent:
        col = P[:, lit.label]
        # factor is 1 - literal_value
        values.append(col if lit.negated else 1.0 - col)
        signs.append(1.0 if lit.negated else -1.0)
        columns.append(lit.label)
    return np.stack(values, axis=1), signs, columns


def _penalty_values(rule: Rule, P: np.ndarray) -> np.ndarray:
    factors, _, _ = _factors(rule, P)
    return np.multiply.reduce(factors, axis=1)


def _penalty_batch(rule: Rule, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    factors, signs, columns = _factors(rule, P)
    n, k = factors.shape
    prefix = np.ones((n, k + 1))
    np.multiply.accumulate(factors, axis=1, out=prefix[:, 1:])
    suffix = np.ones((n, k + 1))
    suffix[:, :k] = np.multiply.accumulate(factors[:, ::-1], axis=1)[:, ::-1]
    grad = np.zeros((n, P.shape[1]))
    # leave-one-out products; no division, factors may be exactly 0
    for j in range(k):
        grad[:, columns[j]] += signs[j] * (prefix[:, j] * suffix[:, j + 1])
    return prefix[:, k], grad


def rule_penalty(rule: Rule, p) -> PenaltyResult:
    """Violation degree of one rule and its exact gradient in each probability."""
    arr = _check_probabilities(p)
    if arr.ndim != 1:
        raise ValueError(f"probability vector must be 1-D, got shape {arr.shape}")
    _check_rule_fits(rule, arr.shape[0])
    values, grads = _penalty_batch(rule, arr[None, :])
    return PenaltyResult(float(values[0]), grads[0])


def rule_penalty_batch(rule: Rule, P) -> BatchPenaltyResult:
    """`rule_penalty` over a whole batch in one pass."""
    arr = _check_probabilities(P)
    if arr.ndim != 2:
        raise ValueError(f"probability matrix must be 2-D, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("empty batch")
    _check_rule_fits(rule, arr.shape[1])
    values, grads = _penalty_batch(rule, arr)
    return BatchPenaltyResult(values, grads)


def _check_batch(rs: RuleSet, P) -> np.ndarray:
    arr = _check_probabilities(P)
    if arr.ndim != 2 or arr.shape[1] != len(rs.vocabulary):
        raise ValueError(
            f"probability matrix has shape {arr.shape}, expected (n, {len(rs.vocabulary)})"
        )
    if arr.shape[0] == 0:
        raise ValueError("empty batch")
    return arr


def domain_loss(rs: RuleSet, P) -> float:
    """Weight-normalized mean violation degree over a batch of probability rows.

    Zero for an empty rule set; per-sample degrees are averaged over samples.
    """
    arr = _check_batch(rs, P)
    if not rs.rules:
        return 0.0
    total = np.zeros(arr.shape[0])
    weight_sum = 0.0
    for rule in rs.rules:
        total += rule.weight * _penalty_values(rule, arr)
        weight_sum += rule.weight
    return float(np.mean(total / weight_sum))


def domain_loss_grad(rs: RuleSet, P) -> np.ndarray:
    """Exact gradient of `domain_loss` with respect to every probability entry."""
    arr = _check_batch(rs, P)
    grad = np.zeros_like(arr)
    if not rs.rules:
        return grad
    weight_sum = 0.0
    for rule in rs.rules:
        _, g = _penalty_batch(rule, arr)
        grad += rule.weight * g
        weight_sum += rule.weight
    grad /= weight_sum * arr.shape[0]
    return grad
