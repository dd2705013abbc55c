"""Dataset files, rule-consistent synthesis, noise injection, and auditing.

Datasets are JSON Lines: the first line is a header {"labels": [...]}, then
one object per sample {"x": [...], "y": [...]} with an optional "y_clean"
holding the pre-noise labels. Which positions were flipped is recovered from
y/y_clean on load, so noise records survive a save/load round trip.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import jsonio
from .rules import LabelVocabulary, RuleSet, format_rule, reindex_ruleset, violated_rules, violation_matrix


class DatasetError(ValueError):
    """A dataset file or Dataset value failed validation."""


class SynthesisBudgetError(RuntimeError):
    """Rejection sampling could not find enough rule-consistent label patterns."""


@dataclass
class Dataset:
    """Feature rows with multi-hot labels; optionally the pre-noise labels too.

    `clean_Y` and `flips` travel together: `flips` lists exactly the
    positions where Y and clean_Y differ, in row-major order.
    """

    X: np.ndarray
    Y: np.ndarray
    names: LabelVocabulary
    clean_Y: np.ndarray | None = None
    flips: list[tuple[int, int]] | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.Y = np.asarray(self.Y)
        if self.X.ndim != 2 or self.Y.ndim != 2:
            raise DatasetError("X and Y must be 2-D")
        if not np.isfinite(self.X).all():
            raise DatasetError("features must be finite")
        if not ((self.Y == 0) | (self.Y == 1)).all():
            raise DatasetError("labels must be 0 or 1")
        self.Y = self.Y.astype(np.int64)
        if self.X.shape[0] != self.Y.shape[0]:
            raise DatasetError("X and Y row counts differ")
        if self.X.shape[0] < 1:
            raise DatasetError("dataset has no samples")
        if self.Y.shape[1] != len(self.names):
            raise DatasetError(
                f"Y has {self.Y.shape[1]} columns but the vocabulary has {len(self.names)} labels"
            )
        if (self.clean_Y is None) != (self.flips is None):
            raise DatasetError("clean labels and flip records must be present together")
        if self.clean_Y is not None:
            self.clean_Y = np.asarray(self.clean_Y)
            if self.clean_Y.shape != self.Y.shape:
                raise DatasetError("clean_Y and Y differ in shape")
            if not ((self.clean_Y == 0) | (self.clean_Y == 1)).all():
                raise DatasetError("clean labels must be 0 or 1")
            self.clean_Y = self.clean_Y.astype(np.int64)
            self.flips = [(int(i), int(j)) for i, j in self.flips]
            diff = {(int(i), int(j)) for i, j in np.argwhere(self.Y != self.clean_Y)}
            if len(self.flips) != len(diff) or set(self.flips) != diff:
                raise DatasetError("flip records do not match the Y/clean_Y differences")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]


# ---- file io ----


def save_dataset(ds: Dataset, path) -> None:
    """Write the JSONL form; output bytes depend only on the dataset's values."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(jsonio.dumps({"labels": list(ds.names.names)}) + "\n")
        for i in range(ds.n_samples):
            row = {
                "x": [float(v) for v in ds.X[i]],
                "y": [int(v) for v in ds.Y[i]],
            }
            if ds.clean_Y is not None:
                row["y_clean"] = [int(v) for v in ds.clean_Y[i]]
            fh.write(jsonio.dumps(row) + "\n")


def _parse_number_list(value, line_no: int, key: str, binary: bool) -> list:
    if not isinstance(value, list):
        raise DatasetError(f"line {line_no}: {key} must be a list")
    for v in value:
        if binary:
            if type(v) is not int or v not in (0, 1):
                raise DatasetError(f"line {line_no}: {key} entries must be 0 or 1")
        else:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise DatasetError(f"line {line_no}: {key} entries must be numbers")
    return value


def load_dataset(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip():
        raise DatasetError(f"{path}: missing label header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as err:
        raise DatasetError(f"line 1: invalid JSON: {err.msg}") from None
    if not isinstance(header, dict) or not isinstance(header.get("labels"), list):
        raise DatasetError("line 1: header must be an object with a 'labels' list")
    try:
        vocab = LabelVocabulary(header["labels"])
    except ValueError as err:
        raise DatasetError(f"line 1: bad label header: {err}") from None
    xs: list[list] = []
    ys: list[list] = []
    cleans: list[list] = []
    has_clean: bool | None = None
    n_features: int | None = None
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as err:
            raise DatasetError(f"line {line_no}: invalid JSON: {err.msg}") from None
        if not isinstance(row, dict) or "x" not in row or "y" not in row:
            raise DatasetError(f"line {line_no}: sample objects need 'x' and 'y'")
        x = _parse_number_list(row["x"], line_no, "x", binary=False)
        y = _parse_number_list(row["y"], line_no, "y", binary=True)
        if n_features is None:
            n_features = len(x)
        elif len(x) != n_features:
            raise DatasetError(f"line {line_no}: expected {n_features} features, got {len(x)}")
        if len(y) != len(vocab):
            raise DatasetError(f"line {line_no}: expected {len(vocab)} labels, got {len(y)}")
        row_has_clean = "y_clean" in row
        if has_clean is None:
            has_clean = row_has_clean
        elif row_has_clean != has_clean:
            raise DatasetError(f"line {line_no}: y_clean must appear on every sample or on none")
        if row_has_clean:
            y_clean = _parse_number_list(row["y_clean"], line_no, "y_clean", binary=True)
            if len(y_clean) != len(vocab):
                raise DatasetError(
                    f"line {line_no}: expected {len(vocab)} clean labels, got {len(y_clean)}"
                )
            cleans.append(y_clean)
        xs.append(x)
        ys.append(y)
    if not xs:
        raise DatasetError(f"{path}: dataset has no samples")
    Y = np.asarray(ys, dtype=np.int64)
    if has_clean:
        clean = np.asarray(cleans, dtype=np.int64)
        flips = [(int(i), int(j)) for i, j in np.argwhere(Y != clean)]
    else:
        clean, flips = None, None
    return Dataset(np.asarray(xs, dtype=np.float64), Y, vocab, clean, flips)


# ---- synthesis ----


def synthesize(seed: int, n_samples: int, n_features: int, rs: RuleSet, k_patterns: int) -> Dataset:
    """Clustered features with rule-consistent labels; clean by construction.

    Label patterns are drawn by rejection sampling until k_patterns distinct
    rule-consistent vectors are found (duplicates count as rejections; error
    after 10000 * k_patterns rejections). Randomness is keyed so a sample
    depends only on (seed, sample index): patterns and centroids come from
    the stream SeedSequence([seed, 0]) and sample i from
    SeedSequence([seed, 1, i]), which makes parallel generation equal to the
    serial one.
    """
    if k_patterns < 2:
        raise ValueError("k_patterns must be at least 2")
    if n_samples < 1 or n_features < 1:
        raise ValueError("n_samples and n_features must be at least 1")
    n_labels = len(rs.vocabulary)
    if n_labels > 20:
        raise ValueError("synthesis supports at most 20 labels")
    stream = np.random.default_rng([seed, 0])
    patterns: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    budget = 10_000 * k_patterns
    rejections = 0
    while len(patterns) < k_patterns:
        if rejections >= budget:
            raise SynthesisBudgetError(
                f"no {k_patterns} distinct rule-consistent label vectors "
                f"within {budget} rejections"
            )
        draw = tuple(int(v) for v in stream.integers(0, 2, size=n_labels))
        if draw in seen or violated_rules(rs, draw):
            rejections += 1
            continue
        seen.add(draw)
        patterns.append(draw)
    centroids = stream.uniform(-1.0, 1.0, size=(k_patterns, n_features))
    X = np.empty((n_samples, n_features))
    Y = np.empty((n_samples, n_labels), dtype=np.int64)
    for i in range(n_samples):
        rng_i = np.random.default_rng([seed, 1, i])
        pick = int(rng_i.integers(k_patterns))
        X[i] = centroids[pick] + rng_i.normal(0.0, 0.3, size=n_features)
        Y[i] = patterns[pick]
    return Dataset(X, Y, rs.vocabulary, clean_Y=Y.copy(), flips=[])


# ---- noise ----


def inject_noise(
    ds: Dataset, rho: float, seed: int, mode: str, rs: RuleSet | None = None
) -> Dataset:
    """Flip label bits at rate rho and remember exactly what was flipped.

    uniform: every (sample, label) position flips independently with
    probability rho. violating: with probability rho per sample, one bit is
    flipped, chosen uniformly among the single-bit flips that create at
    least one new rule violation (the sample is skipped when no such flip
    exists); this mode needs the rule set.
    """
    if not 0 <= rho <= 1:
        raise ValueError("rho must lie in [0, 1]")
    if mode not in ("uniform", "violating"):
        raise ValueError(f"noise mode must be 'uniform' or 'violating', got {mode!r}")
    if ds.flips:
        raise DatasetError("dataset already carries noise records")
    rng = np.random.default_rng(seed)
    Y = ds.Y.copy()
    flips: list[tuple[int, int]]
    if mode == "uniform":
        flip = rng.random(Y.shape) < rho
        Y[flip] = 1 - Y[flip]
        flips = [(int(i), int(j)) for i, j in np.argwhere(flip)]
    else:
        if rs is None:
            raise ValueError("violating mode needs a rule set")
        rs = reindex_ruleset(rs, ds.names)
        flips = []
        for i in range(Y.shape[0]):
            if rng.random() >= rho:
                continue
            before = set(violated_rules(rs, Y[i]))
            candidates = []
            for j in range(Y.shape[1]):
                trial = Y[i].copy()
                trial[j] = 1 - trial[j]
                if set(violated_rules(rs, trial)) - before:
                    candidates.append(j)
            if not candidates:
                continue
            j = candidates[int(rng.integers(len(candidates)))]
            Y[i, j] = 1 - Y[i, j]
            flips.append((i, j))
    return Dataset(ds.X, Y, ds.names, clean_Y=ds.Y.copy(), flips=flips)


# ---- audit ----


@dataclass
class AuditReport:
    """Hard-violation counts of a dataset's labels against a rule set."""

    per_rule: list[dict]  # {"rule": index, "text": str, "count": int}
    per_sample: list[dict]  # {"sample": index, "violated": [rule indices]}, violating samples only
    violating_samples: int
    fraction: float

    def as_dict(self) -> dict:
        return {
            "per_rule": self.per_rule,
            "per_sample": self.per_sample,
            "violating_samples": self.violating_samples,
            "fraction": self.fraction,
        }

    def to_text(self, max_samples: int = 100) -> str:
        lines = [
            f"violating samples: {self.violating_samples} "
            f"(fraction {jsonio.format_float(self.fraction)})",
            "per-rule violation counts:",
        ]
        for row in self.per_rule:
            lines.append(f"  [{row['rule']}] {row['text']}: {row['count']}")
        if self.per_sample:
            shown = self.per_sample[:max_samples]
            suffix = f" (first {max_samples})" if len(self.per_sample) > max_samples else ""
            lines.append(f"violating samples{suffix}:")
            for row in shown:
                rule_list = ", ".join(str(r) for r in row["violated"])
                lines.append(f"  sample {row['sample']}: rules [{rule_list}]")
        return "\n".join(lines)


def audit(ds: Dataset, rs: RuleSet) -> AuditReport:
    """Count hard rule violations in a dataset's labels (vocabularies matched by name)."""
    rs = reindex_ruleset(rs, ds.names)
    violations = violation_matrix(rs, ds.Y)
    per_rule = [
        {"rule": r, "text": format_rule(rule, ds.names), "count": int(violations[:, r].sum())}
        for r, rule in enumerate(rs.rules)
    ]
    per_sample = [
        {"sample": int(i), "violated": [int(r) for r in np.flatnonzero(violations[i])]}
        for i in np.flatnonzero(violations.any(axis=1))
    ]
    count = len(per_sample)
    return AuditReport(per_rule, per_sample, count, count / ds.n_samples)
