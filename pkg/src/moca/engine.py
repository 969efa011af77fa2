"""Evaluation: fire rules against a profile, aggregate, explain, diff, export.

Per element, each targeting rule lands in exactly one bucket:

* indeterminate -- the profile has no value for the rule's metric;
* dormant       -- the value falls in the MEDIUM band, which contributes
                   nothing (such rules are omitted from the assessment);
* gated         -- the rule's condition has an unsatisfied term;
* fired         -- contributes polarity x level sign, always +1 or -1.

Contributions add up to an integer score that maps onto a five-point
qualitative label. The integer is an ordering device; the per-rule trace
is always carried alongside it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Sequence

from .kb import KnowledgeBase
from .model import (
    ContextFlag,
    CulturalProfile,
    DEFAULT_THRESHOLDS,
    ImpactCondition,
    ImpactRule,
    ImpactSign,
    Level,
    check_thresholds,
    level_of,
    level_sign,
    normalize,
)


class ConditionStatus(Enum):
    SATISFIED = "satisfied"
    NOT_APPLICABLE = "not_applicable"


class ImpactLabel(Enum):
    STRONGLY_NEGATIVE = "strongly_negative"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"
    POSITIVE = "positive"
    STRONGLY_POSITIVE = "strongly_positive"


def label_for(score: int) -> ImpactLabel:
    """Five-point label: <= -2, -1, 0, +1, >= +2."""
    if score <= -2:
        return ImpactLabel.STRONGLY_NEGATIVE
    if score == -1:
        return ImpactLabel.NEGATIVE
    if score == 0:
        return ImpactLabel.NEUTRAL
    if score == 1:
        return ImpactLabel.POSITIVE
    return ImpactLabel.STRONGLY_POSITIVE


@dataclass(frozen=True)
class EvaluationContext:
    """One evaluation scenario: profile, context flags, thresholds, selection.

    Unknown flags are permitted (conditions simply match or not), so one
    flag set can serve several knowledge bases. An unset element selection
    means every matrix-eligible element.
    """

    profile: CulturalProfile
    flags: frozenset[str] = frozenset()
    thresholds: tuple[int, int] = DEFAULT_THRESHOLDS
    elements: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "flags", frozenset(self.flags))
        object.__setattr__(self, "thresholds", check_thresholds(self.thresholds))
        if self.elements is not None:
            object.__setattr__(self, "elements", tuple(self.elements))


@dataclass(frozen=True)
class Contribution:
    """One fired rule: value = polarity x level sign, so always +1 or -1."""

    rule_id: str
    value: int
    fired_level: Level
    condition_status: ConditionStatus


@dataclass(frozen=True)
class Assessment:
    """Evaluation result for one element."""

    element: str
    contributions: tuple[Contribution, ...]
    score: int
    label: ImpactLabel
    indeterminate_rules: tuple[str, ...]
    gated_rules: tuple[str, ...]


@dataclass(frozen=True)
class ElementDiff:
    """Score movement for one element between two scenarios."""

    element: str
    score_a: int
    score_b: int
    delta: int
    rules_changed: tuple[str, ...]


@dataclass(frozen=True)
class MatrixEntry:
    rule_id: str
    stated_level: Level
    sign: ImpactSign
    condition: str | None


@dataclass(frozen=True)
class MatrixExport:
    """The full (metric x matrix-eligible element) grid.

    Rows keep metric declaration order; columns are element-id sorted.
    Every cell key exists, covered or not, so the cell count is always
    |metrics| x |eligible elements| independent of how many rules exist.
    """

    metrics: tuple[str, ...]
    elements: tuple[str, ...]
    cells: Mapping[tuple[str, str], tuple[MatrixEntry, ...]]

    def __post_init__(self):
        object.__setattr__(self, "cells", MappingProxyType(dict(self.cells)))

    def cell(self, metric_id: str, element_id: str) -> tuple[MatrixEntry, ...]:
        return self.cells[(metric_id, element_id)]

    @property
    def cell_count(self) -> int:
        return len(self.cells)


def _condition_satisfied(
    condition: ImpactCondition,
    values: Mapping[str, int],
    flags: frozenset[str],
    thresholds: tuple[int, int],
) -> bool:
    # Conjunctive terms; a predicate over a missing metric is unsatisfied,
    # and a MEDIUM value matches neither LOW nor HIGH.
    for term in condition.terms:
        if isinstance(term, ContextFlag):
            if term.flag not in flags:
                return False
        else:
            value = values.get(term.metric)
            if value is None or level_of(value, thresholds) is not term.level:
                return False
    return True


_INDETERMINATE = ("indeterminate",)
_DORMANT = ("dormant",)
_GATED = ("gated",)


def _rule_status(kb: KnowledgeBase, rule: ImpactRule, ctx: EvaluationContext) -> tuple:
    """Bucket one rule. Fired status carries its value and level."""
    value = ctx.profile.values.get(rule.metric)
    if value is None:
        return _INDETERMINATE
    level = level_of(value, ctx.thresholds)
    if level is Level.MEDIUM:
        return _DORMANT
    if rule.condition is not None:
        condition = kb.condition(rule.condition)
        if not _condition_satisfied(condition, ctx.profile.values, ctx.flags,
                                    ctx.thresholds):
            return _GATED
        status = ConditionStatus.SATISFIED
    else:
        status = ConditionStatus.NOT_APPLICABLE
    contribution = normalize(rule).polarity * level_sign(level)
    return ("fired", contribution, level, status)


def evaluate_element(kb: KnowledgeBase, ctx: EvaluationContext,
                     element_id: str) -> Assessment:
    """Assess one element. Raises UnknownEntityError for unknown ids."""
    kb.element(element_id)
    contributions: list[Contribution] = []
    indeterminate: list[str] = []
    gated: list[str] = []
    for rule in kb.rules_for(element_id):
        status = _rule_status(kb, rule, ctx)
        if status is _INDETERMINATE:
            indeterminate.append(rule.id)
        elif status is _GATED:
            gated.append(rule.id)
        elif status[0] == "fired":
            contributions.append(Contribution(
                rule_id=rule.id, value=status[1],
                fired_level=status[2], condition_status=status[3]))
    score = sum(c.value for c in contributions)
    return Assessment(
        element=element_id,
        contributions=tuple(contributions),
        score=score,
        label=label_for(score),
        indeterminate_rules=tuple(indeterminate),
        gated_rules=tuple(gated),
    )


def _selected_elements(kb: KnowledgeBase,
                       selection: Sequence[str] | None) -> tuple[str, ...]:
    if selection is None:
        return tuple(e.id for e in kb.rule_eligible_elements)
    for element_id in selection:
        kb.element(element_id)
    return tuple(sorted(set(selection)))


def evaluate(kb: KnowledgeBase, ctx: EvaluationContext) -> tuple[Assessment, ...]:
    """Assess the context's element selection (default: every matrix-eligible
    element), in element-id order."""
    return tuple(evaluate_element(kb, ctx, element_id)
                 for element_id in _selected_elements(kb, ctx.elements))


def diff(kb: KnowledgeBase, ctx_a: EvaluationContext,
         ctx_b: EvaluationContext) -> tuple[ElementDiff, ...]:
    """Compare two scenarios element by element.

    delta is score_b - score_a; rules_changed lists every rule whose
    bucket or contribution differs between the scenarios. The element set
    comes from ctx_a's selection, falling back to ctx_b's, then to all
    matrix-eligible elements.
    """
    selection = ctx_a.elements if ctx_a.elements is not None else ctx_b.elements
    diffs = []
    for element_id in _selected_elements(kb, selection):
        a = evaluate_element(kb, ctx_a, element_id)
        b = evaluate_element(kb, ctx_b, element_id)
        changed = [rule.id for rule in kb.rules_for(element_id)
                   if _rule_status(kb, rule, ctx_a) != _rule_status(kb, rule, ctx_b)]
        diffs.append(ElementDiff(
            element=element_id,
            score_a=a.score,
            score_b=b.score,
            delta=b.score - a.score,
            rules_changed=tuple(changed),
        ))
    return tuple(diffs)


def export_matrix(kb: KnowledgeBase) -> MatrixExport:
    """Lay every rule into its (metric, element) cell of the full grid.

    Rules targeting elements outside the matrix (artifacts, techniques,
    tools) have no cell and are omitted; the loader warns about them.
    """
    metric_ids = tuple(m.id for m in kb.metrics)
    element_ids = tuple(e.id for e in kb.rule_eligible_elements)
    cells: dict[tuple[str, str], list[MatrixEntry]] = {
        (m, e): [] for m in metric_ids for e in element_ids}
    for rule in sorted(kb.rules, key=lambda r: r.id):
        key = (rule.metric, rule.element)
        if key in cells:
            cells[key].append(MatrixEntry(
                rule_id=rule.id, stated_level=rule.stated_level,
                sign=rule.sign, condition=rule.condition))
    return MatrixExport(
        metrics=metric_ids,
        elements=element_ids,
        cells={key: tuple(entries) for key, entries in cells.items()},
    )
