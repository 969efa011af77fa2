"""Hypothesis strategies: random rule documents, knowledge bases, contexts."""

import string

from hypothesis import strategies as st

from moca.dsl import Comment, KEYWORDS, RuleDocument
from moca.engine import EvaluationContext
from moca.kb import KnowledgeBase
from moca.model import (
    AgileElement,
    ContextFlag,
    CulturalMetric,
    CulturalProfile,
    ElementKind,
    ImpactCondition,
    ImpactRule,
    ImpactSign,
    Level,
    MetricPredicate,
    MetricSource,
    SOURCE_LEVELS,
)

_UPPER = string.ascii_uppercase
_LOWER = string.ascii_lowercase


def idents(first=string.ascii_letters, rest=string.ascii_letters + string.digits + "_",
           max_size=8):
    return st.builds(
        lambda head, tail: head + tail,
        st.sampled_from(first),
        st.text(alphabet=rest, max_size=max_size - 1),
    ).filter(lambda s: s not in KEYWORDS)


ident_st = idents()
lower_ident_st = idents(first=_LOWER, rest=_LOWER + string.digits + "_")
metric_ident_st = idents(first=_UPPER, rest=_UPPER + string.digits + "_", max_size=6)

# Strings the rule language can carry: anything but quotes and line breaks.
dsl_string_st = st.text(
    alphabet=st.characters(exclude_characters='"\n\r', exclude_categories=("Cs",)),
    max_size=30)

stated_level_st = st.sampled_from([Level.LOW, Level.HIGH])
sign_st = st.sampled_from([ImpactSign.POSITIVE, ImpactSign.NEGATIVE])

condition_term_st = st.one_of(
    st.builds(ContextFlag, lower_ident_st),
    st.builds(MetricPredicate, metric_ident_st, stated_level_st),
)

syntax_rule_st = st.builds(
    ImpactRule,
    id=ident_st,
    title=dsl_string_st,
    metric=metric_ident_st,
    stated_level=stated_level_st,
    sign=sign_st,
    element=lower_ident_st,
    condition=st.none() | ident_st,
    rationale=dsl_string_st,
)

syntax_condition_st = st.builds(
    ImpactCondition,
    id=ident_st,
    description=dsl_string_st,
    terms=st.lists(condition_term_st, min_size=1, max_size=4).map(tuple),
)

comment_st = st.builds(
    Comment,
    st.text(alphabet=st.characters(exclude_characters="\n\r",
                                   exclude_categories=("Cs",)),
            max_size=30))


def rule_documents(max_entries=10):
    entry = st.one_of(syntax_rule_st, syntax_condition_st, comment_st)
    return st.builds(lambda entries: RuleDocument(entries=tuple(entries)),
                     st.lists(entry, max_size=max_entries))


@st.composite
def knowledge_bases(draw, max_metrics=5, max_elements=6, max_conditions=3,
                    max_rules=10):
    metric_ids = draw(st.lists(metric_ident_st, min_size=1, max_size=max_metrics,
                               unique=True))
    metrics = []
    for metric_id in metric_ids:
        source = draw(st.sampled_from([MetricSource.HOFSTEDE, MetricSource.CVM]))
        metrics.append(CulturalMetric(
            id=metric_id, name=metric_id.title(), level=SOURCE_LEVELS[source],
            low_pole="low pole", high_pole="high pole", source=source))

    element_ids = draw(st.lists(lower_ident_st, min_size=1, max_size=max_elements,
                                unique=True))
    elements = []
    for element_id in element_ids:
        kind = draw(st.sampled_from([ElementKind.PRACTICE, ElementKind.ROLE]))
        elements.append(AgileElement(
            id=element_id, name=element_id, kind=kind,
            category="general" if kind is ElementKind.PRACTICE else None))

    conditions = []
    for i in range(draw(st.integers(0, max_conditions))):
        terms = []
        for metric_id in draw(st.lists(st.sampled_from(metric_ids), max_size=2,
                                       unique=True)):
            terms.append(MetricPredicate(metric_id, draw(stated_level_st)))
        for j in range(draw(st.integers(0 if terms else 1, 2))):
            terms.append(ContextFlag(f"flag_{i}_{j}"))
        conditions.append(ImpactCondition(
            id=f"C{i}", description=f"condition {i}", terms=tuple(terms)))

    condition_choices = [None] + [c.id for c in conditions]
    triples = [(m, e, c) for m in metric_ids for e in element_ids
               for c in condition_choices]
    chosen = draw(st.lists(st.sampled_from(triples), max_size=max_rules, unique=True))
    rules = []
    for i, (metric_id, element_id, condition_id) in enumerate(chosen):
        rules.append(ImpactRule(
            id=f"R{i}", title=f"rule {i}", metric=metric_id,
            stated_level=draw(stated_level_st), sign=draw(sign_st),
            element=element_id, condition=condition_id))

    return KnowledgeBase(
        metrics=tuple(metrics), elements=tuple(elements),
        conditions=tuple(conditions), rules=tuple(rules))


def kb_flags(kb):
    return sorted({term.flag for cond in kb.conditions for term in cond.terms
                   if isinstance(term, ContextFlag)})


def pinned_scenario(kb, rule, own_value):
    """Profile values and flags satisfying the rule's condition, with the
    rule's own metric pinned to own_value. None if the condition pins the
    same metric to an incompatible value."""
    values = {rule.metric: own_value}
    flags = set()
    if rule.condition is not None:
        condition = next(c for c in kb.conditions if c.id == rule.condition)
        for term in condition.terms:
            if isinstance(term, ContextFlag):
                flags.add(term.flag)
                continue
            pin = 100 if term.level is Level.HIGH else 0
            if term.metric in values and values[term.metric] != pin:
                return None
            values[term.metric] = pin
    return values, flags


@st.composite
def contexts_for(draw, kb, thresholds=(33, 67)):
    metric_ids = [m.id for m in kb.metrics]
    chosen = draw(st.lists(st.sampled_from(metric_ids), unique=True))
    values = {metric_id: draw(st.integers(0, 100)) for metric_id in chosen}
    flags = set(draw(st.lists(st.sampled_from(kb_flags(kb) or ["unused"]),
                              unique=True)))
    if draw(st.booleans()):
        flags.add("extra_context_flag")
    return EvaluationContext(
        profile=CulturalProfile("generated", values),
        flags=frozenset(flags),
        thresholds=thresholds,
    )


@st.composite
def kb_with_context(draw, **kb_kwargs):
    kb = draw(knowledge_bases(**kb_kwargs))
    return kb, draw(contexts_for(kb))
