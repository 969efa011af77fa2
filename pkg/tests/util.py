"""Helpers for writing throwaway knowledge-base file sets."""

import json


MIN_METRICS = [
    {"id": "PDI", "name": "Power Distance", "level": "national",
     "low_pole": "equality", "high_pole": "hierarchy", "source": "hofstede"},
    {"id": "UAI", "name": "Uncertainty Avoidance", "level": "national",
     "low_pole": "tolerant", "high_pole": "structured", "source": "hofstede"},
]

MIN_ELEMENTS = [
    {"id": "daily_meeting", "name": "Daily Meeting", "kind": "practice",
     "category": "collaboration"},
    {"id": "coach", "name": "Coach", "kind": "role"},
]

MIN_RULES = "RULE R1: HIGH PDI IMPACTS daily_meeting NEGATIVE\n"


def write_kb(tmp_path, metrics=MIN_METRICS, elements=MIN_ELEMENTS,
             rules=MIN_RULES, manifest=None, profiles=None):
    """Write a KB file set under tmp_path; None skips a file entirely."""
    paths = []
    for name, payload in (("metrics.json", metrics), ("elements.json", elements),
                          ("manifest.json", manifest), ("profiles.json", profiles)):
        if payload is not None:
            path = tmp_path / name
            path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
            paths.append(path)
    if rules is not None:
        path = tmp_path / "rules.moca"
        path.write_text(rules, encoding="utf-8")
        paths.append(path)
    return paths
