"""Shared fixtures: cached desk instances, their oracles, and the criterion report."""

import numpy as np
import pytest

import admmtune as at

# Per-kind seeds for the pinned benchmark instances used across the suite.
ACCEPT_SEEDS = {
    "lp": 0,
    "qp": 0,
    "lad": 18,
    "huber": 0,
    "bp": 10,
    "lasso": 4,
    "tv": 8,
    "sics": 0,
}

_instances = {}
_criterion_lines = []


def _desk_instance(kind):
    inst = _instances.get(kind)
    if inst is None:
        inst = at.generate(kind, profile="desk", seed=ACCEPT_SEEDS[kind])
        _instances[kind] = inst
    return inst


def _desk_oracle(kind):
    inst = _desk_instance(kind)
    if inst.oracle is None:
        at.compute_oracle(inst)
    return inst.oracle


@pytest.fixture(scope="session")
def desk():
    """Callable kind -> cached desk ProblemInstance at its pinned seed."""
    return _desk_instance


@pytest.fixture(scope="session")
def oracle():
    """Callable kind -> cached high-accuracy OracleSolution for the desk instance."""
    return _desk_oracle


@pytest.fixture(scope="session")
def record_criterion():
    """Callable (label, passed, detail) -> None; lines echo in the terminal summary."""

    def _record(label, passed, detail=""):
        verdict = "PASS" if passed else "FAIL"
        line = f"{label}: {verdict}" + (f"  [{detail}]" if detail else "")
        _criterion_lines.append(line)
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _criterion_lines:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for line in _criterion_lines:
        terminalreporter.write_line(line)
