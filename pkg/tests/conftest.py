import os

import hypothesis
import pytest

from mazzaroth.dag import Block, DagStore
from oracles import name_id

hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=500, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# Edges consistent with every set listed in the worked example:
# parent(F) = {E, D}, past(F) = {Genesis, A..E}, anticone(F) = {H}, tips = {H, F}
EXAMPLE_DAG = {
    "Genesis": [],
    "A": ["Genesis"],
    "B": ["A"],
    "C": ["A"],
    "D": ["B", "C"],
    "E": ["C"],
    "F": ["E", "D"],
    "H": ["B"],
}


def named_store(spec: dict) -> tuple[DagStore, dict]:
    ids = {k: name_id(k) for k in spec}
    st = DagStore()
    for k, ps in spec.items():
        st.add(Block(ids[k], tuple(ids[p] for p in ps)))
    return st, ids


@pytest.fixture
def example():
    return named_store(EXAMPLE_DAG)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)
