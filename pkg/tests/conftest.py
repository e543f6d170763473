from pathlib import Path

import pytest

from graph_model import complete_graph, cuntz_graph, disjoint_leaves, load_graph
from kms_functional import KmsState

GRAPHS_DIR = Path(__file__).parent.parent / "graphs"

GOLDEN_DOCUMENT = {
    "vertices": ["v1", "v2"],
    "edges": [
        {"id": "e1", "src": "v1", "dst": "v1"},
        {"id": "e2", "src": "v1", "dst": "v2"},
        {"id": "e3", "src": "v2", "dst": "v1"},
    ],
}


@pytest.fixture
def graphs_dir():
    return GRAPHS_DIR


@pytest.fixture(scope="session")
def cuntz2():
    return cuntz_graph(2)


@pytest.fixture(scope="session")
def cuntz3():
    return cuntz_graph(3)


@pytest.fixture(scope="session")
def complete2():
    return complete_graph(2)


@pytest.fixture(scope="session")
def leaves3():
    return disjoint_leaves(3)


@pytest.fixture(scope="session")
def golden():
    """Vertex matrix [[1, 1], [1, 0]]: spectral radius is the golden ratio"""
    return load_graph(GOLDEN_DOCUMENT)


@pytest.fixture(scope="session")
def o2_state(cuntz2):
    return KmsState.critical(cuntz2)


@pytest.fixture(scope="session")
def o3_state(cuntz3):
    return KmsState.critical(cuntz3)


@pytest.fixture(scope="session")
def complete2_state(complete2):
    return KmsState.critical(complete2)


@pytest.fixture(scope="session")
def leaves3_state(leaves3):
    return KmsState.critical(leaves3)


@pytest.fixture(scope="session")
def golden_state(golden):
    return KmsState.critical(golden)
