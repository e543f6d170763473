#!/usr/bin/env python3
"""
Create sample graph documents for the runner script and manual checks
"""

import json
from pathlib import Path

from graph_model import (
    complete_graph,
    cuntz_graph,
    cycle_graph,
    disjoint_leaves,
    graph_to_document,
    load_graph,
    vertex_matrix,
)

GRAPHS_DIR = Path(__file__).parent / "graphs"


def sample_documents():
    """Sample graphs keyed by file stem"""
    documents = {
        "cuntz2": graph_to_document(cuntz_graph(2)),
        "cuntz3": graph_to_document(cuntz_graph(3)),
        "complete2": graph_to_document(complete_graph(2)),
        "leaves3": graph_to_document(disjoint_leaves(3)),
        "polygon3": graph_to_document(cycle_graph(3)),
    }
    # v2 has no outgoing edge; the analysis must reject it
    documents["sink"] = {
        "vertices": ["v1", "v2"],
        "edges": [{"id": "e1", "src": "v1", "dst": "v2"}, {"id": "e2", "src": "v1", "dst": "v1"}],
    }
    return documents


def create_test_graphs(directory: Path = GRAPHS_DIR):
    """Write every sample graph as <name>.json"""
    directory.mkdir(parents=True, exist_ok=True)
    try:
        documents = sample_documents()
        for name, document in documents.items():
            path = directory / f"{name}.json"
            path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")

        print(f"✅ Created {len(documents)} sample graphs in {directory}")
        print(f"\n{'Graph':<12} {'Vertices':<10} {'Edges':<8} {'Vertex matrix'}")
        print("-" * 60)
        for name, document in documents.items():
            matrix = vertex_matrix(load_graph(document)).to_list()
            print(f"{name:<12} {len(document['vertices']):<10} {len(document['edges']):<8} {matrix}")
    except OSError as e:
        print(f"❌ Error creating sample graphs: {e}")


if __name__ == "__main__":
    create_test_graphs()
