"""Knowledge-graph completion with LLM-induced ontologies and topology hints."""

__version__ = "0.1.0"

from .graphs import (  # noqa: F401
    KnowledgeGraph,
    MissingSlot,
    QueryTask,
    Triple,
    inverse_relation,
    load_triples,
    merge,
    neighbors,
    nodes_by_category,
    sample_pairs,
)
from .ontology import (  # noqa: F401
    CategoryAssignment,
    Ontology,
    assign_node_categories,
    build_ontology,
    parse_category_response,
    verify_ontology,
)
from .paths import (  # noqa: F401
    GroundedPath,
    OntologyPath,
    enumerate_ontology_paths,
    format_ontology_path,
    ground_paths,
    infer_missing_category,
)
from .prompts import (  # noqa: F401
    PromptVariant,
    RankedAnswer,
    parse_ranked_answer,
    parse_single_winner,
    render_prompt,
    render_triplet,
)
