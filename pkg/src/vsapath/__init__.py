"""Encoder-free hyperdimensional path retrieval over knowledge graphs.

Encodes relation paths as block-unitary hypervectors, retrieves Top-K
candidate paths by calibrated blockwise cosine similarity, and renders a
single adjudication prompt for an external language model. Ships with a
Monte Carlo harness validating the representation's concentration and
separation guarantees.
"""

from .adjudicate import (
    Adjudication,
    ClientContract,
    HttpLlmClient,
    MockLlmClient,
    PromptBundle,
    SYSTEM_PREAMBLE,
    adjudicate,
    mock_client,
    parse_response,
    render_prompt,
    verbalize_path,
)
from .codebook_io import load_codebook, save_codebook
from .errors import (
    ConfigError,
    DuplicateSymbolError,
    FamilyMismatchError,
    FormatError,
    ResponseParseError,
    TransportError,
    UnknownSymbolError,
    VsapathError,
    ZeroNormError,
)
from .kg import (
    Graph,
    IdfTable,
    Question,
    Schema,
    SchemaGraph,
    build_schema_graph,
    compute_idf,
    dump_questions,
    dump_triples,
    graph_from_triples,
    load_questions,
    load_triples,
    schema_key,
)
from .retrieve import (
    CandidatePath,
    PenaltyMode,
    RetrievalConfig,
    RetrievalResult,
    ScoredCandidate,
    enumerate_plans,
    instantiate_candidates,
    ranking_key,
    result_to_record,
    retrieve,
    score_candidates,
    select_query_plan,
    top_k,
)
from .synth import SynthBenchmark, SynthSpec, entity_type, generate_benchmark
from .vsa import (
    BlockFamily,
    Codebook,
    HdcConfig,
    Hypervector,
    OperatorFamily,
    Side,
    bind,
    encode_path,
    identity_hypervector,
    make_codebook,
    max_unitarity_defect,
    negate,
    project_embedding,
    similarity,
    unbind,
)

__version__ = "0.1.0"
