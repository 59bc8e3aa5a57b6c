"""homeostat: persistence engine and simulator for bounded, lossy context channels.

The library has four layers:

- budget: fidelity mathematics (degradation curves, gate position,
  effective trigger, quality budget).
- memory / memfile: the two-layer persistent store and its lintable,
  checksummed file format.
- engine + compressors: the regulatory cycle with a human approval gate
  on every deep-memory rewrite.
- simulator: divergence experiments comparing append-only, retrieval
  and homeostatic architectures.

The api and cli modules expose the same surfaces over HTTP and the
command line.
"""

from .budget import (
    CurveShape,
    GateConfig,
    GateReport,
    LINEAR,
    ModelProfile,
    Segment,
    effective_fidelity,
    effective_trigger,
    fidelity_at,
    gate_position,
    gate_report,
    gate_unreachable,
    quality_budget,
)
from .compressors import (
    Compressor,
    CompressorFailure,
    ExternalCompressor,
    IdentityCompressor,
    TruncatingCompressor,
)
from .engine import (
    BudgetReport,
    CompressionProposal,
    Engine,
    EngineConfig,
    EngineEvent,
    EngineState,
    EventCode,
    Phase,
    PhaseError,
    UnknownProposalError,
    decide,
    ingest,
    new_state,
    propose,
    replay,
    status,
)
from .memory import (
    BYTES4,
    DeepMemory,
    MemoryStore,
    SessionRecord,
    Tokenizer,
    append_session,
    apply_rewrite,
    count_tokens,
    empty_store,
    get_tokenizer,
    mark_crystallized,
    register_tokenizer,
    shed,
)
from .memfile import LintFinding, LintReport, MemoryFileError, lint, load, render, save
from .simulator import (
    AppendOnly,
    ConstantGrowth,
    DivergenceSeries,
    Homeostatic,
    ParadoxComparison,
    RetrievalFragment,
    SeededRandomGrowth,
    SeriesRow,
    SimulationSpec,
    Workload,
    crossing_session,
    export_series,
    fig2_preset,
    paradox_experiment,
    read_series,
    render_series,
    run,
)

__version__ = "0.1.0"
