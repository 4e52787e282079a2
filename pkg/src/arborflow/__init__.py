"""Grammar-driven workflow artifacts with per-actor views.

A process is a grammar over task sorts; a run of it is a tree growing toward
one of the grammar's complete scenarios.  Each actor works on a projection of
that tree restricted to the sorts it may read, and the engine merges edited
projections back into the shared artifact.
"""

from .engine import (
    CaseRuntime,
    CaseState,
    Peer,
    ReadyTask,
    RouteMode,
    RoutingDecision,
    configure_peer,
    initiate_case,
    route,
)
from .enumeration import (
    DEFAULT_TARGET_CAP,
    TargetSet,
    ensure_axiom_visibility,
    generate_targets,
    recursive_sorts,
)
from .errors import (
    AddressError,
    ArborflowError,
    EmptyGuidesError,
    EngineError,
    ExplosionLimitError,
    GuideChoiceRequiredError,
    GuideMismatchError,
    LockedBudError,
    NonConformingArtifactError,
    NoReplicaError,
    NotABudError,
    NotAccreditedError,
    NotSingletonError,
    RecursiveGrammarError,
    ScriptStepError,
    SpecValidationError,
    StaleReplicaError,
    UnknownActorError,
    UnknownCaseError,
    UnknownProductionError,
)
from .expansion import (
    GuidePolicy,
    GuideSet,
    expand,
    find_guides,
    normalize_bud_states,
    select_guide,
    three_way_merge,
)
from .model import (
    Accreditation,
    Address,
    Annotation,
    Artifact,
    Grammar,
    NodeState,
    ProcessSpec,
    Production,
    Sort,
    SortKind,
    ValidationReport,
    bud,
    conforms,
    developed,
    is_complete,
    is_prefix,
    is_structuring,
    is_update,
    replace_at,
    strip_states,
    strip_structuring,
    validate_spec,
)
from .projection import (
    Forest,
    LocalGrammar,
    StructuringContext,
    canonical_shape,
    project_artifact,
    project_artifact_rooted,
    project_grammar,
)
from .serialize import (
    FormatError,
    artifact_dumps,
    artifact_from_dict,
    artifact_loads,
    artifact_to_dict,
    canonical_dumps,
    production_from_dict,
    production_to_dict,
    spec_dumps,
    spec_from_dict,
    spec_loads,
    spec_to_dict,
    to_compact,
)
from .simulate import ScenarioScript, ScriptStep, SimTrace, script_from_dict, simulate

__version__ = "0.1.0"
