"""Ground images and text into typed symbolic states, then plan over them."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ContradictionError,
    EmptyResult,
    InapplicableAction,
    InconsistentState,
    MissingCredentials,
    ParseError,
    SchemaViolation,
    SymbolizerError,
    TransportError,
    TypedError,
)
from .vocabulary import (  # noqa: E402
    Goal,
    GroundAtom,
    LiftedVocabulary,
    Literal,
    ObjectInstance,
    ObjectSet,
    Observation,
    PredicateSignature,
    SymbolicState,
    ground_atom_universe,
    goal_satisfied,
)
from .schema import compile_schema, validate_and_decode  # noqa: E402
from .simulator import ActionLabel, Instance, get_simulator, make_instance, replay  # noqa: E402
from .planner import PlanResult, SearchBudget, bfs_oracle, plan  # noqa: E402
from .pddl import emit_problem, parse_domain, parse_problem, plan_with_model  # noqa: E402
from .grounder import ChatClient, GrounderConfig, MockGrounder, VLMGrounder  # noqa: E402
from .eval import evaluate_grounding, evaluate_planning, set_f1  # noqa: E402
