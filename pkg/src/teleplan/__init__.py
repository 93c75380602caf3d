"""Upper bounds on the bipartite entanglement of formation of multipartite pure
states from minimum-cost teleportation plans."""

from .errors import (DimensionLimitError, IsometryError, NumericError, ParseError,
                     SearchBudgetExceeded, StateError, TeleplanError)
from .statekit import (CutEntropyTable, DensityMatrix, IsometrySpec, StateTensor, apply_isometry,
                       cut_entropy_table, epsilon_toast, ghz, make_state, pair_graph_state,
                       random_state, reduced_density, schmidt_state, toast, von_neumann_entropy)
from .stateparse import elaborate, loads, parse, render
from .plansearch import (CellLayout, SearchConfig, TeleportPlan, TeleportStep, naive_cost, p1,
                         p1_oracle, p2, p3, prime_split, route_search, verify_plan)

__version__ = "0.1.0"

__all__ = [
    "DimensionLimitError", "IsometryError", "NumericError", "ParseError", "SearchBudgetExceeded",
    "StateError", "TeleplanError",
    "CutEntropyTable", "DensityMatrix", "IsometrySpec", "StateTensor", "apply_isometry",
    "cut_entropy_table", "epsilon_toast", "ghz", "make_state", "pair_graph_state", "random_state",
    "reduced_density", "schmidt_state", "toast", "von_neumann_entropy",
    "elaborate", "loads", "parse", "render",
    "CellLayout", "SearchConfig", "TeleportPlan", "TeleportStep", "naive_cost", "p1", "p1_oracle",
    "p2", "p3", "prime_split", "route_search", "verify_plan",
]
