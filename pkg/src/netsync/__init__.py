"""Scale-free synchronization protocols for heterogeneous linear agent
networks: structural analysis, pre-compensator synthesis, protocol assembly
and deterministic closed-loop simulation."""

from .errors import (
    AssumptionError,
    DegenerateSystemError,
    DimensionError,
    DivergenceError,
    GainDesignError,
    NetsyncError,
    PlacementError,
    ScenarioParseError,
    UnsupportedAgentError,
)
from .graphs import (
    DiGraph,
    RootSet,
    contains_spanning_tree,
    expanded_laplacian,
    graph_from_edges,
    is_rootset_connected,
    laplacian,
    random_admissible_graph,
    read_edge_list,
    reduced_laplacian,
    write_edge_list,
)
from .homogenization import (
    HomogenizationCertificate,
    Precompensator,
    compose_with_precompensator,
    design_precompensator,
    markov_parameters,
    verify_homogenization,
)
from .lti import (
    LtiAgent,
    SpectralReport,
    analyze,
    infinite_zero_order,
    invariant_zeros,
    is_hurwitz,
    is_right_invertible,
    pbh_test,
    place_poles,
    spectrum,
)
from .protocols import (
    ProtocolRealization,
    build_output_protocol,
    build_regulated_protocol,
    design_gains,
    realization_to_text,
    realizations_equal,
)
from .scenario_io import (
    bundled_scenario_path,
    load_scenario,
    parse_scenario,
    resolve_scenario_path,
)
from .simulation import (
    AssembledNetwork,
    ProofDiagnostics,
    Scenario,
    Trajectory,
    assemble_network,
    build_initial_state,
    check_scenario,
    error_series,
    output_sync_error,
    proof_coordinates,
    regulation_error,
    run_scenario,
    simulate,
    simulate_expm,
    trajectory_to_csv,
)
from .targets import (
    Exosystem,
    TargetModel,
    match_initial_condition,
    remodel_exosystem,
    validate_target,
)

__version__ = "0.1.0"
