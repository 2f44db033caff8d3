"""Markov compacta and semi-Markov automata for boundaries of hyperbolic groups.

The pipeline runs from group presentations through Cannon types on Cayley
balls, span-star covers and their nerves, to the Markov-compactum checks
and the semi-Markov automaton of the boundary.
"""

from .ball import CayleyBall, check_thin_triangles, enumerate_ball
from .balltypes import (
    BallType,
    ConeSet,
    FellowSet,
    TypeConfig,
    TypeEngine,
    ball_census,
    ball_type,
    cone_census,
    empirical_N0,
    torsion_radius,
    verify_ball_determines_cone,
    verify_descendant_types,
    verify_fellows_from_type,
    verify_torsion_dichotomy,
)
from .compactum import (
    LimitPoint,
    MarkovSystemDescription,
    MetricParams,
    boundary_distance_da,
    describe,
    limit_point,
    rebuild_from_prefix,
    sample_bilipschitz,
    simplicial_distance,
    typed_isomorphic,
    validate_markov_compactum,
    verify_abstract_markov,
)
from .complexes import AffineMap, SimplicialComplex, barycentre, l1_distance
from .config import RunConfig, load_config, load_presentation, parse_presentation
from .errors import (
    BoundaryError,
    CensusIncompleteError,
    ConfigError,
    DomainError,
    GluingError,
    GromovMarkovError,
    InconclusiveError,
    InconsistencyError,
    PreconditionError,
    ResourceLimitError,
    VerificationError,
)
from .genealogy import TypeTower, check_c_gluing, least_sufficient_parameters, verify_genealogy_lemmas
from .group import (
    FreeProductPresentation,
    GroupPresentation,
    RewritingPresentation,
    cyclic_free_product,
    free_group,
    integers,
    modular_group,
    rewriting_presentation,
)
from .kernels import BACKEND
from .nerve import (
    ExplicitCoverSystem,
    NerveSystem,
    build_bonding_map,
    build_nerve,
    check_star_property,
    find_L0,
    strengthen_delta_A,
    tower_labeler,
)
from .reports import Report
from .semimarkov import (
    SemiMarkovAutomaton,
    build_automaton,
    enumerate_compatible,
    same_limit,
    type_word,
    verify_criterion,
)
from .spans import SpanCoverSystem, SpanSystem, audit_quasi_invariance

__version__ = "0.1.0"
