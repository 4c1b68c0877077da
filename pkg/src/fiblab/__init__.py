"""fiblab: a numerical laboratory for Milnor fibrations of real polynomial maps.

The package measures, at desk scale, the constructions that make the tube
and sphere fibrations of a polynomial map equivalent: the spherefication
calculus, d-regularity margins, gradient liftings, the inflating vector
field, and the flow that carries the Milnor tube onto the sphere.
"""

from .catalog import CATALOG, catalog, catalog_entry
from .config import (
    AnnulusSpec,
    Exclusion,
    FlowOpts,
    RunConfig,
    SamplerCfg,
    Tolerances,
    config_from_dict,
    load_config,
)
from .discriminant import (
    DiscriminantReport,
    critical_margin,
    exclusion_from_report,
    linearity_check,
    sample_discriminant,
)
from .errors import (
    CriticalPointError,
    DRegularityError,
    FiblabError,
    InputError,
    MuUndefinedError,
    OnZeroSetError,
    RefusalError,
    SubcaseError,
)
from .flow import EquivalenceReport, FlowTrace, inflate_tube, integrate, tube_seed
from .lifting import (
    Case,
    CaseLabel,
    LiftPair,
    classify_point,
    constrained_lift,
    lift_pair,
    mu,
    normal_lift_F,
    normal_lift_f,
    opposite_directions,
)
from .milnorfield import FieldSample, NodReport, field_scan, milnor_vector, nod_scan
from .pencil import (
    SplitVector,
    d_spherefication,
    d_spherefication_norm_sq,
    is_pencil_tangent,
    jet_record,
    pencil_tangent_residual,
    radial_spherical_split,
)
from .polymap import Jet, PolynomialMap, jet, parse_map
from .regularity import (
    RegularityReport,
    dreg_margin,
    dreg_margins,
    dreg_scan,
    fiber_sphere_transversality,
    fiber_sphere_transversality_at,
)

__version__ = "0.1.0"
