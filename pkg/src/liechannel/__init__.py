"""Channel surfaces and sphere-curve envelopes in the hexaspherical model."""

from .core import (
    DIM,
    METRIC,
    SIGNS,
    GeometryError,
    Infinity,
    LiePoint,
    Plane,
    Point,
    RankDeficiencyError,
    SignatureError,
    SkewMap,
    Sphere,
    Subspace,
    curly_wedge,
    form_bracket,
    inner,
    lightcone_circle,
    lightcone_frame,
    orth_complement,
    parallel_transform,
    parallel_transform_matrix,
    plane_lift,
    point_lift,
    project_to_euclidean,
    projective_gap,
    span,
    sphere_lift,
    subspace_equal,
    subspace_intersect,
    wedge,
)
from .legendre import (
    ChannelReport,
    CurvatureData,
    LegendreGrid,
    LegendreReport,
    LieCyclideSplit,
    curvature_data,
    is_channel,
    lie_cyclide_split,
    lift_planes,
    lift_points,
    lift_spheres,
    make_legendre_from_surface,
    spherical_line_residual,
    validate_legendre,
)
from .channel import (
    ConservedQuantityReport,
    Omega0Structure,
    SphereCurve,
    circle_sphere_curve,
    conserved_quantity,
    converges_quadratically,
    curve_from_profile,
    envelope,
    helix_sphere_curve,
    line_sphere_curve,
    omega0_form,
    osculating_spaces,
    special_lift,
)
from .transforms import (
    CyclideCongruenceReport,
    DarbouxResult,
    DupinCyclide,
    FlatnessReport,
    GaugeField,
    PairStructureReport,
    calapso_quadratic_form,
    calapso_transform,
    complement_subspace,
    cyclide_point_residual,
    darboux_initial_condition,
    darboux_pair_structure,
    darboux_transform,
    dupin_from_spheres,
    dupin_from_subspace,
    flatness_check,
    gauge_edge_residual,
    ribaucour_cyclides,
    ribaucour_partner_curve,
    verify_ribaucour,
)
from .conformal import (
    CircleCongruenceReport,
    ConformalCurve,
    MinkowskiPoint,
    circle_congruence,
    circle_congruence_report,
    circle_curve,
    conformal_curve,
    curve_legendre_lift,
    isotropy_lift,
    isotropy_projection,
    line_curve,
    ribaucour_curve_check,
    tube,
    tube_sphere_curve,
)
from .mesh import (
    MeshOutput,
    cyclide_mesh,
    cyclide_point_grid,
    export_obj,
    grid_point_spheres,
    load_obj,
    mesh_from_frames,
    mesh_from_grid,
    point_sphere_of,
    triangulate_grid,
)
from .scene import (
    PipelineError,
    SceneError,
    load_scene,
    run_scene,
    validate_scene,
)
from .demos import demo_config, demo_names

__version__ = "0.1.0"
