"""Bessel-type convolution structures on cones of positive semidefinite matrices.

Matrix-argument Bessel functions, the explicit hypergroup convolution on the
cone, squared Wishart laws, automorphism and subhypergroup algebra, and
random-walk limit experiments, over the real and complex fields.
"""

__version__ = "0.1.0"

from .cone_core import (
    HypergroupParams,
    HermitianMatrix,
    ConePoint,
    SquareMatrix,
    eig_herm,
    psd_sqrt,
    loewner_leq,
    power_function,
    pochhammer_general,
    gamma_cone,
)
from .jack_series import (
    Partition,
    BesselEval,
    BesselSeriesError,
    partitions,
    jack_C,
    zonal_Z,
    bessel_J,
    character_phi,
)
from .ball_measure import (
    BallPoint,
    EmpiricalMeasure,
    sample_ball,
    kappa,
    phi_bochner,
    conv_sample,
    conv_expect,
    support_window_check,
)
from .hypergroup_algebra import (
    Automorphism,
    Subhypergroup,
    automorphism_apply,
    fourier_empirical,
    embed_sub,
    project_quotient,
    quotient_kernel,
    transpose_automorphism_check,
)
from .wishart import (
    WishartSpec,
    sample_standard,
    sample_scaled,
    density,
    fourier_closed,
    translated_density,
    semigroup_check,
)
from .randwalk_limits import (
    WalkConfig,
    MomentSpec,
    PointMassStep,
    WishartStep,
    EmpiricalStep,
    walk_simulate,
    moment_m2,
    moment_numeric,
    clt_experiment,
    slln_experiment,
    martingale_check,
)

__all__ = [
    "__version__",
    "HypergroupParams",
    "HermitianMatrix",
    "ConePoint",
    "SquareMatrix",
    "eig_herm",
    "psd_sqrt",
    "loewner_leq",
    "power_function",
    "pochhammer_general",
    "gamma_cone",
    "Partition",
    "BesselEval",
    "BesselSeriesError",
    "partitions",
    "jack_C",
    "zonal_Z",
    "bessel_J",
    "character_phi",
    "BallPoint",
    "EmpiricalMeasure",
    "sample_ball",
    "kappa",
    "phi_bochner",
    "conv_sample",
    "conv_expect",
    "support_window_check",
    "Automorphism",
    "Subhypergroup",
    "automorphism_apply",
    "fourier_empirical",
    "embed_sub",
    "project_quotient",
    "quotient_kernel",
    "transpose_automorphism_check",
    "WishartSpec",
    "sample_standard",
    "sample_scaled",
    "density",
    "fourier_closed",
    "translated_density",
    "semigroup_check",
    "WalkConfig",
    "MomentSpec",
    "PointMassStep",
    "WishartStep",
    "EmpiricalStep",
    "walk_simulate",
    "moment_m2",
    "moment_numeric",
    "clt_experiment",
    "slln_experiment",
    "martingale_check",
]
