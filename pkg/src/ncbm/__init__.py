"""Noncolliding Brownian motion with drift: densities, kernels, samplers and checks."""

from .core import (
    PointMeasure,
    SpaceTimePoint,
    WeylVector,
    dilate,
    gaussian_density,
    make_weyl_vector,
    survival_constant,
    vandermonde,
)
from .densities import (
    MultitimeConfiguration,
    confluent_drift_determinant,
    drifted_density,
    drifted_density_from_origin,
    km_determinant,
    multitime_density,
    noncolliding_density,
)
from .errors import (
    DegenerateStart,
    InvalidTau,
    NcbmError,
    NonPositiveFactor,
    NonPositiveTime,
    OrderViolation,
    SizeMismatch,
    StepFailure,
    TooLarge,
)
from .kernels import (
    KernelSpec,
    correlation_from_kernel,
    hermite_moment,
    kernel_equal_time,
    kernel_finite,
    kernel_lattice,
    phi_entire,
    sine_kernel,
    theta3,
)
from .sampler import (
    SamplePath,
    SdeConfig,
    entrance_step,
    sample_fixed_time,
    simulate_ensemble,
    simulate_sde,
)

__version__ = "0.1.0"
