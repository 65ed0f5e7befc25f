"""Matrix-variate skew-t distribution: density, sampling and ECM fitting."""

from .ecm import FitConfig, FitResult, fit
from .errors import (
    DegenerateWeightsError,
    DomainError,
    FactorizationError,
    FitError,
    MatSkewTError,
    NumericalError,
    SmallSkewnessError,
    ValidationError,
)
from .mvst import (
    Dataset,
    MvstParams,
    conditional_w_given_x,
    mvst_log_density,
    mvst_sample,
    normalize_scale,
    vec_params,
)

__version__ = "0.1.0"
