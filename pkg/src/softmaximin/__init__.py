"""Soft maximin estimation of a common signal from heterogeneous grouped data."""

from .aggregation import GroupEstimates, fit_groups, magging, mean_aggregate, project_simplex
from .arrayfile import read_array, write_array
from .basis import BSplineSpec, FourierSpec, bspline_design, fourier_design
from .config import RunConfig
from .errors import (
    CapabilityError,
    DomainError,
    FormatError,
    NumericalError,
    PreconditionError,
    SchemaError,
    ShapeError,
    SoftMaximinError,
    StepFailureError,
)
from .loss import (
    GroupedDataset,
    SoftMaximinProblem,
    explained_variance,
    group_losses,
    lipschitz_bound,
    lse,
    softmax_weights,
    softmaximin_gradient,
    softmaximin_hessian,
    softmaximin_loss,
)
from .optimizer import (
    ConvergenceWarning,
    FistaConfig,
    FitResult,
    NpgConfig,
    Solution,
    fista_solve,
    fit_path,
    kkt_residual,
    lambda_max,
    lambda_path,
    npg_solve,
    prox_l1,
)
from .tensor import TensorDesign, design_matvec, design_tmatvec, gram_spectral_norm, rho
from .validation import CvConfig, CvReport, block_cv, holdout_loss

__version__ = "0.1.0"
