"""Lippmann-Schwinger-Low scattering states on a finite momentum grid."""

__version__ = "0.1.0"

from .errors import (
    ConditioningError,
    InvalidArgumentError,
    InvalidPairingError,
    NearZeroFredholmError,
)
from .hilbert import (
    DensePotential,
    ModelGrid,
    SeparablePotential,
    build_grid,
    h0_apply,
    inner,
    plane_wave,
    random_dense,
    sample_dense,
    sample_separable,
)
from .lsl import (
    AmplitudeSet,
    ScatteringSolution,
    a_amplitude,
    amplitude_set,
    c_amplitude,
    overlap_direct,
    overlap_expansion,
    separable_closed_form,
    solve,
    solve_low,
    solve_ls,
    t_amplitude,
)
from .resolvent import d_weight, dko_apply, eta_apply, g0_apply, identity5_residual, mu
from .verify import (
    LemmaReport,
    ScanRecord,
    epsilon_scan,
    gw_gap,
    identity_suite,
    lemmaA_residuals,
    lemmaB_residual,
    lemmaC_residual,
    lemmaD_residuals,
    moller_gram,
    unitarity_residual,
)
