"""Photon counting statistics of a driven three-level Lambda atom.

Exact no-count propagation, waiting-time laws, short/long (dark period)
decomposition and Monte Carlo count records for an atom whose two lower
levels ``|1>`` and ``|2>`` are laser-coupled to a common upper level ``|0>``.
"""

from .errors import (
    DegenerateRoots,
    EqualDetunings,
    InvalidParameters,
    LambdaShelveError,
    RegimeWarning,
    RootSolveFailure,
    StepUnderflow,
    UnsortedRecord,
)
from .model import (
    Channel,
    SystemParams,
    amplitude_matrix,
    build_generator,
    build_hamiltonian,
    dark_states,
    trapping_probability,
)
from .propagator import (
    Amplitudes,
    RootTriple,
    SpectralPropagator,
    approx_roots,
    characteristic_polynomial,
    characteristic_roots,
    equal_detuning_roots,
    evolve_analytic,
    evolve_ode,
)
from .statistics import (
    WaitingDecomposition,
    WaitingLaw,
    emission_probability,
    no_count_probability,
    short_long_split,
    waiting_density,
    waiting_pdf,
)
from .trajectory import (
    CountRecord,
    EnsembleStats,
    IntervalSummary,
    classify_intervals,
    ensemble_run,
    sample_waiting,
    simulate_trajectory,
    trajectory_density,
)

__version__ = "0.1.0"
