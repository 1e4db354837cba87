"""Energy measures for p-energy forms on model spaces.

Piecewise-linear calculus on [0, 1], the fold-limit construction of
energy measures, law checks for the resulting measure calculus, kernel
energy scans, and the gasket renormalization fixed point.  The `penergy`
command line drives the same machinery from JSON configs.
"""

from .construction import (
    ConvergenceError,
    FoldSchedule,
    EnergyMeasure,
    distribution,
    energy_measure,
    reference_measure,
)
from .forms import (
    GraphForm,
    PLIntervalForm,
    SGForm,
    check_assumptions,
    check_clarkson,
    form_from_descriptor,
)
from .ks import (
    KSKernel,
    SampledSpace,
    ball_measure,
    ks_energy,
    ks_limit_scan,
    ks_vs_canonical,
)
from .laws import ALL_LAWS, LawReport, run_all_laws
from .pl import IntervalSet, PLFunction, PLMap, compose, cut, lattice
from .sampler import PLSampler

__version__ = "0.1.0"

__all__ = [
    "ALL_LAWS",
    "ConvergenceError",
    "EnergyMeasure",
    "FoldSchedule",
    "GraphForm",
    "IntervalSet",
    "KSKernel",
    "LawReport",
    "PLFunction",
    "PLIntervalForm",
    "PLMap",
    "PLSampler",
    "SGForm",
    "SampledSpace",
    "ball_measure",
    "check_assumptions",
    "check_clarkson",
    "compose",
    "cut",
    "distribution",
    "energy_measure",
    "form_from_descriptor",
    "ks_energy",
    "ks_limit_scan",
    "ks_vs_canonical",
    "lattice",
    "reference_measure",
    "run_all_laws",
    "__version__",
]
