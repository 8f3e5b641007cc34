"""Floquet random states, classical shadows, and Haar-ensemble oracles."""

__version__ = "0.1.0"

from .config import RunConfig, RunManifest
from .errors import ConfigError, NonPositiveMomentError, NumericalError
from .estimators import Estimate, MomentEstimate, jackknife, u_moment
from .floquet import ModelParams, build_floquet, sample_disorder
from .haar import PartitionSpec, classify_phase, ea_haar, haar_bipartite_moment, haar_pt_moment, page_renyi2
from .measurement import LocalBasis, ReadoutModel, measure
from .mitigation import fit_epsilon, mitigate, response_matrix
from .shadows import ShadowSet, ShadowStore
from .statevector import QuantumState, prepare_random_state, reduce

__all__ = [
    "ConfigError",
    "Estimate",
    "LocalBasis",
    "ModelParams",
    "MomentEstimate",
    "NonPositiveMomentError",
    "NumericalError",
    "PartitionSpec",
    "QuantumState",
    "ReadoutModel",
    "RunConfig",
    "RunManifest",
    "ShadowSet",
    "ShadowStore",
    "build_floquet",
    "classify_phase",
    "ea_haar",
    "fit_epsilon",
    "haar_bipartite_moment",
    "haar_pt_moment",
    "jackknife",
    "measure",
    "mitigate",
    "page_renyi2",
    "prepare_random_state",
    "reduce",
    "response_matrix",
    "sample_disorder",
    "u_moment",
]
