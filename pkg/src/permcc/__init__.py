"""Protocols, complexity measures and reductions for permutation-invariant
two-party functions."""

from .funcspec import (FunctionSpec, InputPair, StronglyPIDescriptor,
                       build_named, build_strongly_pi, canonical_pair,
                       random_total_pi, valid_distances)
from .measure import Jump, MeasureReport, ReductionCertificate, certificate, jumps, measure
from .randomness import (RandomnessMode, correlated_hash_family, dsbs_stream,
                         gaussian_pair_stream)
from .engine import ProtocolPair, SessionResult, TrialReport, estimate_error, run_session

__version__ = "0.1.0"
