"""Numerical pseudohermitian geometry and CR-map classification on
generalized ellipsoid hypersurfaces."""

from ._kernels import backend_name
from .classifier import Classification, classify, classify_from_samples, recover_factor, recover_levi_isometry
from .cone import ConeVerdict, block_routing, cone_preserved, cone_test_definitional, cone_test_structural
from .curvature import CurvatureData, chern, curvature_closed, curvature_numeric, sectional
from .frame import FrameDecomposition, LeviData, TangentVector, frame_fields, levi, lie_bracket, q_flat
from .lee import ScalarJet, check_chern_invariance, check_cr_function_identities, check_lee, scalar_jet
from .maps import MapDescriptor, MapJet, apply_word, cr_factor, parse_map, pushforward, verify_cr
from .model import PJet, jet, to_bounded
from .signature import Signature, SurfacePoint

__version__ = "0.1.0"

__all__ = [
    "Signature",
    "SurfacePoint",
    "PJet",
    "jet",
    "to_bounded",
    "TangentVector",
    "LeviData",
    "FrameDecomposition",
    "levi",
    "frame_fields",
    "q_flat",
    "lie_bracket",
    "CurvatureData",
    "curvature_numeric",
    "curvature_closed",
    "chern",
    "sectional",
    "ConeVerdict",
    "cone_test_definitional",
    "cone_test_structural",
    "cone_preserved",
    "block_routing",
    "MapDescriptor",
    "MapJet",
    "parse_map",
    "apply_word",
    "pushforward",
    "cr_factor",
    "verify_cr",
    "ScalarJet",
    "scalar_jet",
    "check_lee",
    "check_chern_invariance",
    "check_cr_function_identities",
    "Classification",
    "classify",
    "classify_from_samples",
    "recover_factor",
    "recover_levi_isometry",
    "backend_name",
    "__version__",
]
