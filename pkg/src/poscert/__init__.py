"""Exact construction and verification of positivity certificates."""
from .certs import (GeneratorSet, ModuleCert, PreorderCert, SosPoly, Verdict, flatten, verify,
                    verify_module, verify_preorder)
from .errors import (CertificationFailure, ModeError, ParseError, PoscertError, PreconditionError,
                     ResourceCapError)
from .poly import Polynomial, parse_poly, poly
from .putinar import BallSpec, Problem, SearchConfig, putinar_search

__all__ = [
    "BallSpec", "CertificationFailure", "GeneratorSet", "ModeError", "ModuleCert", "ParseError", "Polynomial",
    "PoscertError", "PreconditionError", "PreorderCert", "Problem", "ResourceCapError", "SearchConfig", "SosPoly", "Verdict",
    "flatten", "parse_poly", "poly", "putinar_search", "verify", "verify_module", "verify_preorder",
]
__version__ = "0.1.0"
