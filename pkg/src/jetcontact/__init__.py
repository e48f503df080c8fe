"""jetcontact: order-n contact between holomorphic Hermitian vector bundles.

Library layout:

* :mod:`jetcontact.jetcore`    -- truncated Taylor (jet) arithmetic
* :mod:`jetcontact.kernelexpr` -- expression grammar and jet evaluation
* :mod:`jetcontact.pascal`     -- the Pascal matrix algebra and jet transitions
* :mod:`jetcontact.geometry`   -- curvature, covariant derivatives, recursions
* :mod:`jetcontact.contact`    -- point-wise and along-slice contact checks
* :mod:`jetcontact.wordcalc`   -- exact noncommutative identity verification
* :mod:`jetcontact.rkhs`       -- reproducing-kernel quotient models
* :mod:`jetcontact.cli`        -- config-driven command line front end
"""

__version__ = "0.1.0"

from .jetcore import HermJet, HoloJet
from .kernelexpr import BundleSpec, parse_kernel
from .contact import ContactProblem, check_problem

__all__ = [
    "__version__",
    "HermJet",
    "HoloJet",
    "BundleSpec",
    "parse_kernel",
    "ContactProblem",
    "check_problem",
]
