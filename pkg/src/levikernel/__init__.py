"""Heat kernels of non-symmetric Lévy-type operators of order at most one via the Levi parametrix.

Modules: ``levy_profile`` (Lévy profiles and scale functions), ``coefficient``
(jump-intensity coefficients and regime checks), ``frozen_kernel`` (frozen-
coefficient densities by Fourier inversion), ``parametrix`` (the construction
on a space-time lattice), ``verifier`` (the property suite), ``config`` and
``cli``.
"""

from .coefficient import Coefficient, classify_regime, make_coefficient
from .frozen_kernel import FrozenKernelCache
from .levy_profile import ScaleFunctions, UnimodalProfile, make_profile
from .parametrix import Grid, KernelField, ParametrixBuild, build_parametrix
from .verifier import PropertyReport, VerifierSettings, verify

__version__ = "0.1.0"

__all__ = [
    "Coefficient", "classify_regime", "make_coefficient", "FrozenKernelCache", "ScaleFunctions",
    "UnimodalProfile", "make_profile", "Grid", "KernelField", "ParametrixBuild", "build_parametrix",
    "PropertyReport", "VerifierSettings", "verify", "__version__",
]
