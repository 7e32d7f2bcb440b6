"""Exact simulation of tempered stable laws by rejection from stable proposals."""

from .errors import (BracketFailure, DivergentEta, DivergentSigma, EmptySample,
                     IntegrabilityUnverified, QuadratureFailure, RatioAboveOne,
                     TemperLevyError, UnsupportedAlpha)
from .model import (ModelSpec, PowerLawRosinski, RosinskiMeasure, StableParams,
                    TweedieExp, UserRadial, big_jump_measure, eta, eta_quadrature,
                    q_radial, reference_model, sigma_from_rosinski, validate)

__version__ = "0.1.0"
