"""Strong stabilization of SISO plants by real-to-integer exponent tuning."""

from .design import UProduct, asymptotic_epsilons, build_system, solve_exponents, u_eval
from .errors import (IntegerizationError, LogDomainError, PIPViolationError, RealizationError,
                     RTIError, SimulationError, SingularSystemError, TuningError,
                     UnsupportedRelativeDegreeError)
from .plant import analyze, check_pip, coprime_factorize, factorization_from_pair
from .ratfun import Polynomial, RationalTF
from .realize import (DesignConfig, DesignResult, design_fixed, design_pipeline,
                      step_response, synthesize_controller)
from .tune import TuneConfig, tune_pipeline

__version__ = "0.1.0"
