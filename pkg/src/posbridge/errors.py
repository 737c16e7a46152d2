"""Exception hierarchy shared by every module.

Each exception carries a short machine-readable ``code`` so the CLI can
emit an error object and pick an exit status without string matching.
"""


class PosBridgeError(Exception):
    code = "error"
    #: CLI exit status; 3 marks a tripped numerical guard.
    exit_status = 3


class StepLawError(PosBridgeError, ValueError):
    code = "step_law"
    exit_status = 2


class PeriodicSupport(StepLawError):
    code = "periodic_support"


class ProbabilityMassError(StepLawError):
    code = "probability_mass"


class DegenerateLaw(StepLawError):
    code = "degenerate_law"


class UnsupportedAlpha(PosBridgeError, ValueError):
    code = "unsupported_alpha"
    exit_status = 2


class TruncationExceeded(PosBridgeError):
    code = "truncation_exceeded"


class DefectTooLarge(PosBridgeError):
    code = "defect_too_large"


class RenewalRangeExceeded(PosBridgeError):
    code = "renewal_range_exceeded"


class ZeroBridgeProbability(PosBridgeError):
    code = "zero_bridge_probability"


class ExplosionGuard(PosBridgeError):
    code = "explosion_guard"


class DomainError(PosBridgeError, ValueError):
    code = "domain_error"
    exit_status = 2


class GridTooCoarse(PosBridgeError):
    code = "grid_too_coarse"


class NonFinite(PosBridgeError):
    code = "non_finite"
