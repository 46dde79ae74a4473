"""Exception hierarchy shared by the pipeline stages.

The CLI maps these onto process exit codes: admissibility failures exit
with 2, solvability failures with 3, file problems with 4, and failed
validation gates with 5.
"""


class NmkdvError(Exception):
    """Base class for all solver errors."""


class AdmissibilityError(NmkdvError):
    """Input potential, grid, or configuration violates a precondition."""


class RefinementRequiredError(NmkdvError):
    """Jost integration left the a-priori bound; a finer x-grid is needed.

    Carries the spectral point at which the bound was first exceeded.
    """

    def __init__(self, message, z=None):
        super().__init__(message)
        self.z = z


class InconsistentJostError(NmkdvError):
    """Scattering determinants disagree across reference positions."""


class SpectralSingularityError(NmkdvError):
    """a(z) or d(z) vanishes on the real axis (hypotheses violated)."""

    def __init__(self, message, z=None):
        super().__init__(message)
        self.z = z


class SolvabilityError(NmkdvError):
    """Positivity of the jump data failed; the singular equation may be unsolvable."""


class DegenerateJumpError(NmkdvError):
    """Dense collocation matrix is singular to working precision."""


class ContractionFailureError(NmkdvError):
    """Fixed-point iteration diverged; the direct solver should be used."""


class ConsistencyError(NmkdvError):
    """Internal cross-check (jump condition, overlap) exceeded tolerance."""


class OffAxisAccuracyError(NmkdvError):
    """Cauchy-transform evaluation point is closer to the axis than one grid spacing."""


class ValidationFailure(NmkdvError):
    """One or more validation gates failed."""
