"""Exception hierarchy shared across the package."""


class OcituneError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(OcituneError):
    """Experiment configuration file is missing, malformed, or inconsistent."""


class RootOnUnitCircle(OcituneError):
    """A polynomial root lies inside the unit-circle margin band, so the
    stable/unstable factorization is undefined."""


class PoleHit(OcituneError):
    """A rational function or transfer matrix was evaluated at a pole."""


class SingularTransferMatrix(OcituneError):
    """Transfer matrix has identically zero determinant and cannot be inverted."""


class AlgebraicLoop(OcituneError):
    """I + G*C is singular at q = infinity; the feedback loop is ill posed."""


class ImproperEntry(OcituneError):
    """Time-domain simulation requested for a non-proper transfer function."""


class SingularController(OcituneError):
    """Controller numerator matrix is singular (or its determinant degenerates),
    so the inverse decomposition is unavailable."""


class SingularIminusTd(OcituneError):
    """I - T_d is singular as a rational matrix."""


class ZeroOutputComponent(OcituneError):
    """The output-direction component used in the coupling-zero formula is zero."""


class ImproperPredictor(OcituneError):
    """An assembled predictor filter is non-proper (non-causal)."""


class UnstableFilter(OcituneError):
    """A filter that is required to be stable has a pole on or outside the
    unit circle."""


class SylvesterSingular(OcituneError):
    """The Sylvester-structured Jacobian of the coefficient-splitting map is
    singular; the stable and unstable factors share a root."""


class NonFiniteCost(OcituneError):
    """Optimization started from a point with non-finite cost."""


class AllStartsFailed(OcituneError):
    """Every multistart initial point failed to produce a finite cost."""


class NonPSD(OcituneError):
    """Covariance matrix is not symmetric positive semidefinite."""


class UnstableInitialLoop(OcituneError):
    """The data-collection loop (plant with initial controller) is unstable."""


class ZeroNoiseVariance(OcituneError):
    """SNR requested against a noise series with zero variance."""
