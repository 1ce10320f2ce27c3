"""Exception types raised by the spherecal library.

All library errors derive from :class:`SpherecalError` so callers (notably
the CLI) can distinguish library failures from programming errors.
"""


class SpherecalError(Exception):
    """Base class for all spherecal errors."""


class DegenerateProjection(SpherecalError):
    """A camera-frame point lies outside the model's forward image."""


class InvalidFov(SpherecalError):
    """A field-of-view argument is outside the usable (0, pi) interval."""


class OutOfModelRange(SpherecalError):
    """A derived distortion value falls outside the model's [0, 1] range."""


class HorizonAtInfinity(SpherecalError):
    """The horizon midpoint is undefined (xi + cos(pitch) vanishes)."""


class NoValidPitch(SpherecalError):
    """No pitch in (-pi/2, pi/2) reproduces the requested horizon midpoint."""


class EmptyHorizon(SpherecalError):
    """No zero-elevation direction projects into the camera's forward image."""


class NoIntersection(SpherecalError):
    """The horizon curve never crosses the requested image boundary."""


class SamplingExhausted(SpherecalError):
    """Rejection sampling failed to produce a valid draw within the retry budget."""


class BadPanoramaAspect(SpherecalError):
    """Input panorama is not equirectangular 2:1 within tolerance."""


class InvalidTarget(SpherecalError):
    """Undistortion target cannot be represented by a pinhole camera."""


class NoData(SpherecalError):
    """Not enough observations to fit or evaluate a perceptual surface."""


class MissingSurface(SpherecalError):
    """A fitted perceptual surface is required for a parameter but absent."""


class EmptyIndex(SpherecalError):
    """A retrieval query was issued against an empty index."""
