"""Exception types shared across the toolkit."""


class MalformedImage(ValueError):
    """Bytes could not be decoded as a supported image."""


class UnsupportedFormat(ValueError):
    """Image decodes but uses a variant we do not handle (16-bit, exotic palettes)."""


class DimensionMismatch(ValueError):
    """Two rasters that must share a shape do not."""


class DegeneratePolygon(ValueError):
    """Polygon has fewer than 3 vertices or non-finite coordinates."""


class RunSumMismatch(ValueError):
    """Run-length counts do not sum to width*height."""


class EmptyInput(ValueError):
    """An operation that needs at least one sample got none."""


class PointOutsideBox(ValueError):
    """Path endpoint lies outside the search box."""


class ClicksOutOfBounds(ValueError):
    """Extreme click coordinates fall outside the image."""


class BoxOutOfBounds(ValueError):
    """Rectangle does not fit the canvas."""


class EmptyMask(ValueError):
    """Mask has no foreground pixels where some are required."""


class NoValidRecords(ValueError):
    """Annotation parsing or evaluation was left with zero usable records."""


class IoFailure(OSError):
    """Filesystem write failed while emitting a corpus."""
