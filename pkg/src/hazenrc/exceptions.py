"""Exception hierarchy. Each CLI-visible failure has its own class so the
command line can map it to a distinct exit code."""


class HazeError(Exception):
    """Base class for all errors raised by hazenrc.

    Estimation failures carry the guard counts gathered so far in
    ``diagnostics`` (empty when not applicable).
    """

    def __init__(self, *args, diagnostics=None):
        super().__init__(*args)
        self.diagnostics = dict(diagnostics or {})


class DimensionMismatch(HazeError, ValueError):
    pass


class ImageIOError(HazeError, OSError):
    """Unreadable/unwritable file or malformed content."""


class UnsupportedFormat(ImageIOError):
    pass


class NegativeDepth(HazeError, ValueError):
    pass


class EstimateIsZero(HazeError, ValueError):
    """An estimated airlight channel came out as zero."""


class ImageTooSmall(HazeError, ValueError):
    pass


class DegenerateImage(HazeError, ValueError):
    """Zero-variance input where a correlation score is required."""


class EmptyDarkSet(HazeError):
    """No superpixel has a median dark channel at or below the threshold."""


class NoValidPixels(HazeError):
    """Every pixel was rejected by the numerical guards."""


class NoMatchedSps(HazeError):
    """Superpixel matching between reference and test produced no pairs."""
