"""Exception types shared across the package."""


class StereosegError(Exception):
    """Base class for all errors raised by this package."""


# --- media I/O ---

class MissingFile(StereosegError):
    """A gap in the numeric file sequence, or a named file does not exist."""


class DimensionMismatch(StereosegError):
    """Two images that must share dimensions do not."""


class CountMismatch(StereosegError):
    """Paired directories hold different numbers of files."""


class UnsupportedFormat(StereosegError):
    """Image has the wrong bit depth or channel count."""


class IoFailure(StereosegError):
    """Reading or writing a file failed at the OS level."""


# --- disparity prior ---

class NoValidDisparity(StereosegError):
    """Every pixel of a disparity map is flagged invalid."""


class NoForegroundPeak(StereosegError):
    """No histogram bin satisfies the peak conditions."""


class EmptyMask(StereosegError):
    """A mask with no foreground pixels where at least one is required."""


# --- bilateral grid / graph cut ---

class EmptyRoi(StereosegError):
    """The region of interest contains no pixels."""


class EmptyGrid(StereosegError):
    """The sparse grid holds no occupied vertices."""


# --- metrics ---

class EmptyInput(StereosegError):
    """An aggregate was requested over an empty score list."""


# --- synthetic scenes / oracles ---

class ShapeOutOfBounds(StereosegError):
    """The foreground shape leaves the image on some frame."""


class TooLarge(StereosegError):
    """Instance exceeds the size limit of an exhaustive algorithm."""


# --- configuration ---

class UnknownKey(StereosegError):
    """A configuration key that is not recognised."""


class BadValue(StereosegError):
    """A configuration value outside its accepted range."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
