"""Exception types raised across the package."""


class DiffuseMixError(Exception):
    """Base class for all package-specific errors."""


class DecodeError(DiffuseMixError):
    """An image file could not be decoded or has an unsupported format."""


class DimensionMismatch(DiffuseMixError, ValueError):
    """Two buffers (or a buffer and a mask) that must share dimensions do not."""


class LambdaOutOfRange(DiffuseMixError, ValueError):
    """Blending factor outside [0, 1]."""


class UnknownPrompt(DiffuseMixError, KeyError):
    """Prompt string is not a member of the prompt library."""


class EmptyFractalSet(DiffuseMixError):
    """A fractal directory yielded no usable images."""


class EmptyDataset(DiffuseMixError):
    """The input dataset contains no decodable images."""


class NonPositiveBaseline(DiffuseMixError, ValueError):
    """Overhead computation requires a positive vanilla baseline time."""


class NetworkError(DiffuseMixError):
    """Remote generation failed after exhausting transient-failure retries."""


class ProtocolError(DiffuseMixError):
    """Remote generation service returned a response we cannot interpret."""


class RemoteError(DiffuseMixError):
    """Remote generation service reported a failure of its own."""


class AugmentationError(DiffuseMixError):
    """One or more images failed during a dataset run.

    The run continues past individual failures; this is raised at the end so
    the invocation as a whole reports them. ``failures`` holds
    ``(source_path, aug_index, message)`` tuples and ``manifest`` the records
    that did succeed.
    """

    def __init__(self, failures, manifest=None):
        self.failures = list(failures)
        self.manifest = manifest
        super().__init__(f"{len(self.failures)} augmentation(s) failed")
