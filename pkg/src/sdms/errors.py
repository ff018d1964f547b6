class SdmsError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(SdmsError, ValueError):
    """Rejected geometry, key size or other container parameter."""


class AddressingError(SdmsError, IndexError):
    """Sector index outside the container."""


class ContractError(SdmsError, ValueError):
    """Caller passed a value of the wrong shape (length, type)."""


class FormatError(SdmsError):
    """Container header or keyfile is unrecognized or corrupted."""


class AuthenticationError(SdmsError):
    """Wrong passphrase or corrupted keystore.

    The two causes are deliberately reported the same way.
    """


class CampaignFailure(SdmsError):
    """A security property campaign observed a violation."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


class SectorIOError(SdmsError, OSError):
    """I/O failed mid-operation; the target sector's state is undefined."""
