"""Exception hierarchy shared across the package."""


class TwinbedError(Exception):
    """Base class for all twinbed errors."""


class ModelDomainError(TwinbedError):
    """Non-finite or otherwise invalid input to the vehicle model."""


class ConfigError(TwinbedError):
    """Invalid or inconsistent configuration."""


class HubError(TwinbedError):
    """Message hub rejected an operation."""


class UnknownDestination(HubError):
    """Envelope addressed to an endpoint that is not registered."""


class PayloadTooLarge(HubError):
    """Envelope payload exceeds the hub's size limit."""


class ModeRejected(HubError):
    """Mode assignment failed validation; previous mode is retained."""


class OffTrackError(TwinbedError):
    """Pose is too far from the reference path for preview steering."""


class CollisionAbort(TwinbedError):
    """Two platoon members closed within one body length; run aborted."""


class ArchiveError(TwinbedError):
    """Run archive is missing, corrupt, or fails hash verification."""
