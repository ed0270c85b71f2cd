"""Adapter failure modes.

Two tiers: a problem with a single request is answered on the wire and the
server keeps going; a problem with the launch configuration aborts startup.
"""


class AdapterError(Exception):
    """Per-request failure, reported as an error reply."""


class ArtifactError(Exception):
    """Unusable model artifact or launch configuration."""
