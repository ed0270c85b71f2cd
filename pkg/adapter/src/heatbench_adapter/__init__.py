"""Reference adapter for the heatbench oracle wire protocol.

Wraps a model behind the line-delimited JSON protocol the harness speaks
(docs/oracle-protocol.md at the repository root), reading input volumes
from tensor containers. Ships two framework-free stub models so protocol
plumbing can be exercised end to end without any trained network.
"""

__version__ = "0.1.0"

from .container import read_tensor, write_tensor
from .errors import AdapterError, ArtifactError
from .models import LinearModel, MeanThresholdModel, load_model
from .server import AdapterConfig, handle_request, serve

__all__ = [
    "__version__",
    "AdapterError", "ArtifactError",
    "read_tensor", "write_tensor",
    "LinearModel", "MeanThresholdModel", "load_model",
    "AdapterConfig", "handle_request", "serve",
]
