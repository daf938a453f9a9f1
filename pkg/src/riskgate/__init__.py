"""Two-stage supervisory executor for agent-proposed network control intents."""
from __future__ import annotations

__version__ = "0.1.0"
