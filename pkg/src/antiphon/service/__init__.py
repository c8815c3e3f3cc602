from .app import build_app
from .runtime import ServerRuntime

__all__ = ["build_app", "ServerRuntime"]
