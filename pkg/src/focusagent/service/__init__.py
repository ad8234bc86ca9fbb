from .app import create_app
from .session import LiveSessionDriver, LiveSettings

__all__ = ["create_app", "LiveSessionDriver", "LiveSettings"]
