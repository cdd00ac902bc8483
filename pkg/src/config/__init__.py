from .settings import settings, Settings, configure_logging

__all__ = ["settings", "Settings", "configure_logging"]
