from .app import ApiError, Portal, ServiceConfig, create_app

__all__ = ["ApiError", "Portal", "ServiceConfig", "create_app"]
