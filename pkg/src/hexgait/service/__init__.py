from .server import TeleopService, create_app

__all__ = ["TeleopService", "create_app"]
