from opsassist.service.app import create_app
from opsassist.service.traces import TraceStore

__all__ = ["TraceStore", "create_app"]
