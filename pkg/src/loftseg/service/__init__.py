from .app import create_app
from .store import ImageStore

__all__ = ["create_app", "ImageStore"]
