"""HTTP service wrapping the experiment and inference machinery."""

from .app import app, create_app

__all__ = ["app", "create_app"]
