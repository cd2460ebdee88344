"""Survey backend: rating store, session protocol, and the public HTTP API."""

from .service import ApiError, SurveyService
from .store import MemoryStore, SqliteStore, Store, SurveyImage
from .app import create_app

__all__ = [
    "ApiError",
    "SurveyService",
    "Store",
    "MemoryStore",
    "SqliteStore",
    "SurveyImage",
    "create_app",
]
