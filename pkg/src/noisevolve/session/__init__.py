from .service import API_VERSION, SessionService, create_app
from .state import MODE_CONCEPT, MODE_IMAGE, SessionState

__all__ = [
    "SessionService",
    "SessionState",
    "create_app",
    "API_VERSION",
    "MODE_IMAGE",
    "MODE_CONCEPT",
]
