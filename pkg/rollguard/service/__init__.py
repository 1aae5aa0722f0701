from .app import create_app
from .client import HttpClient, LocalClient, ServiceError
from .gateway import Gateway, error_response
