from ..conftest import make_config, make_monitor, monitor  # noqa: F401
