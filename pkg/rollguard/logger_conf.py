import json
import logging
import os
from logging import FileHandler, StreamHandler
from typing import Optional

from rollguard.constants import LOG_FILE_ENV

PACKAGE_LOGGER = "rollguard"

# Context attributes passed through `extra=` and copied into the JSON record.
CONTEXT_FIELDS = ("txid", "op", "counter", "hook", "pad", "index", "kind")


class JsonFormatter(logging.Formatter):
    def format(self, record):
        log_record = {
            "time": self.formatTime(record),
            "level": record.levelname,
            "message": record.getMessage(),
            "logger_name": record.name,
        }
        for field in CONTEXT_FIELDS:
            if hasattr(record, field):
                log_record[field] = getattr(record, field)
        if record.exc_info:
            log_record["exception"] = self.formatException(record.exc_info)
        return json.dumps(log_record)


def get_logger(
    logger_name: str,
    log_file: Optional[str] = None,
    level=logging.INFO,
):
    """
    Return a logger under the package root. Handlers are attached to the root
    package logger once, so module loggers share one stream and one optional file.
    """
    root = logging.getLogger(PACKAGE_LOGGER)

    if not root.handlers:
        root.setLevel(level)
        formatter = JsonFormatter()
        stream_handler = StreamHandler()
        stream_handler.setFormatter(formatter)
        root.addHandler(stream_handler)

        log_file = log_file or os.getenv(LOG_FILE_ENV)
        if log_file:
            file_handler = FileHandler(log_file)
            file_handler.setFormatter(formatter)
            root.addHandler(file_handler)

    if logger_name == PACKAGE_LOGGER or logger_name.startswith(PACKAGE_LOGGER + "."):
        return logging.getLogger(logger_name)
    return root.getChild(logger_name)


def configure_logging(level: str = "INFO", log_file: Optional[str] = None) -> None:
    root = get_logger(PACKAGE_LOGGER, log_file=log_file)
    root.setLevel(level)
    if log_file and not any(isinstance(h, FileHandler) for h in root.handlers):
        file_handler = FileHandler(log_file)
        file_handler.setFormatter(JsonFormatter())
        root.addHandler(file_handler)
