import logging
from collections import deque
from datetime import datetime

logger = logging.getLogger("segflow")

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def configure_logging(level=logging.INFO, log_file=None):
    """Configure the segflow logger once for CLI and script use."""
    root = logging.getLogger("segflow")
    root.setLevel(level)
    # Replace our own handlers only; leave handlers installed by the host app alone
    for handler in list(root.handlers):
        if getattr(handler, "_segflow_owned", False):
            root.removeHandler(handler)

    stream = logging.StreamHandler()
    stream.setFormatter(logging.Formatter(LOG_FORMAT))
    stream._segflow_owned = True
    root.addHandler(stream)

    if log_file:
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        file_handler._segflow_owned = True
        root.addHandler(file_handler)
    root.propagate = False
    return root


def debug_print(message):
    """Helper function to log debug messages only when debug logging is enabled."""
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(message)


class MessageBuffer(logging.Handler):
    """Keeps the most recent log messages for display in the dashboard debug panel."""

    def __init__(self, capacity=50, level=logging.DEBUG):
        super().__init__(level)
        self.messages = deque(maxlen=capacity)

    def emit(self, record):
        timestamp = datetime.fromtimestamp(record.created).strftime("%H:%M:%S")
        self.messages.append(f"[{timestamp}] {record.levelname} {record.getMessage()}")

    def clear(self):
        self.messages.clear()
