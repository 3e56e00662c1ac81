import sys

from dbt.events.base_types import EventLevel
from dbt.events.functions import EVENT_MANAGER, LineFormat, LoggerConfig, cleanup_event_logger


LOG_LEVELS = {"debug": EventLevel.DEBUG, "info": EventLevel.INFO, "warning": EventLevel.WARN, "error": EventLevel.ERROR}


def setup_logging(level: str = "info") -> None:
    """Route dbt's event stream to stderr; stdout stays free for command output such as ``schema``."""
    cleanup_event_logger()
    EVENT_MANAGER.add_logger(
        LoggerConfig(
            name="ddn_stderr",
            level=LOG_LEVELS[level],
            line_format=LineFormat.PlainText,
            output_stream=sys.stderr,
        )
    )
