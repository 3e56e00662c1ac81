from ddn.events.functions import LOG_LEVELS, setup_logging  # noqa: F401
