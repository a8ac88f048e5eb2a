import logging
import logging.handlers

from ..config import CONFIG

__all__ = ("setup_logging",)


ONE_KILOBYTE = 1024
ONE_MEGABYTE = ONE_KILOBYTE * 1024

LOG_FORMAT = "{asctime} - {module}:{levelname} - {message}"


def setup_logging(level: str | int | None = None) -> logging.Logger:
    """Configures the package and root loggers from ``CONFIG.LOGGING``.

    Safe to call more than once, handlers are only attached on the first call.
    """
    log = logging.getLogger("projgp")
    level = level or CONFIG.LOGGING.LOG_LEVEL
    if level is not None:
        log.setLevel(level)

    global_log = logging.getLogger()
    if CONFIG.LOGGING.GLOBAL_LOG_LEVEL is not None:
        global_log.setLevel(CONFIG.LOGGING.GLOBAL_LOG_LEVEL)

    if getattr(global_log, "_projgp_configured", False):
        return log

    formatter = logging.Formatter(LOG_FORMAT, style="{")

    if CONFIG.LOGGING.LOG_TO_FILE:
        handler = logging.handlers.RotatingFileHandler(
            CONFIG.LOGGING.get("LOG_FILE", f"{CONFIG.APP_NAME}.log"), maxBytes=ONE_MEGABYTE, encoding="utf-8"
        )
        handler.setFormatter(formatter)
        global_log.addHandler(handler)

    stream = logging.StreamHandler()
    stream.setFormatter(formatter)
    global_log.addHandler(stream)
    global_log._projgp_configured = True  # type: ignore

    return log
