import logging

from .config import Config

# Module-level logger instance
_logger_instance = None


def _coerce_level(level) -> int:
    if isinstance(level, int):
        return level
    resolved = logging.getLevelName(str(level).upper())
    return resolved if isinstance(resolved, int) else logging.INFO


def setup_logger(
    name: str = Config.LOGGER_NAME,
    log_level: int | str = Config.LOG_LEVEL,
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
) -> logging.Logger:
    """
    Configure and return the global logger instance.
    If already initialized, only the level is updated.
    """
    global _logger_instance

    if _logger_instance is not None:
        _logger_instance.setLevel(_coerce_level(log_level))
        return _logger_instance

    logger = logging.getLogger(name)
    logger.setLevel(_coerce_level(log_level))

    # Avoid adding handlers if they already exist
    if not logger.handlers:
        formatter = logging.Formatter(log_format)

        # Console handler only
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

    _logger_instance = logger
    return logger


def get_logger() -> logging.Logger:
    """
    Get the configured logger instance.
    If not yet configured, sets up with default parameters.
    """
    global _logger_instance
    if _logger_instance is None:
        _logger_instance = setup_logger()
    return _logger_instance
