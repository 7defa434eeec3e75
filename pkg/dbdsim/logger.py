"""Logging configuration for dbdsim."""

import logging
import os

from rich.logging import RichHandler

# Logs live under ~/.dbdsim unless DBDSIM_HOME points elsewhere
DBDSIM_HOME = os.environ.get("DBDSIM_HOME", os.path.expanduser("~/.dbdsim"))
LOGS_DIR = os.path.join(DBDSIM_HOME, "logs")


# Configure logging
def setup_logger():
    """Configure the logger for dbdsim."""
    logger = logging.getLogger("dbdsim")
    logger.setLevel(logging.INFO)
    if logger.handlers:
        return logger

    log_format = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    console_handler = RichHandler(show_path=False)
    console_handler.setFormatter(logging.Formatter('%(message)s'))
    logger.addHandler(console_handler)

    try:
        os.makedirs(LOGS_DIR, exist_ok=True)
        file_handler = logging.FileHandler(
            os.path.join(LOGS_DIR, "dbdsim.log"),
            encoding='utf-8'
        )
        file_handler.setFormatter(log_format)
        logger.addHandler(file_handler)
    except OSError as e:
        logger.warning(f"File logging disabled, cannot use {LOGS_DIR}: {e}")

    return logger

# Create and configure logger
logger = setup_logger()
