"""Command-line entry point: python -m vrlab.main <experiment> --config <path> --out <dir>."""
import logging
import sys

from pythonjsonlogger import jsonlogger

from vrlab.config import settings
from vrlab.controllers.cli_controller import main as run_cli

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging() -> None:
    """Root logging to stderr; JSON records when log_format is 'json'."""
    if settings.log_format == "json":
        handler = logging.StreamHandler()
        handler.setFormatter(jsonlogger.JsonFormatter(LOG_FORMAT))
        logging.basicConfig(level=settings.log_level, handlers=[handler])
    else:
        logging.basicConfig(level=settings.log_level, format=LOG_FORMAT)


def main() -> int:
    configure_logging()
    logger = logging.getLogger(__name__)
    logger.info(f"Starting {settings.app_name}")
    return run_cli(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
