"""
Entry point for ``python -m berknash`` and the ``berknash`` console script.

Sets up logging on stderr (stdout carries results) and a global exception
hook before handing over to the click command group.
"""

import sys
import logging

from . import get_version
from .cli import main
from .config import RuntimeSettings
from .errors import BerkNashError


def setup_logging(verbose: bool = False, level: str = "INFO"):
    """Set up logging configuration."""
    log_level = logging.DEBUG if verbose else getattr(logging, level, logging.INFO)

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    root_logger.addHandler(console_handler)

    # Reduce noise from third-party libraries
    logging.getLogger('asyncio').setLevel(logging.WARNING)


def check_python_version():
    """Check if Python version is compatible."""
    if sys.version_info < (3, 9):
        print("Error: Python 3.9 or higher is required.", file=sys.stderr)
        print(f"You are using Python {sys.version}", file=sys.stderr)
        sys.exit(1)


def handle_exceptions():
    """Set up global exception handling."""
    def exception_handler(exc_type, exc_value, exc_traceback):
        if issubclass(exc_type, KeyboardInterrupt):
            print("\nOperation cancelled by user.", file=sys.stderr)
            sys.exit(1)
        else:
            logging.error(
                "Uncaught exception",
                exc_info=(exc_type, exc_value, exc_traceback)
            )
            print(f"An unexpected error occurred: {exc_value}", file=sys.stderr)
            sys.exit(1)

    sys.excepthook = exception_handler


def entry_point():
    """Main entry point for the CLI application."""
    check_python_version()
    handle_exceptions()

    verbose = '--verbose' in sys.argv or '-v' in sys.argv
    try:
        level = RuntimeSettings.from_env().log_level
    except BerkNashError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(e.exit_code)
    setup_logging(verbose, level)

    logger = logging.getLogger(__name__)
    logger.debug(f"Starting berknash v{get_version()}")
    logger.debug(f"Python version: {sys.version}")
    logger.debug(f"Command line arguments: {sys.argv}")

    main(prog_name="berknash")


if __name__ == "__main__":
    entry_point()
