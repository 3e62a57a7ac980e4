"""Logging for gridob runs.

Every run logs to the console and to two files under the config directory,
and keeps its own warnings and errors so the JSON report can carry them.
"""

import logging
import os
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional


def get_log_dir() -> Path:
    """``$XDG_CONFIG_HOME/gridob``, else ``~/.config/gridob``; created if missing."""
    config_home = os.environ.get('XDG_CONFIG_HOME')
    base = Path(config_home) if config_home else Path.home() / ".config"
    log_dir = base / "gridob"
    log_dir.mkdir(parents=True, exist_ok=True)
    return log_dir


class ConsoleFormatter(logging.Formatter):
    """Bare messages, with the level in front of warnings and errors."""

    def format(self, record: logging.LogRecord) -> str:
        message = record.getMessage()
        if record.levelno >= logging.WARNING:
            return f"[{record.levelname.lower()}] {message}"
        return message


class RunRecorder(logging.Handler):
    """Holds the WARNING-and-above records of the current run."""

    def __init__(self):
        super().__init__(logging.WARNING)
        self.records: List[Dict[str, str]] = []

    def emit(self, record: logging.LogRecord) -> None:
        self.records.append({
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        })


def setup_logging(debug: bool = False, log_dir: Optional[Path] = None,
                  run: str = "") -> RunRecorder:
    """
    Install the handlers for one run and log its banner.

    - console: INFO, or DEBUG with ``debug``
    - errors.log: ERROR and above, with file and line
    - gridob.log: everything, one line per record

    Args:
        debug: DEBUG output on the console
        log_dir: Directory for the log files (defaults to get_log_dir())
        run: Label for the banner, usually the subcommand

    Returns:
        The recorder collecting this run's warnings and errors
    """
    if log_dir is None:
        log_dir = get_log_dir()
    else:
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)
    # one set of handlers per process, replaced on each run
    root_logger.handlers.clear()

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.DEBUG if debug else logging.INFO)
    console_handler.setFormatter(ConsoleFormatter())
    root_logger.addHandler(console_handler)

    error_handler = logging.FileHandler(log_dir / "errors.log")
    error_handler.setLevel(logging.ERROR)
    error_handler.setFormatter(logging.Formatter(
        '%(asctime)s %(levelname)s [%(name)s] %(message)s\n'
        '  at %(pathname)s:%(lineno)d\n'
    ))
    root_logger.addHandler(error_handler)

    run_handler = logging.FileHandler(log_dir / "gridob.log")
    run_handler.setLevel(logging.DEBUG)
    run_handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)-7s [%(name)s] %(message)s'))
    root_logger.addHandler(run_handler)

    recorder = RunRecorder()
    root_logger.addHandler(recorder)

    label = f" {run}" if run else ""
    logging.getLogger("gridob").debug(
        f"-- gridob{label} run at {datetime.now():%Y-%m-%d %H:%M:%S}, logs in {log_dir}"
        f"{', debug' if debug else ''} --")
    return recorder


def get_logger(name: str) -> logging.Logger:
    """Module logger; pass ``__name__``."""
    return logging.getLogger(name)
