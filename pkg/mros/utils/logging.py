"""
Logging utility for MROS runs.
Provides console and file logging plus a structured JSON event log.
"""

import os
import json
import logging
from datetime import datetime
from typing import Any, Dict, Optional

DEFAULT_LOGS_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(__file__))), "logs")


def logs_dir() -> str:
    """Log directory, overridable through MROS_LOG_DIR."""
    return os.getenv("MROS_LOG_DIR", DEFAULT_LOGS_DIR)


def ensure_logs_dir(path: Optional[str] = None) -> str:
    """Ensure the logs directory exists and return it."""
    path = path or logs_dir()
    os.makedirs(path, exist_ok=True)
    return path


def get_logger(name: str, log_to_file: bool = False) -> logging.Logger:
    """
    Get a configured logger instance.

    Args:
        name: Logger name (typically module name)
        log_to_file: Whether to also log to a timestamped file

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    if logger.handlers:
        return logger  # Already configured

    logger.setLevel(logging.DEBUG)
    logger.propagate = False

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.INFO)
    console_handler.setFormatter(logging.Formatter(
        '%(asctime)s [%(levelname)s] %(name)s: %(message)s',
        datefmt='%H:%M:%S'
    ))
    logger.addHandler(console_handler)

    if log_to_file:
        directory = ensure_logs_dir()
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        file_handler = logging.FileHandler(os.path.join(directory, f"mros_{timestamp}.log"), encoding='utf-8')
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(
            '%(asctime)s [%(levelname)s] %(name)s: %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        ))
        logger.addHandler(file_handler)

    return logger


_mirror_handler: Optional[logging.Handler] = None


def attach_file_handler(path: str) -> None:
    """Mirror every ``mros.*`` logger into ``path`` at DEBUG level, replacing the previous mirror."""
    global _mirror_handler
    loggers = [
        logger for name, logger in list(logging.root.manager.loggerDict.items())
        if name.startswith("mros") and isinstance(logger, logging.Logger) and logger.handlers
    ]
    if _mirror_handler is not None:
        for logger in loggers:
            logger.removeHandler(_mirror_handler)
        _mirror_handler.close()
    handler = logging.FileHandler(path, encoding='utf-8')
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(logging.Formatter(
        '%(asctime)s [%(levelname)s] %(name)s: %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    ))
    for logger in loggers:
        logger.addHandler(handler)
    _mirror_handler = handler


class RunLogger:
    """
    Structured logger for training and evaluation runs.
    Saves events as JSON for later analysis.
    """

    def __init__(self, session_id: Optional[str] = None, log_dir: Optional[str] = None):
        self.log_dir = ensure_logs_dir(log_dir)
        self.session_id = session_id or datetime.now().strftime("%Y%m%d_%H%M%S")
        self.log_file = os.path.join(self.log_dir, f"run_{self.session_id}.json")
        self.events = []

    def log_event(self, event_type: str, stage: str, data: Dict[str, Any]):
        """Log a structured event."""
        self.events.append({
            "timestamp": datetime.now().isoformat(),
            "type": event_type,
            "stage": stage,
            "data": data
        })
        self._save()

    def log_setting(self, stage: str, setting: str, fingerprint: str, parameter_count: int):
        self.log_event("setting", stage, {
            "setting": setting,
            "fingerprint": fingerprint,
            "parameter_count": parameter_count
        })

    def log_epoch(self, stage: str, epoch: int, lr: float, losses: Dict[str, float]):
        self.log_event("epoch", stage, {"epoch": epoch, "lr": lr, **losses})

    def log_evaluation(self, stage: str, epoch: int, metrics: Dict[str, float]):
        self.log_event("evaluation", stage, {"epoch": epoch, **metrics})

    def log_error(self, stage: str, error: str, part: Optional[str] = None):
        self.log_event("error", stage, {"part": part, "error": error})

    def _save(self):
        try:
            with open(self.log_file, 'w', encoding='utf-8') as f:
                json.dump({"session_id": self.session_id, "events": self.events}, f, indent=2)
        except OSError as e:
            logging.getLogger("mros.utils.logging").warning(f"Failed to save run log: {e}")

    def get_summary(self) -> Dict[str, Any]:
        """Get run summary."""
        epochs = [e for e in self.events if e['type'] == 'epoch']
        evaluations = [e for e in self.events if e['type'] == 'evaluation']
        errors = [e for e in self.events if e['type'] == 'error']
        return {
            "session_id": self.session_id,
            "total_events": len(self.events),
            "epochs": len(epochs),
            "evaluations": len(evaluations),
            "total_errors": len(errors),
            "last_losses": epochs[-1]['data'] if epochs else None,
            "last_metrics": evaluations[-1]['data'] if evaluations else None
        }
