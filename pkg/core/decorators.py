from functools import wraps
import logging

from django.core.management.base import CommandError

from .exceptions import InvalidParameter, SimulationError

logger = logging.getLogger(__name__)

CONFIG_ERROR = 2
RUNTIME_ERROR = 3


def exit_codes(handle):
    """Map domain errors raised by a command's handle() to its exit code."""
    @wraps(handle)
    def wrapper(self, *args, **options):
        try:
            return handle(self, *args, **options)
        except InvalidParameter as exc:
            raise CommandError(f"config error: {one_line(exc)}", returncode=CONFIG_ERROR) from exc
        except SimulationError as exc:
            logger.exception("run failed")
            raise CommandError(f"runtime error: {one_line(exc)}", returncode=RUNTIME_ERROR) from exc
    return wrapper


def one_line(exc):
    if hasattr(exc, 'messages'):
        text = '; '.join(str(message) for message in exc.messages)
    else:
        text = str(exc)
    return ' '.join(text.split())
