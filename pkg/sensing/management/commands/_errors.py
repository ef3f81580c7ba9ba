import logging
from contextlib import contextmanager

from django.core.management.base import CommandError

from sensing.exceptions import ConfigError, ContractViolation, OrdfuseError

logger = logging.getLogger('sensing.commands')

CONFIG_EXIT = 2
RUNTIME_EXIT = 3


@contextmanager
def exit_codes(command):
    """Turn package errors into CommandError with the documented exit codes."""
    try:
        yield
    except (ConfigError, ContractViolation) as exc:
        logger.error("%s rejected: %s", command, exc)
        raise CommandError(str(exc), returncode=CONFIG_EXIT) from exc
    except (OrdfuseError, OSError) as exc:
        logger.error("%s failed: %s", command, exc)
        raise CommandError(str(exc), returncode=RUNTIME_EXIT) from exc
