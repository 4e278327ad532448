"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class EntangledIdError(Exception):
    """Base class for all errors raised by this package."""


class InputError(EntangledIdError):
    """Errors caused by malformed user input (specs, scenarios, data files)."""
