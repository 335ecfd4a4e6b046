"""Exception hierarchy for EDLGP.

Every error carries the process exit code the CLI reports for it.
"""

from typing import Optional


class EdlgpError(Exception):
    """Base class for all EDLGP errors."""

    exit_code: int = 4


class ConfigError(EdlgpError):
    """Invalid or unreadable configuration."""

    exit_code = 2


class DataLoadError(EdlgpError):
    """Dataset file is missing, malformed or truncated."""

    exit_code = 3

    def __init__(self, message: str, path: Optional[str] = None, offset: Optional[int] = None):
        self.path = path
        self.offset = offset
        details = []
        if path is not None:
            details.append(f"file={path}")
        if offset is not None:
            details.append(f"offset={offset}")
        suffix = f" ({', '.join(details)})" if details else ""
        super().__init__(f"{message}{suffix}")


class TreeParseError(EdlgpError):
    """Malformed genotype text."""

    exit_code = 2

    def __init__(self, message: str, position: int, path: Optional[tuple[int, ...]] = None):
        self.position = position
        self.path = path
        super().__init__(f"{message} at character {position}")


class TypeViolation(EdlgpError):
    """A tree does not type-check against the primitive registry."""

    exit_code = 4

    def __init__(self, message: str, path: tuple[int, ...] = ()):
        self.path = path
        super().__init__(f"{message} at node {format_path(path)}")


class DomainError(EdlgpError):
    """A primitive parameter lies outside its domain."""

    exit_code = 4


class ExecutionError(EdlgpError):
    """A primitive failed while a tree was executed."""

    exit_code = 4

    def __init__(self, message: str, path: tuple[int, ...] = (), primitive: str = ""):
        self.path = path
        self.primitive = primitive
        where = f"{primitive}@{format_path(path)}" if primitive else format_path(path)
        super().__init__(f"{where}: {message}")


class SignatureMismatch(EdlgpError):
    """Data does not match the signature a phenotype was fitted on."""

    exit_code = 2


def format_path(path: tuple[int, ...]) -> str:
    """Render a node path (child indices from the root) as ``root.0.2``."""
    return ".".join(["root", *(str(i) for i in path)])
