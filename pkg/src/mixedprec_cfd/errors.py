"""Exception types raised by the package."""


class ConfigurationError(ValueError):
    """An invalid preset name, split form, decomposition or config entry."""

    def __init__(self, message, *, field=None, line=None):
        self.field = field
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"{field}: "
        super().__init__(prefix + message)


class RegistryError(ValueError):
    """Duplicate or unknown field names in a :class:`FieldRegistry`."""


class HaloStaleError(RuntimeError):
    """A stencil read a field whose halos predate its last interior write."""


class ComparisonError(ValueError):
    """Two diagnostic series cannot be compared sample by sample."""
