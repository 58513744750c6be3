"""Validators for values arriving from the command line or a config file."""
from src.reconstruction.config import KNOWN_ACTIVATIONS, MIN_RESOLUTION
from src.reconstruction.errors import ConfigurationError
from src.reconstruction.pipeline import fixed_architecture


def validate_resolution(value):
    """Validate grid resolution."""
    value = int(value)
    if value < MIN_RESOLUTION:
        raise ConfigurationError(f"resolution ≥ {MIN_RESOLUTION} required, got {value}")
    return value


def validate_activation(value):
    """Validate one activation name."""
    name = value.strip().lower()
    if name not in KNOWN_ACTIVATIONS:
        raise ConfigurationError(f"Invalid activation value: {value}")
    return name


def validate_activations(text):
    """Comma-separated activation names, in order, without duplicates."""
    names = []
    for token in text.split(","):
        if token.strip():
            name = validate_activation(token)
            if name not in names:
                names.append(name)
    if not names:
        raise ConfigurationError("at least one activation is required")
    return tuple(names)


def parse_arch(text, enforce_caps=True):
    """Parse an architecture string or alias; optionally require it to fit the search-space caps."""
    arch = fixed_architecture(text)
    if enforce_caps:
        arch.validate()
    return arch
