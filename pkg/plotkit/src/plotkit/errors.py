class InputError(Exception):
    """An input artifact is missing, malformed, or inconsistent."""
