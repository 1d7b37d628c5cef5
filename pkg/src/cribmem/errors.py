"""Exception types shared across the package."""


class NumericsError(RuntimeError):
    """A numerical computation failed (instability, eigensolver breakdown, ...).

    Raised instead of returning garbage; carries a human-readable diagnosis.
    Invalid arguments raise ValueError, not this.
    """
