"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes do not conform for an operation."""

    def __init__(self, op, *shapes, detail=""):
        shown = " vs ".join(s if isinstance(s, str) else str(tuple(s)) for s in shapes)
        msg = f"{op}: incompatible shapes {shown}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.op = op
        self.shapes = shapes


class ArgumentError(ValueError):
    pass


class ConfigError(ValueError):
    pass


class StateError(RuntimeError):
    pass


class ParseError(ValueError):
    """Malformed file contents; ``offset`` is the byte position of the problem."""

    def __init__(self, msg, offset):
        super().__init__(f"{msg} at byte offset {offset}")
        self.offset = offset


class CheckpointError(RuntimeError):
    pass


class TrainingError(RuntimeError):
    pass
