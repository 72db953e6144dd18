class LangError(Exception):
    pass


class LangSyntaxError(LangError):
    """Raised by the lexer/parser. ``line`` and ``col`` are 1-based and point
    inside the offending token."""

    def __init__(self, line, col, message):
        self.line = line
        self.col = col
        self.message = message
        super().__init__(f"{line}:{col}: {message}")


class ValidationError(LangError):
    def __init__(self, message, line=0, col=0):
        self.line = line
        self.col = col
        self.message = message
        where = f"{line}:{col}: " if line else ""
        super().__init__(f"{where}{message}")
