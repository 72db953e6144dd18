class SimError(Exception):
    """Base class for simulated execution faults."""


class RuntimeFault(SimError):
    """Interpreted contract trapped (division by zero, negative uint, step budget)."""


class InsufficientBalance(SimError):
    pass


class InsufficientTrade(SimError):
    pass


class InsufficientPoolLiquidity(SimError):
    pass


class EmptyPool(SimError):
    pass


class ActiveTickError(SimError):
    pass


class Unauthorized(SimError):
    pass


class UnknownTarget(SimError):
    pass


class StaleState(SimError):
    """Pre-state referenced by a plan or constraint no longer matches."""


class BundleReverted(SimError):
    def __init__(self, index, cause, receipts):
        self.index = index
        self.cause = cause
        self.receipts = receipts
        super().__init__(f"tx {index} faulted: {type(cause).__name__}: {cause}")
