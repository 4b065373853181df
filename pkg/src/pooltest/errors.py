"""Exception hierarchy for pooltest."""


class PoolTestError(Exception):
    """Base class for all pooltest errors."""


class EmptyPopulation(PoolTestError, ValueError):
    pass


class RiskOutOfRange(PoolTestError, ValueError):
    def __init__(self, subject_id, risk=None):
        self.subject_id = subject_id
        self.risk = risk
        msg = f"risk of subject {subject_id!r} is outside [0, 1]"
        if risk is not None:
            msg += f": {risk!r}"
        super().__init__(msg)


class IndexOutOfRange(PoolTestError, IndexError):
    pass


class CorruptChain(PoolTestError):
    """A label's predecessor chain does not lead back to the root at node 1."""


class NoFeasibleBudget(PoolTestError):
    pass


class InstanceTooLarge(PoolTestError, ValueError):
    pass


class DegenerateTable(PoolTestError):
    pass


class ParseError(PoolTestError, ValueError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class SchemaError(PoolTestError, ValueError):
    pass


class InstanceIOError(PoolTestError, OSError):
    pass
