from contextlib import contextmanager
from typing import Iterator, Optional

from dbt.events import AdapterLogger
from dbt.exceptions import DbtRuntimeError


logger = AdapterLogger("DDN")


class DdnRuntimeError(DbtRuntimeError):
    exit_code = 1
    CODE = 10001
    MESSAGE = "Runtime Error"

    def __init__(self, msg: str = "", node=None):
        super().__init__(str(msg), node)

    @property
    def type(self) -> str:
        return "Runtime"

    def one_line(self) -> str:
        return f"{self.type} Error: {self.msg}" if self.msg else f"{self.type} Error"


class DdnConfigError(DdnRuntimeError):
    exit_code = 2
    CODE = 10002
    MESSAGE = "Config Error"

    @property
    def type(self) -> str:
        return "Config"


class DdnDimensionError(DdnRuntimeError):
    CODE = 10003
    MESSAGE = "Dimension Error"

    @property
    def type(self) -> str:
        return "Dimension"


class DdnNumericError(DdnRuntimeError):
    exit_code = 4
    CODE = 10004
    MESSAGE = "Numeric Error"

    @property
    def type(self) -> str:
        return "Numeric"


class DdnDataError(DdnRuntimeError):
    exit_code = 3
    CODE = 10005
    MESSAGE = "Data Error"

    @property
    def type(self) -> str:
        return "Data"


class DdnIOError(DdnRuntimeError):
    exit_code = 3
    CODE = 10006
    MESSAGE = "IO Error"

    @property
    def type(self) -> str:
        return "IO"


class DdnUsageError(DdnRuntimeError):
    CODE = 10007
    MESSAGE = "Usage Error"

    @property
    def type(self) -> str:
        return "Usage"


class DdnInternalError(DdnRuntimeError):
    CODE = 10008
    MESSAGE = "Internal Error"

    @property
    def type(self) -> str:
        return "Internal"


class OutOfRangeError(DdnDataError):
    def __init__(self, value: float, lo: float, hi: float):
        self.value = value
        self.lo = lo
        self.hi = hi
        super().__init__(f"value {value!r} is outside the partition range [{lo}, {hi}]")


class DataParseError(DdnDataError):
    def __init__(self, path: str, row: int, column: str, cell: str):
        self.row = row
        self.column = column
        super().__init__(f"{path}: non-numeric cell {cell!r} at row {row}, column '{column}'")


class ZeroVarianceError(DdnDataError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"column '{column}' is constant on the training split")


class ShapeMismatchError(DdnDimensionError):
    def __init__(self, op: str, *shapes):
        rendered = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {rendered}")


def exit_code_for(error: BaseException) -> int:
    return getattr(error, "exit_code", 1)


def describe(error: BaseException) -> str:
    """Single-line rendering; dbt errors otherwise print the message on an indented second line."""
    if isinstance(error, DdnRuntimeError):
        return error.one_line()
    if isinstance(error, DbtRuntimeError):
        return f"{error.type} Error: {error.msg}"
    return str(error)


@contextmanager
def exception_handler(context: Optional[str] = None) -> Iterator[None]:
    try:
        yield

    except DbtRuntimeError:
        # already carries a useful message, raise it without modification.
        raise

    except OSError as e:
        logger.debug("IO failure during {}: {}".format(context, str(e)))
        raise DdnIOError(f"{context}: {e}" if context else str(e)) from e

    except FloatingPointError as e:
        logger.debug("Floating point failure during {}: {}".format(context, str(e)))
        raise DdnNumericError(f"{context}: {e}" if context else str(e)) from e

    except Exception as e:
        logger.debug("Error during {}: {}".format(context, str(e)))
        raise DdnRuntimeError(str(e)) from e
