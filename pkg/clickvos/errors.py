"""Exception hierarchy shared by every clickvos component.

Each class carries the process exit code the command line maps it to:
0 ok, 1 usage, 2 data error, 3 numeric failure.
"""

from typing import Iterable, List, Optional, Sequence


class ClickVOSError(Exception):
    exit_code: int = 1


class UsageError(ClickVOSError):
    exit_code = 1


class ConfigError(ClickVOSError, ValueError):
    exit_code = 1


class DataError(ClickVOSError):
    exit_code = 2


class FormatError(DataError):

    def __init__(self, path, message: str):
        self.path = str(path)
        super().__init__(f"[clickvos.format] {self.path}: {message}")


class SchemaError(DataError, ValueError):
    pass


class SceneSpecError(DataError, ValueError):
    pass


class AnnotationError(DataError, ValueError):
    pass


class GapError(DataError):

    def __init__(self, gaps: Iterable[str]):
        self.gaps: List[str] = list(gaps)
        listing = "\n  ".join(self.gaps)
        super().__init__(f"[clickvos.evaluate] {len(self.gaps)} gap(s) between predictions and ground truth:\n  {listing}")


class NumericError(ClickVOSError, ArithmeticError):
    exit_code = 3


class NumericOverflowError(NumericError):

    def __init__(self, kind: str, shapes: Sequence[Sequence[int]] = ()):
        self.kind = kind
        self.shapes = [list(s) for s in shapes]
        super().__init__(f"[clickvos.engine] non-finite output from '{kind}' (input shapes {self.shapes})")


class DivergenceError(NumericError):

    def __init__(self, step: int, checkpoint: Optional[str] = None):
        self.step = step
        self.checkpoint = checkpoint
        where = f"; last good parameters written to {checkpoint}" if checkpoint else ""
        super().__init__(f"[clickvos.Trainer] non-finite loss at step {step}{where}")


class ShapeError(ClickVOSError, ValueError):
    exit_code = 3

    def __init__(self, kind: str, shapes: Sequence[Sequence[int]], detail: str = ""):
        self.kind = kind
        self.shapes = [list(s) for s in shapes]
        suffix = f": {detail}" if detail else ""
        super().__init__(f"[clickvos.engine] shape mismatch in '{kind}' for shapes {self.shapes}{suffix}")


class GraphError(ClickVOSError, RuntimeError):
    exit_code = 3


class ModelStateError(ClickVOSError, RuntimeError):
    exit_code = 3
