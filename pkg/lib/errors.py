"""Structured errors shared by every module and the CLI.

Every error carries a stable code, a human message and a context dict so the
CLI can emit it as JSON and tests can assert on the code instead of text.
"""

ERROR_MESSAGES = {
    "invalid_variable": "Variable definition is invalid.",
    "invalid_staging": "Staging is not a valid CStree staging.",
    "variable_mismatch": "Models or tables are defined over different variables.",
    "out_of_range": "Value is out of range.",
    "invalid_graph": "Graph is invalid for this operation.",
    "undefined_stage": "A stage has no observations; its MLE is undefined.",
    "budget_exceeded": "Search budget exceeded.",
    "unsupported": "Operation is not supported for this input.",
    "invalid_target": "Intervention target is not a union of whole stages.",
    "incomplete_target": "Intervention target is not complete.",
    "invalid_dataset": "Dataset could not be read.",
}


class CStreeError(Exception):
    """Base error: code + message + context."""

    code = "cstree_error"

    def __init__(self, message: str | None = None, **context):
        self.message = message or ERROR_MESSAGES.get(self.code, self.code)
        self.context = context
        super().__init__(self.message)

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "context": _jsonable(self.context)}


class InvalidVariableError(CStreeError):
    code = "invalid_variable"


class InvalidStagingError(CStreeError):
    """Carries the violation list of the failed validation in context['violations']."""

    code = "invalid_staging"


class VariableMismatchError(CStreeError):
    code = "variable_mismatch"


class OutOfRangeError(CStreeError):
    code = "out_of_range"


class GraphError(CStreeError):
    code = "invalid_graph"


class UndefinedStageError(CStreeError):
    code = "undefined_stage"


class BudgetExceededError(CStreeError):
    code = "budget_exceeded"


class UnsupportedError(CStreeError):
    code = "unsupported"


class TargetError(CStreeError):
    code = "invalid_target"


class IncompleteTargetError(CStreeError):
    code = "incomplete_target"


class DatasetError(CStreeError):
    code = "invalid_dataset"


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return str(value)
