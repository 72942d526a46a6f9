from typing import Any, Optional

# тексты ошибок по коду (добавлять по мере нужды)
MESSAGES = {
    "negative_weight": "Weight {index} is negative: {value}",
    "zero_mass": "All weights are zero",
    "index_out_of_range": "Index {index} outside support of size {size}",
    "support_mismatch": "Support sizes differ: {left} vs {right}",
    "param_out_of_range": "Parameter {name}={value} outside {allowed}",
    "not_implemented_for_positive_a": (
        "Absorption oracle requires a = 0, got a={a}"
    ),
    "state_space_too_large": (
        "Empirical-measure state space has {states} states (limit {limit})"
    ),
    "mu0_not_representable": "N*mu0 is not integral for N={N}",
    "dimension_mismatch": "{what}: expected {expected}, got {got}",
    "not_irreducible": "Chain is not irreducible at this point: {reason}",
    "not_differentiable": "Chain {chain} has no derivative for mode=full",
    "non_finite_iterate": "Iterate diverged at step {n}",
    "degenerate_variance": "Variance must be > 0, got {var}",
    "no_branch_metadata": "Landscape {name} has no branch metadata",
    "overlapping_regions": "Regions {i} and {j} overlap",
    "empty_bins": "No samples fall into any bin",
    "non_positive_eigenvalue": "Eigenvalue {value} at minimum {k} is <= 0",
    "config_parse": "{message}",
    "unknown_experiment": "Unknown experiment: {name}",
    "unknown_name": "Unknown {kind}: {name}",
    "output_conflict": (
        "{path} already holds a run with a different config hash"
    ),
}


def t(code: str, **fields: Any) -> str:
    template = MESSAGES.get(code)
    if not template:
        return code
    try:
        return template.format(**fields)
    except (KeyError, IndexError):
        return template


class LabError(Exception):
    code = "lab_error"
    exit_code = 2

    def __init__(self, message: Optional[str] = None, **fields: Any):
        self.fields = fields
        super().__init__(message or t(self.code, **fields))


class NegativeWeightError(LabError, ValueError):
    code = "negative_weight"


class ZeroMassError(LabError, ValueError):
    code = "zero_mass"


class IndexOutOfRangeError(LabError, IndexError):
    code = "index_out_of_range"


class SupportMismatchError(LabError, ValueError):
    code = "support_mismatch"


class ParamOutOfRangeError(LabError, ValueError):
    code = "param_out_of_range"


class NotImplementedForPositiveAError(LabError):
    code = "not_implemented_for_positive_a"


class StateSpaceTooLargeError(LabError):
    code = "state_space_too_large"


class Mu0NotRepresentableError(LabError, ValueError):
    code = "mu0_not_representable"


class DimensionMismatchError(LabError, ValueError):
    code = "dimension_mismatch"


class NotIrreducibleError(LabError):
    code = "not_irreducible"


class NotDifferentiableError(LabError):
    code = "not_differentiable"


class NonFiniteIterateError(LabError, ArithmeticError):
    code = "non_finite_iterate"

    def __init__(self, n: int, record: Any = None, state: Any = None):
        # record: частичная траектория до расхождения
        self.record = record
        self.state = state
        super().__init__(n=n)


class DegenerateVarianceError(LabError, ValueError):
    code = "degenerate_variance"


class NoBranchMetadataError(LabError):
    code = "no_branch_metadata"


class OverlappingRegionsError(LabError, ValueError):
    code = "overlapping_regions"


class EmptyBinsError(LabError, ValueError):
    code = "empty_bins"


class NonPositiveEigenvalueError(LabError, ValueError):
    code = "non_positive_eigenvalue"


class ConfigError(LabError):
    code = "config_parse"
    exit_code = 1


class ConfigParseError(ConfigError):
    code = "config_parse"


class UnknownExperimentError(ConfigError):
    code = "unknown_experiment"


class UnknownNameError(ConfigError, KeyError):
    code = "unknown_name"

    def __str__(self) -> str:
        # KeyError иначе заворачивает сообщение в кавычки
        return self.args[0] if self.args else self.code


class OutputConflictError(ConfigError):
    code = "output_conflict"
