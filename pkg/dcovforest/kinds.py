from __future__ import annotations

__all__ = [
    "DCovKind",
    "Domain",
    "Method",
    "Metric",
    "SweepVariable",
    "CsvScenario",
]

from enum import StrEnum


class DCovKind(StrEnum):
    V = "V"  # biased, non-negative
    U = "U"  # unbiased, O(n^2) reference
    FastU = "FastU"  # unbiased, O(n log n)

    @property
    def is_unbiased(self) -> bool:
        return self is not DCovKind.V

    @property
    def min_samples(self) -> int:
        """Smallest sample size for which the estimator is defined."""
        return 4 if self.is_unbiased else 1

    @classmethod
    def from_name(cls, name: str) -> DCovKind:
        """Case-insensitive lookup, accepting `fast_u` / `fastu` spellings."""
        normalized = name.replace("_", "").replace("-", "").lower()
        for kind in cls:
            if kind.value.lower() == normalized:
                return kind
        raise ValueError(f"Invalid distance covariance estimator kind: {name}")


class Domain(StrEnum):
    Source = "source"
    Target = "target"
    Test = "test"


class Method(StrEnum):
    CRF = "CRF"
    SRF = "SRF"
    TLCRF = "TLCRF"
    TLSRF = "TLSRF"
    SourceOnly = "SourceOnly"
    RFDCOV = "RFDCOV"

    @property
    def uses_source(self) -> bool:
        return self in {Method.TLCRF, Method.TLSRF, Method.SourceOnly}

    @property
    def uses_target(self) -> bool:
        return self is not Method.SourceOnly

    @property
    def is_centered(self) -> bool:
        return self in {Method.CRF, Method.TLCRF, Method.SourceOnly}


class Metric(StrEnum):
    MSE = "MSE"
    OneMinusAUC = "OneMinusAUC"


class SweepVariable(StrEnum):
    r = "r"
    n_t = "n_t"
    mtry = "mtry"
    target_train_size = "target_train_size"
    target_group = "target_group"

    @property
    def is_numeric(self) -> bool:
        return self is not SweepVariable.target_group


class CsvScenario(StrEnum):
    Holdout = "holdout"  # fresh 70/30 target split per replicate
    FixedTest = "fixed_test"  # one fixed test set, varying target training size
    PerGroup = "per_group"  # each target group in turn, holdout split within it
