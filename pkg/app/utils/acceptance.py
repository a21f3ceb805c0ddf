import logging
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)


class CheckResult(BaseModel):
    """Outcome of one acceptance criterion."""
    criterion: int
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""
    profile: str = "quick"
    skipped: bool = False
    metrics: Dict[str, Any] = Field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "criterion": self.criterion,
            "name": self.name,
            "passed": self.passed,
            "value": self.value,
            "threshold": self.threshold,
            "detail": self.detail,
            "profile": self.profile,
            "skipped": self.skipped,
            "metrics": self.metrics,
        }

    def summary_line(self) -> str:
        status = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        value = f" value={self.value:.6g}" if self.value is not None else ""
        threshold = f" threshold={self.threshold:.6g}" if self.threshold is not None else ""
        return f"[{status}] {self.criterion:>2} {self.name}{value}{threshold} {self.detail}".rstrip()


class AcceptanceHandler:
    """Collects check results of a verify run."""

    def __init__(self):
        self.results: List[CheckResult] = []

    def add_result(self, result: CheckResult):
        self.results.append(result)
        log = logger.info if result.passed else logger.error
        log(result.summary_line())

    def record(self, criterion: int, name: str, passed: bool, **kwargs) -> CheckResult:
        result = CheckResult(criterion=criterion, name=name, passed=bool(passed), **kwargs)
        self.add_result(result)
        return result

    def record_failure(self, criterion: int, name: str, error: Exception, profile: str = "quick") -> CheckResult:
        """A criterion whose computation raised counts as failed."""
        return self.record(criterion, name, False, detail=f"{type(error).__name__}: {error}", profile=profile)

    def record_skipped(self, criterion: int, name: str, detail: str, **kwargs) -> CheckResult:
        """Informational measurement that does not gate the run."""
        return self.record(criterion, name, True, skipped=True, detail=detail, **kwargs)

    def get_results(self, passed: Optional[bool] = None, criterion: Optional[int] = None) -> List[CheckResult]:
        filtered = self.results
        if passed is not None:
            filtered = [r for r in filtered if r.passed == passed]
        if criterion is not None:
            filtered = [r for r in filtered if r.criterion == criterion]
        return sorted(filtered, key=lambda r: r.criterion)

    def all_passed(self) -> bool:
        return bool(self.results) and all(r.passed for r in self.results)

    def get_summary(self) -> Dict[str, Any]:
        failed = self.get_results(passed=False)
        skipped = [r for r in self.get_results() if r.skipped]
        return {
            "total": len(self.results),
            "passed": len(self.results) - len(failed) - len(skipped),
            "failed": [r.criterion for r in failed],
            "skipped": [r.criterion for r in skipped],
            "all_passed": self.all_passed(),
        }

    def to_report(self) -> Dict[str, Any]:
        return {"summary": self.get_summary(), "results": [r.to_dict() for r in self.get_results()]}
