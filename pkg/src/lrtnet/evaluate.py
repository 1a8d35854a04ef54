"""Empirical error and criterion measurement on labeled datasets.

A class-1 sample counts as an error when the network output is negative;
a class-2 sample counts as an error when the output is nonnegative (ties
go to class 1).  Alongside the per-class error fractions we report their
unweighted mean, the pooled fraction over both sets, and the empirical
training criterion.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .datasets import LabeledDataset
from .losses import OutputNonlinearity, PhiSpec
from .network import NetParams, forward_batch

DIFFERENCE_MAX = "difference_max"
SUM_MIN = "sum_min"


@dataclass
class EvalReport:
    """Error measurement of one parameter set on one dataset."""

    err1: float
    err2: float
    avg: float
    pooled: float
    n1: int
    n2: int
    misclassified1: list
    misclassified2: list
    j_hat: float | None = None

    def to_dict(self):
        return {
            "err1": self.err1,
            "err2": self.err2,
            "avg": self.avg,
            "pooled": self.pooled,
            "n1": self.n1,
            "n2": self.n2,
            "j_hat": self.j_hat,
            "misclassified1": list(self.misclassified1),
            "misclassified2": list(self.misclassified2),
        }


@dataclass
class EvolutionPoint:
    iteration: int
    err1: float
    err2: float
    avg: float
    j_hat: float


@dataclass
class EvolutionLog:
    """Snapshots of (iteration, err1, err2, avg, j_hat), iterations increasing."""

    points: list = field(default_factory=list)

    def append(self, point: EvolutionPoint):
        if self.points and point.iteration <= self.points[-1].iteration:
            raise ValueError(
                f"iteration {point.iteration} does not exceed {self.points[-1].iteration}"
            )
        self.points.append(point)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def column(self, name):
        return np.array([getattr(p, name) for p in self.points])


def _outputs(params, omega, data):
    y1 = forward_batch(params, data.class1, omega)
    y2 = forward_batch(params, data.class2, omega)
    return y1, y2


def _error_report(y1, y2):
    bad1 = np.nonzero(y1 < 0.0)[0]
    bad2 = np.nonzero(y2 >= 0.0)[0]
    n1, n2 = len(y1), len(y2)
    err1 = len(bad1) / n1
    err2 = len(bad2) / n2
    pooled = (len(bad1) + len(bad2)) / (n1 + n2)
    return EvalReport(
        err1=err1,
        err2=err2,
        avg=0.5 * (err1 + err2),
        pooled=pooled,
        n1=n1,
        n2=n2,
        misclassified1=bad1.tolist(),
        misclassified2=bad2.tolist(),
    )


def _criterion(y1, y2, phi, mode):
    total = len(y1) + len(y2)
    if mode == DIFFERENCE_MAX:
        # the forward output already carries phi, so the criterion is the
        # plain between-class difference of output sums
        return float((y1.sum() - y2.sum()) / total)
    if mode == SUM_MIN:
        return float((np.sum(phi.phi(y1)) + np.sum(phi.phi(-y2))) / total)
    raise ValueError(f"unknown criterion mode {mode!r}")


def empirical_perr(params: NetParams, omega: OutputNonlinearity, data: LabeledDataset) -> EvalReport:
    """Per-class and pooled error fractions of sign(output) on a dataset."""
    return _error_report(*_outputs(params, omega, data))


def empirical_j(params, phi: PhiSpec, omega, data, mode) -> float:
    """Sample estimate of the training criterion.

    In difference mode this is (sum of class-1 outputs minus sum of class-2
    outputs) / (N1 + N2); in sum mode it is the mean penalty
    (phi(y) over class 1 plus phi(-y) over class 2) / (N1 + N2).
    """
    return _criterion(*_outputs(params, omega, data), phi, mode)


def evaluate(params, phi, omega, data, mode) -> EvalReport:
    """Error report with the criterion value filled in (one forward pass)."""
    y1, y2 = _outputs(params, omega, data)
    report = _error_report(y1, y2)
    report.j_hat = _criterion(y1, y2, phi, mode)
    return report


def export_evolution_csv(log: EvolutionLog, path):
    """Write `iteration,err1,err2,avg,j_hat` rows with round-trip floats."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("iteration,err1,err2,avg,j_hat\n")
        for p in log:
            fh.write(f"{p.iteration},{p.err1!r},{p.err2!r},{p.avg!r},{p.j_hat!r}\n")


def load_evolution_csv(path) -> EvolutionLog:
    log = EvolutionLog()
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "iteration,err1,err2,avg,j_hat":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            it, e1, e2, avg, j = line.strip().split(",")
            log.append(EvolutionPoint(int(it), float(e1), float(e2), float(avg), float(j)))
    return log


def export_report_json(report: EvalReport, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
