"""Records the convergence history of an iterative fit."""
import csv
from dataclasses import dataclass, field
from typing import List, TextIO, Tuple

TRACE_HEADER = ('iter', 'theta', 'objective')


@dataclass(frozen=True)
class IterationRecord:

    """Membership change and objective value after one iteration."""

    iteration: int
    theta: float
    objective: float


@dataclass
class ConvergenceTrace:

    """Per-iteration history of a fit.

    The trace is filled while the solver runs and returned complete. Empty
    clusters that had to be reseeded are listed as (iteration, cluster) pairs.
    """

    max_iter: int
    records: List[IterationRecord] = field(default_factory=list)
    reseeds: List[Tuple[int, int]] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def thetas(self) -> List[float]:
        return [r.theta for r in self.records]

    @property
    def objectives(self) -> List[float]:
        return [r.objective for r in self.records]

    def append(self, theta: float, objective: float) -> None:
        """Adds the record of the next iteration.

        :raises RuntimeError: if the trace already holds max_iter records
        """
        if len(self.records) >= self.max_iter:
            raise RuntimeError(f'Trace is limited to {self.max_iter} iterations')

        self.records.append(IterationRecord(len(self.records), float(theta), float(objective)))

    def write_csv(self, stream: TextIO) -> None:
        """Writes the trace with the header ``iter,theta,objective``."""
        writer = csv.writer(stream, lineterminator='\n')
        writer.writerow(TRACE_HEADER)
        for r in self.records:
            writer.writerow((r.iteration, repr(r.theta), repr(r.objective)))
