# app/schemas/__init__.py
from .band_edges import EdgeSelector, EdgeSide

from .coefficients import CoefficientsSpec, SegmentKind, SegmentSpec

from .perturbation import KernelKind, PerturbationKind, PerturbationSpec

from .problem_config import KernelDumpKind, OracleSpec, ProblemConfig, RunSpec

from .reports import ExistenceVerdict, GapEigenvalueReportDTO, VerifyRowDTO
