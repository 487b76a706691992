"""Cluster-indexed dataset model, CSV ingestion, and the known randomization design.

The randomization design is restricted to independent per-unit Bernoulli
assignment (constant probability, or a per-unit probability column carried
with the data).  All treatment-vector probabilities are computed and stored
in log space: clusters of 15+ units at p=0.5 already give probabilities near
3e-5, and larger clusters would underflow in linear space.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "UnitRecord",
    "ClusterData",
    "Dataset",
    "DesignPropensity",
    "ValidationReport",
    "DataFormatError",
    "PositivityError",
    "load_dataset",
    "write_dataset",
    "log_design_prob",
    "validate_assumptions",
]


class DataFormatError(ValueError):
    """Malformed input file or schema; message carries the offending row."""


class PositivityError(ValueError):
    """A treatment probability sits on or outside the open interval (0, 1)."""


@dataclass(frozen=True)
class UnitRecord:
    """One row of the canonical file: a single unit inside a cluster."""

    cluster_id: str
    unit_index: int
    treatment: int
    outcome: float
    covariates: np.ndarray

    def __post_init__(self):
        if self.treatment not in (0, 1):
            raise DataFormatError(f"non-binary treatment {self.treatment!r}")
        if not math.isfinite(self.outcome):
            raise DataFormatError(f"non-finite outcome {self.outcome!r}")
        if not np.all(np.isfinite(self.covariates)):
            raise DataFormatError("non-finite covariate")


@dataclass(frozen=True)
class ClusterData:
    """All units of one cluster, row-aligned across X, A, and Y.

    Attributes
    ----------
    cluster_id : str
        Opaque identifier, unique within a Dataset.
    X : (n, K) ndarray
        Covariate matrix, one row per unit.
    A : (n,) int ndarray
        Binary treatment indicators.
    Y : (n,) float ndarray
        Observed outcomes.
    design_p : (n,) float ndarray, optional
        Per-unit design assignment probabilities, when the design carries a
        probability column.  None for constant-probability designs.
    """

    cluster_id: str
    X: np.ndarray
    A: np.ndarray
    Y: np.ndarray
    design_p: np.ndarray | None = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        A = np.asarray(self.A, dtype=int)
        Y = np.asarray(self.Y, dtype=float)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Y", Y)
        if self.design_p is not None:
            object.__setattr__(self, "design_p", np.asarray(self.design_p, dtype=float))
        n = X.shape[0]
        if n < 1:
            raise DataFormatError(f"cluster {self.cluster_id!r} is empty")
        if A.shape != (n,) or Y.shape != (n,):
            raise DataFormatError(
                f"cluster {self.cluster_id!r}: X has {n} rows but A/Y have "
                f"{A.shape[0]}/{Y.shape[0]}"
            )
        if self.design_p is not None and self.design_p.shape != (n,):
            raise DataFormatError(f"cluster {self.cluster_id!r}: design_p length mismatch")
        if not np.isin(A, (0, 1)).all():
            raise DataFormatError(f"cluster {self.cluster_id!r}: non-binary treatment")
        if not (np.isfinite(X).all() and np.isfinite(Y).all()):
            raise DataFormatError(f"cluster {self.cluster_id!r}: non-finite value")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class Dataset:
    """Ordered collection of clusters sharing one covariate layout.

    Immutable after construction; safe to share across workers.
    """

    clusters: tuple[ClusterData, ...]
    covariate_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(self.clusters))
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))
        if len(self.clusters) < 1:
            raise DataFormatError("dataset has no clusters")
        K = len(self.covariate_names)
        ids = set()
        for c in self.clusters:
            if c.cluster_id in ids:
                raise DataFormatError(f"duplicate cluster id {c.cluster_id!r}")
            ids.add(c.cluster_id)
            if c.n_covariates != K:
                raise DataFormatError(
                    f"cluster {c.cluster_id!r} has {c.n_covariates} covariates, expected {K}"
                )

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def n_units(self) -> int:
        return sum(c.n for c in self.clusters)

    @property
    def n_covariates(self) -> int:
        return len(self.covariate_names)


@dataclass(frozen=True)
class DesignPropensity:
    """The known Bernoulli randomization mechanism f(A_i | X_i).

    Units are assigned independently within a cluster.  ``kind`` is either
    "constant" (every unit shares probability ``p``) or "per-unit" (each
    cluster carries its own probability vector in ``ClusterData.design_p``,
    ingested from the column named ``column``).  Correlated or non-Bernoulli
    designs are rejected at construction.
    """

    kind: str = "constant"
    p: float | None = 0.5
    column: str | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "per-unit"):
            raise DataFormatError(f"unsupported design kind {self.kind!r}")
        if self.kind == "constant":
            if self.p is None or not (0.0 < self.p < 1.0):
                raise PositivityError(f"design probability {self.p!r} not in (0, 1)")
        elif self.column is None:
            raise DataFormatError("per-unit design requires a probability column name")

    def probabilities(self, cluster: ClusterData) -> np.ndarray:
        """Per-unit assignment probabilities for one cluster."""
        if self.kind == "constant":
            return np.full(cluster.n, self.p, dtype=float)
        if cluster.design_p is None:
            raise DataFormatError(
                f"cluster {cluster.cluster_id!r} has no design probabilities "
                f"(expected column {self.column!r})"
            )
        return cluster.design_p


def log_design_prob(cluster: ClusterData, design: DesignPropensity) -> float:
    """Log probability of the observed treatment vector under the design.

    Independence within the cluster makes this a sum of per-unit Bernoulli
    log-masses; the result is always finite for valid designs.
    """
    p = design.probabilities(cluster)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise PositivityError(
            f"cluster {cluster.cluster_id!r}: design probability outside (0, 1)"
        )
    a = cluster.A
    return float(np.sum(a * np.log(p) + (1 - a) * np.log1p(-p)))


# ---------------------------------------------------------------------------
# CSV ingestion


def _parse_float(token: str, what: str, row: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DataFormatError(f"non-numeric {what} {token!r}, row {row}") from None
    if not math.isfinite(value):
        raise DataFormatError(f"non-finite {what} {token!r}, row {row}")
    return value


def load_dataset(
    path,
    schema: dict,
    delimiter: str = ",",
) -> Dataset:
    """Read the canonical one-row-per-unit CSV into a Dataset.

    Parameters
    ----------
    path : str or Path
        UTF-8 CSV with a header row.  Lines starting with '#' are ignored.
    schema : dict
        Column mapping with keys ``cluster_id``, ``treatment``, ``outcome``,
        ``covariates`` (list of column names, at least one), and optionally
        ``design_p`` (per-unit design probability column) and ``unit_id``
        (identifier checked for duplicates within a cluster).
    delimiter : str
        Field separator, default comma.

    Rows are grouped by cluster id; file order is preserved both for first
    appearance of each cluster and for units within a cluster.  Row numbers
    in error messages are 1-based over data rows (header excluded).
    """
    for key in ("cluster_id", "treatment", "outcome", "covariates"):
        if key not in schema:
            raise DataFormatError(f"schema is missing {key!r}")
    covariate_names = list(schema["covariates"])
    if not covariate_names:
        raise DataFormatError("schema names no covariate columns")

    with open(path, newline="", encoding="utf-8") as fh:
        rows = csv.reader(
            (line for line in fh if not line.startswith("#")), delimiter=delimiter
        )
        try:
            header = next(rows)
        except StopIteration:
            raise DataFormatError("empty file") from None
        header = [h.strip() for h in header]
        index = {name: i for i, name in enumerate(header)}

        needed = [schema["cluster_id"], schema["treatment"], schema["outcome"]]
        needed += covariate_names
        if schema.get("design_p"):
            needed.append(schema["design_p"])
        if schema.get("unit_id"):
            needed.append(schema["unit_id"])
        for name in needed:
            if name not in index:
                raise DataFormatError(f"missing column {name!r}")

        cid_col = index[schema["cluster_id"]]
        trt_col = index[schema["treatment"]]
        out_col = index[schema["outcome"]]
        cov_cols = [index[name] for name in covariate_names]
        p_col = index[schema["design_p"]] if schema.get("design_p") else None
        uid_col = index[schema["unit_id"]] if schema.get("unit_id") else None

        groups: dict[str, dict] = {}
        n_rows = 0
        for row_number, row in enumerate(rows, start=1):
            if not row:
                continue
            n_rows += 1
            if len(row) != len(header):
                raise DataFormatError(
                    f"expected {len(header)} fields, got {len(row)}, row {row_number}"
                )
            cid = row[cid_col].strip()
            trt_token = row[trt_col].strip()
            if trt_token not in ("0", "1"):
                raise DataFormatError(f"non-binary treatment, row {row_number}")
            outcome = _parse_float(row[out_col], "outcome", row_number)
            covs = [
                _parse_float(row[c], f"covariate {header[c]!r}", row_number)
                for c in cov_cols
            ]
            group = groups.setdefault(
                cid, {"A": [], "Y": [], "X": [], "p": [], "uids": set()}
            )
            if uid_col is not None:
                uid = row[uid_col].strip()
                if uid in group["uids"]:
                    raise DataFormatError(
                        f"duplicate unit id {uid!r} in cluster {cid!r}, row {row_number}"
                    )
                group["uids"].add(uid)
            group["A"].append(int(trt_token))
            group["Y"].append(outcome)
            group["X"].append(covs)
            if p_col is not None:
                p = _parse_float(row[p_col], "design probability", row_number)
                if not (0.0 < p < 1.0):
                    raise PositivityError(
                        f"design probability {p} not in (0, 1), row {row_number}"
                    )
                group["p"].append(p)

    if n_rows == 0:
        raise DataFormatError("empty file")

    clusters = []
    for cid, g in groups.items():
        clusters.append(
            ClusterData(
                cluster_id=cid,
                X=np.asarray(g["X"], dtype=float),
                A=np.asarray(g["A"], dtype=int),
                Y=np.asarray(g["Y"], dtype=float),
                design_p=np.asarray(g["p"], dtype=float) if g["p"] else None,
            )
        )
    return Dataset(clusters=tuple(clusters), covariate_names=tuple(covariate_names))


def write_dataset(
    dataset: Dataset,
    path,
    delimiter: str = ",",
    header_comments: Sequence[str] = (),
) -> None:
    """Write the canonical CSV; floats use repr so a reload is bit-exact."""
    has_p = any(c.design_p is not None for c in dataset.clusters)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for comment in header_comments:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, delimiter=delimiter)
        header = ["cluster_id", "treatment", "outcome", *dataset.covariate_names]
        if has_p:
            header.append("design_p")
        writer.writerow(header)
        for c in dataset.clusters:
            for j in range(c.n):
                row = [c.cluster_id, int(c.A[j]), repr(float(c.Y[j]))]
                row += [repr(float(v)) for v in c.X[j]]
                if has_p:
                    row.append(repr(float(c.design_p[j])) if c.design_p is not None else "")
                writer.writerow(row)


# ---------------------------------------------------------------------------
# Assumption validation


@dataclass
class ValidationReport:
    """Near-positivity diagnostics.  Report-only; never raises.

    ``weight_flags`` holds (policy_index, cluster_id, weight) triples for
    observed cluster weights above the cap; ``propensity_flags`` holds
    (policy_index, cluster_id, unit_index, propensity) for hypothetical
    propensities within tolerance of 0 or 1.
    """

    weight_cap: float
    propensity_tol: float
    n_policies: int = 0
    weight_flags: list = field(default_factory=list)
    propensity_flags: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.weight_flags and not self.propensity_flags


def validate_assumptions(
    dataset: Dataset,
    design: DesignPropensity,
    policies: Iterable,
    weight_cap: float = 100.0,
    propensity_tol: float = 0.01,
) -> ValidationReport:
    """Flag clusters whose policy/design weight ratio or propensities are extreme.

    Positivity holds structurally for Bernoulli designs with p in (0, 1); this
    check surfaces *near* violations that would destabilize the weighting
    estimators: observed cluster weights above ``weight_cap`` and hypothetical
    unit propensities within ``propensity_tol`` of 0 or 1.
    """
    from .allocation import log_policy_prob, solve_policy

    report = ValidationReport(weight_cap=weight_cap, propensity_tol=propensity_tol)
    for r, policy in enumerate(policies):
        report.n_policies += 1
        solved = solve_policy(dataset, policy)
        for i, cluster in enumerate(dataset.clusters):
            p = solved.propensities[i]
            extreme = np.nonzero((p <= propensity_tol) | (p >= 1.0 - propensity_tol))[0]
            for j in extreme:
                report.propensity_flags.append((r, cluster.cluster_id, int(j), float(p[j])))
            log_w = log_policy_prob(cluster, solved, i) - log_design_prob(cluster, design)
            if log_w > math.log(weight_cap):
                report.weight_flags.append((r, cluster.cluster_id, math.exp(log_w)))
    return report
