"""Per-iteration convergence records and their file formats.

At iteration ``r`` the earlier iterate ``U = B_(r-1)`` was solved at output
``F_(r-2)`` and the later ``V = B_(r)`` at ``F_(r-1)``; outputs before
``F_(0) = 0`` are taken as zero. Hence ``delta_U = delta_(r-1)`` and
``delta_V = delta_(r)``.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .bounds import (
    checked_gamma,
    correction_norm_bound,
    eta as eta_ratio,
    lambda_bound_prime,
    lambda_max,
)
from .metrics import delta_norm_vectors, distance_l2, spd_inverse_norm, spectral_norm
from .woodbury import RankTwoDelta, spd_solver, system_matrix, woodbury_delta

TRACE_CSV_HEADER = ["r", "d_l2", "d_l1", "delta_norm", "lambda_bound_prime",
                    "max_contraction_ratio", "per_learner_d_json", "eta_json"]


def fmt(x):
    """17-significant-digit text; ``inf`` for infinity, empty for None."""
    if x is None:
        return ""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _json_array(values):
    return "[" + ",".join(fmt(v) for v in values) + "]"


def jsonable(obj):
    """Replace non-finite floats by strings and numpy scalars by Python ones."""
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _float(v):
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return None if v is None else float(v)


@dataclass
class ClassDiagnostics:
    """Bound ingredients for one learner ``s`` and class column ``j``."""

    s: int
    j: int
    inv_norm_U: float
    inv_norm_V: float
    eta: float
    delta_U_norm: float
    delta_V_norm: float
    H_norm_term: float
    penalty_norm_term: float
    lambda_bound_prime: float
    alpha_U: float
    alpha_V: float
    lambda_max: float
    bound_applicable: bool
    Delta_U_norm: Optional[float] = None
    Delta_V_norm: Optional[float] = None
    gamma: Optional[float] = None
    gamma_closed_form: Optional[float] = None
    gamma_agree: Optional[bool] = None

    def to_dict(self):
        return jsonable(self.__dict__)


def class_diagnostics(H, F_hat_U, F_hat_V, F_V, C, lam, s=0, j=0, gram=None, H_norm=None):
    """All bound quantities for one learner and one class column.

    ``F_hat_U``, ``F_hat_V`` are the outputs the two iterates were solved
    at; ``F_hat_V`` is also the output of ``U`` and ``F_V`` that of ``V``.
    """
    if gram is None:
        gram = H.T @ H
    if H_norm is None:
        H_norm = spectral_norm(H)
    A_U = system_matrix(H, F_hat_U, C, lam, gram)
    A_V = system_matrix(H, F_hat_V, C, lam, gram)
    nU = spd_inverse_norm(A_U)
    nV = spd_inverse_norm(A_V)
    eta_value = eta_ratio(nU, nV)
    dU = delta_norm_vectors(F_hat_V, F_hat_U)
    dV = delta_norm_vectors(F_V, F_hat_V)
    H_term = 1.0 + C * H_norm ** 2
    pen = float(np.sum((H.T @ F_hat_U) ** 2))
    lbp = lambda_bound_prime(H_term, pen, eta_value, dU, dV)
    aU = nU ** 2 * H_norm ** 4
    aV = nV ** 2 * H_norm ** 4
    applicable = (correction_norm_bound(C, lam, aU, dU) is not None
                  and correction_norm_bound(C, lam, aV, dV) is not None)
    out = ClassDiagnostics(s, j, nU, nV, eta_value, dU, dV, H_term, pen, lbp,
                           aU, aV, lambda_max(C, aU, aV, dU, dV), applicable)
    if lam > 0:
        DU = woodbury_delta(H, spd_solver(A_U), RankTwoDelta(F_hat_V, F_hat_U), C, lam)
        DV = woodbury_delta(H, spd_solver(A_V), RankTwoDelta(F_V, F_hat_V), C, lam)
        out.Delta_U_norm = float(np.linalg.norm(DU, 2))
        out.Delta_V_norm = float(np.linalg.norm(DV, 2))
        g = checked_gamma(out.Delta_U_norm, out.Delta_V_norm)
        out.gamma, out.gamma_closed_form, out.gamma_agree = g.gamma, g.closed_form, g.agree
    return out


def iteration_diagnostics(hidden_outputs, F_hat_U, F_hat_V, F_V, C, lam,
                          grams=None, H_norms=None):
    """``[[ClassDiagnostics for j] for s]`` for one iteration."""
    J = F_V.shape[1]
    detail = []
    for s, H in enumerate(hidden_outputs):
        gram = None if grams is None else grams[s]
        Hn = None if H_norms is None else H_norms[s]
        detail.append([
            class_diagnostics(H, F_hat_U[:, j], F_hat_V[:, j], F_V[:, j], C, lam,
                              s=s, j=j, gram=gram, H_norm=Hn)
            for j in range(J)])
    return detail


def summarize_detail(detail):
    """Reduce per-(s, j) diagnostics to the record scalars.

    ``delta_norm`` is the maximum over classes, ``lambda_bound_prime`` the
    minimum over learners and classes, and ``eta[s]`` the maximum over classes.
    """
    delta = max(c.delta_V_norm for c in detail[0])
    lbp = min(c.lambda_bound_prime for row in detail for c in row)
    etas = [max(c.eta for c in row) for row in detail]
    applicable = all(c.bound_applicable for row in detail for c in row)
    return delta, lbp, etas, applicable


@dataclass
class IterationRecord:
    r: int
    d_l2: float
    d_l1: float
    per_learner_d: List[float]
    delta_norm: Optional[float] = None
    lambda_bound_prime: Optional[float] = None
    eta: List[float] = field(default_factory=list)
    contraction_ratio: Optional[float] = None
    bound_applicable: Optional[bool] = None
    detail: Optional[list] = None

    def to_dict(self):
        d = {k: getattr(self, k) for k in
             ("r", "d_l2", "d_l1", "per_learner_d", "delta_norm", "lambda_bound_prime",
              "eta", "contraction_ratio", "bound_applicable")}
        if self.detail is not None:
            d["detail"] = [[c.to_dict() if hasattr(c, "to_dict") else c for c in row]
                           for row in self.detail]
        return jsonable(d)

    @classmethod
    def from_dict(cls, d):
        return cls(
            r=int(d["r"]), d_l2=_float(d["d_l2"]), d_l1=_float(d["d_l1"]),
            per_learner_d=[_float(v) for v in d["per_learner_d"]],
            delta_norm=_float(d.get("delta_norm")),
            lambda_bound_prime=_float(d.get("lambda_bound_prime")),
            eta=[_float(v) for v in d.get("eta", [])],
            contraction_ratio=_float(d.get("contraction_ratio")),
            bound_applicable=d.get("bound_applicable"),
            detail=d.get("detail"))


@dataclass
class ConvergenceTrace:
    records: List[IterationRecord]
    config_echo: object = None

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def column(self, name):
        return [getattr(rec, name) for rec in self.records]

    def max_contraction_ratio(self, upto=None):
        ratios = [rec.contraction_ratio for rec in self.records[:upto]
                  if rec.contraction_ratio is not None]
        return max(ratios) if ratios else None

    def to_dict(self):
        cfg = self.config_echo.to_dict() if self.config_echo is not None else None
        return {"config": cfg, "records": [rec.to_dict() for rec in self.records]}

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_CSV_HEADER)
            for i, rec in enumerate(self.records):
                w.writerow([
                    rec.r, fmt(rec.d_l2), fmt(rec.d_l1), fmt(rec.delta_norm),
                    fmt(rec.lambda_bound_prime), fmt(self.max_contraction_ratio(i + 1)),
                    _json_array(rec.per_learner_d),
                    _json_array(rec.eta),
                ])

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")


def build_trace(history, config=None):
    """Assemble records from raw per-iteration quantities.

    Each history entry is a mapping with ``per_learner_d`` and ``d_l1`` and
    optionally ``delta_norm``, ``lambda_bound_prime``, ``eta``,
    ``bound_applicable`` and ``detail``. ``d_l2`` is recomputed as the sum of
    ``per_learner_d``; the contraction ratio is ``d_l2[r] / d_l2[r-1]`` for
    ``r >= 2`` and is left empty when the previous distance is zero.
    """
    if not history:
        raise ValueError("history is empty")
    records = []
    prev = None
    for i, raw in enumerate(history):
        per = [float(v) for v in raw["per_learner_d"]]
        d = sum(per)
        ratio = None
        if prev is not None and prev > 0:
            ratio = d / prev
        records.append(IterationRecord(
            r=i + 1, d_l2=d, d_l1=float(raw["d_l1"]), per_learner_d=per,
            delta_norm=raw.get("delta_norm"),
            lambda_bound_prime=raw.get("lambda_bound_prime"),
            eta=list(raw.get("eta", [])), contraction_ratio=ratio,
            bound_applicable=raw.get("bound_applicable"),
            detail=raw.get("detail")))
        prev = d
    return ConvergenceTrace(records, config)


@dataclass
class DiagnosticsReport:
    converged: bool
    final_distance: float
    max_contraction_ratio: Optional[float]
    lambda_within_bound_at: Optional[int]
    summary_text: str

    def to_dict(self):
        return jsonable(self.__dict__)


def diagnostics_report(trace, tolerance, lam):
    last = trace.records[-1]
    final = last.d_l2
    converged = final <= tolerance
    qmax = trace.max_contraction_ratio()
    within = next((rec.r for rec in trace.records
                   if rec.lambda_bound_prime is not None and lam < rec.lambda_bound_prime),
                  None)
    parts = [
        f"{len(trace)} iterations, final d_l2={final:.6g}",
        "converged" if converged else f"not converged (tolerance {tolerance:g})",
    ]
    if qmax is not None:
        parts.append(f"max contraction ratio {qmax:.6g}")
    if within is None:
        parts.append(f"lambda={lam:g} never below lambda_bound'")
    else:
        parts.append(f"lambda={lam:g} below lambda_bound' from r={within}")
    return DiagnosticsReport(converged, final, qmax, within, "; ".join(parts))


def empirical_contraction(trainer_step, U, V):
    """``d(T(U), T(V)) / d(U, V)`` with the squared L2 distance."""
    d_uv, _ = distance_l2(U, V)
    if not d_uv > 0:
        raise ValueError("U and V coincide; the contraction ratio is undefined")
    d_t, _ = distance_l2(trainer_step(U), trainer_step(V))
    return d_t / d_uv
