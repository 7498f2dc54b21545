"""
Results
-------

Estimation results and their table renderers.
"""

from dataclasses import dataclass, field
import math
import typing as t

import numpy as np
import pandas as pd
from scipy import stats


#: Significance levels of one, two and three stars.
STAR_LEVELS = (0.1, 0.05, 0.01)

EXTRA_ORDER = ("lnalpha", "lnsig1", "lnsig2", "atanhrho", "first_stage_F")


def stars(p_value: float) -> str:
    """
    Return the significance stars of `p_value`.

    >>> [stars(p) for p in (0.2, 0.08, 0.03, 0.001)]
    ['', '*', '**', '***']
    """
    if p_value is None or not math.isfinite(p_value):
        return ""
    return "*" * sum(p_value < level for level in STAR_LEVELS)


@dataclass
class EstimationResult:
    """
    Fitted model.

    ``stats`` holds z statistics for likelihood models and t statistics for least squares
    (``stat_name`` tells which). ``extras`` holds ancillary parameters such as ``lnalpha`` with
    their standard errors in ``extras_se``. ``excluded_rows`` counts complete rows left out because
    their fixed-effect cell perfectly predicts the outcome, so ``n`` plus ``excluded_rows`` is the
    row count after listwise deletion.
    """

    name: str
    family: str
    dependent: str
    columns: t.List[str]
    params: np.ndarray
    cov: np.ndarray
    n: int
    converged: bool = True
    iterations: int = 0
    loglike: t.Optional[float] = None
    loglike_null: t.Optional[float] = None
    r2: t.Optional[float] = None
    pseudo_r2: t.Optional[float] = None
    stat_name: str = "z"
    df_resid: t.Optional[int] = None
    cov_type: str = "nonrobust"
    extras: t.Dict[str, float] = field(default_factory=dict)
    extras_se: t.Dict[str, float] = field(default_factory=dict)
    dropped: t.List[str] = field(default_factory=list)
    boundary: bool = False
    excluded_rows: int = 0
    design: t.Any = field(default=None, repr=False, compare=False)

    @property
    def coefficients(self) -> t.Dict[str, float]:
        return dict(zip(self.columns, map(float, self.params)))

    @property
    def std_errors(self) -> t.Dict[str, float]:
        return dict(zip(self.columns, map(float, np.sqrt(np.diag(self.cov)))))

    @property
    def stats(self) -> t.Dict[str, float]:
        se = self.std_errors
        return {
            name: (coef / se[name] if se[name] > 0 else float("nan"))
            for name, coef in self.coefficients.items()
        }

    @property
    def p_values(self) -> t.Dict[str, float]:
        values = {}
        for name, stat in self.stats.items():
            if not math.isfinite(stat):
                values[name] = float("nan")
            elif self.stat_name == "t" and self.df_resid:
                values[name] = float(2 * stats.t.sf(abs(stat), self.df_resid))
            else:
                values[name] = float(2 * stats.norm.sf(abs(stat)))
        return values

    @property
    def k(self) -> int:
        return len(self.columns)

    def index(self, name: str) -> int:
        return self.columns.index(name)

    def to_dict(self) -> t.Dict[str, t.Any]:
        return {
            "name": self.name,
            "family": self.family,
            "dependent": self.dependent,
            "n": self.n,
            "excluded_rows": self.excluded_rows,
            "converged": self.converged,
            "iterations": self.iterations,
            "boundary": self.boundary,
            "cov_type": self.cov_type,
            "stat_name": self.stat_name,
            "loglike": self.loglike,
            "loglike_null": self.loglike_null,
            "r2": self.r2,
            "pseudo_r2": self.pseudo_r2,
            "coefficients": self.coefficients,
            "std_errors": self.std_errors,
            "stats": self.stats,
            "p_values": self.p_values,
            "extras": dict(self.extras),
            "extras_se": dict(self.extras_se),
            "dropped": list(self.dropped),
        }

    def summary(self) -> str:
        return render_table([self])


def _fmt(value: t.Optional[float], digits: int = 4) -> str:
    if value is None or not math.isfinite(value):
        return ""
    return f"{value:.{digits}f}"


def _terms(
    results: t.Sequence[EstimationResult], terms: t.Optional[t.Sequence[str]]
) -> t.List[str]:
    if terms is not None:
        return list(terms)
    ordered: t.List[str] = []
    for result in results:
        for name in result.columns:
            if name not in ordered and not _is_fixed_effect(name):
                ordered.append(name)
    if "const" in ordered:
        ordered.remove("const")
        ordered.append("const")
    return ordered


def _is_fixed_effect(name: str) -> bool:
    return name.startswith(("year[", "industry[", "year_industry["))


def table_rows(
    results: t.Sequence[EstimationResult],
    terms: t.Optional[t.Sequence[str]] = None,
    *,
    digits: int = 4,
) -> t.List[t.List[str]]:
    """
    Return the cells of a regression table.

    Each term takes two rows, the coefficient with stars and its standard error in parentheses.
    Extras, fixed-effect indicators, N and (pseudo) R² follow. Rows excluded in perfectly
    predicted fixed-effect cells are reported above N when any model has them.
    """
    header = [""] + [f"({i}) {r.name or r.family}".strip() for i, r in enumerate(results, 1)]
    rows = [header, [""] + [r.dependent for r in results]]

    for term in _terms(results, terms):
        coef_row, se_row = [term], [""]
        for result in results:
            if term in result.columns:
                p_value = result.p_values[term]
                coef_row.append(f"{_fmt(result.coefficients[term], digits)}{stars(p_value)}")
                se_row.append(f"({_fmt(result.std_errors[term], digits)})")
            else:
                coef_row.append("")
                se_row.append("")
        rows.extend([coef_row, se_row])

    extras = [name for name in EXTRA_ORDER if any(name in r.extras for r in results)]
    for name in extras:
        row = [name]
        for result in results:
            row.append(_fmt(result.extras.get(name), digits))
        rows.append(row)

    for label, prefix in (("Year FE", "year["), ("Industry FE", "industry[")):
        rows.append([label] + ["Yes" if _has(r, prefix) else "No" for r in results])
    rows.append(
        ["Year x Industry FE"] + ["Yes" if _has(r, "year_industry[") else "No" for r in results]
    )
    if any(r.excluded_rows for r in results):
        rows.append(["Excluded (FE cells)"] + [str(r.excluded_rows) for r in results])
    rows.append(["N"] + [str(r.n) for r in results])
    rows.append(
        ["R2"]
        + [_fmt(r.r2 if r.r2 is not None else r.pseudo_r2, digits) for r in results]
    )
    return rows


def _has(result: EstimationResult, prefix: str) -> bool:
    return any(name.startswith(prefix) for name in result.columns)


def render_table(
    results: t.Sequence[EstimationResult],
    terms: t.Optional[t.Sequence[str]] = None,
    *,
    digits: int = 4,
) -> str:
    """Render results side by side as a plain-text regression table."""
    rows = table_rows(results, terms, digits=digits)
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
    lines = [rule]
    for index, row in enumerate(rows):
        cells = [row[0].ljust(widths[0])] + [
            cell.rjust(width) for cell, width in zip(row[1:], widths[1:])
        ]
        lines.append("  ".join(cells).rstrip())
        if index == 1:
            lines.append(rule)
    lines.append(rule)
    lines.append("Standard errors in parentheses. * p<0.1, ** p<0.05, *** p<0.01")
    return "\n".join(lines) + "\n"


def table_frame(
    results: t.Sequence[EstimationResult],
    terms: t.Optional[t.Sequence[str]] = None,
    *,
    digits: int = 4,
) -> pd.DataFrame:
    """Return the regression table as a data frame for CSV output."""
    rows = table_rows(results, terms, digits=digits)
    return pd.DataFrame(rows[1:], columns=rows[0])
