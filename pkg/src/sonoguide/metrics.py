"""Batch statistics over trial-log collections.

Outcome contingency tests, nonparametric rank statistics, effect sizes,
correlation comparison, and robust descriptives. Conventions are pinned in
each docstring since different packages disagree on defaults: ranks use
midranks, quantiles interpolate linearly (numpy's default), and the
reported U is min(U_a, U_b).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import stats as _sps

from .navkernel import Outcome, TrialLog

OUTCOME_ORDER = (
    Outcome.SUCCESSFUL_COMPLETION,
    Outcome.MISSED_TARGET,
    Outcome.CRITICAL_FAILURE,
)


class MetricsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Outcome tables
# ---------------------------------------------------------------------------

@dataclass
class OutcomeTable:
    """Per-modality counts of (success, missed, critical)."""

    rows: dict[str, tuple[int, int, int]]

    def counts(self, modality: str) -> tuple[int, int, int]:
        return self.rows[modality]

    def percentages(self, modality: str) -> tuple[float, float, float]:
        row = self.rows[modality]
        total = sum(row)
        if total == 0:
            raise MetricsError(f"no trials for modality {modality!r}")
        return tuple(100.0 * c / total for c in row)

    def as_dict(self) -> dict:
        out = {}
        for modality, row in self.rows.items():
            total = sum(row)
            out[modality] = {
                "n": total,
                "success": row[0],
                "missed": row[1],
                "critical": row[2],
                "percent": list(self.percentages(modality)) if total else None,
            }
        return out


def outcome_rates(logs: list[TrialLog], group_key: str | None = None) -> OutcomeTable:
    """Tally classified outcomes per modality (optionally per meta subgroup).

    With ``group_key`` set (e.g. "expertise"), rows are keyed
    "<modality>/<meta[group_key]>" in addition to the plain per-modality rows.
    """
    if not logs:
        raise MetricsError("no trial logs given")
    counter: Counter = Counter()
    for log in logs:
        if log.outcome is None:
            raise MetricsError(f"trial {log.trial_id!r} is not classified")
        col = OUTCOME_ORDER.index(log.outcome)
        counter[(log.modality, col)] += 1
        if group_key and group_key in log.meta:
            counter[(f"{log.modality}/{log.meta[group_key]}", col)] += 1
    keys = sorted({k for k, _ in counter})
    rows = {k: tuple(counter[(k, c)] for c in range(3)) for k in keys}
    return OutcomeTable(rows=rows)


def chi_square(table: OutcomeTable, modalities: tuple[str, str] = ("V", "MS")) -> tuple[float, float]:
    """Pearson chi-square over the 2x3 outcome contingency table (df = 2)."""
    observed = np.array([table.counts(m) for m in modalities], dtype=np.float64)
    return chi_square_counts(observed)


def chi_square_counts(observed) -> tuple[float, float]:
    observed = np.asarray(observed, dtype=np.float64)
    row = observed.sum(axis=1, keepdims=True)
    col = observed.sum(axis=0, keepdims=True)
    total = observed.sum()
    if total <= 0:
        raise MetricsError("empty contingency table")
    expected = row @ col / total
    if (expected <= 0).any():
        raise MetricsError("chi-square undefined: zero expected cell count")
    stat = float(((observed - expected) ** 2 / expected).sum())
    df = (observed.shape[0] - 1) * (observed.shape[1] - 1)
    p = float(_sps.chi2.sf(stat, df))
    return stat, p


# ---------------------------------------------------------------------------
# Rank statistics
# ---------------------------------------------------------------------------

def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def mann_whitney_u(a, b, exact_threshold: int = 20) -> tuple[float, float]:
    """Mann-Whitney U with midrank ties; reports U = min(U_a, U_b).

    p-value: exact enumeration of the rank-sum distribution when both
    groups have <= ``exact_threshold`` observations and no ties straddle
    the groups, otherwise the normal approximation with tie correction and
    continuity correction.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise MetricsError("both samples must be non-empty")
    pooled = np.concatenate([a, b])
    ranks = _midranks(pooled)
    r1 = ranks[:n1].sum()
    u1 = n1 * n2 + n1 * (n1 + 1) / 2.0 - r1
    u2 = n1 * n2 - u1
    u = min(u1, u2)

    has_ties = len(np.unique(pooled)) != len(pooled)
    if n1 <= exact_threshold and n2 <= exact_threshold and not has_ties:
        p = _mwu_exact_p(u, n1, n2)
    else:
        mu = n1 * n2 / 2.0
        tie_sum = sum(c ** 3 - c for c in Counter(pooled.tolist()).values())
        n = n1 + n2
        var = n1 * n2 / 12.0 * ((n + 1) - tie_sum / (n * (n - 1)))
        if var == 0:
            return u, 1.0
        z = (u - mu + 0.5) / math.sqrt(var)  # continuity-corrected toward the mean
        p = min(1.0, 2.0 * _sps.norm.cdf(z))
    return u, float(p)


def _mwu_exact_p(u: float, n1: int, n2: int) -> float:
    """Two-sided exact p from the full null distribution of U.

    The distribution is the Gaussian binomial coefficient [n1+n2, n1]_q:
    the polynomial prod_{i=1..n1} (1 - q^(n2+i)) / (1 - q^i), whose
    coefficient at q^k counts arrangements with U = k. All updates only
    propagate coefficients upward, so the truncated window is exact.
    """
    size = n1 * n2 + 1
    c = np.zeros(size, dtype=np.float64)
    c[0] = 1.0
    for i in range(1, n1 + 1):
        shift = n2 + i
        if shift < size:
            c[shift:] -= c[: size - shift].copy()
        for k in range(i, size):  # divide by (1 - q^i): strided cumulative sum
            c[k] += c[k - i]
    total = c.sum()
    lo = c[: int(math.floor(u)) + 1].sum()
    return float(min(1.0, 2.0 * lo / total))


def cliffs_delta(a, b) -> float:
    """(P(a > b) - P(a < b)) over all cross pairs; in [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise MetricsError("both samples must be non-empty")
    diff = a[:, None] - b[None, :]
    return float((np.sign(diff)).sum() / (len(a) * len(b)))


def spearman_rho(x, y) -> tuple[float, float]:
    """Pearson correlation of midranks; p from the t approximation (df n-2)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise MetricsError("inputs must have equal length")
    n = len(x)
    if n < 3:
        raise MetricsError("need at least 3 pairs")
    rx = _midranks(x)
    ry = _midranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float((rx @ rx) * (ry @ ry)))
    if denom == 0:
        raise MetricsError("constant input: correlation undefined")
    rho = float((rx @ ry) / denom)
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) == 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = float(2.0 * _sps.t.sf(abs(t), n - 2))
    return rho, p


def fisher_z_compare(rho1: float, n1: int, rho2: float, n2: int) -> tuple[float, float]:
    """Two-sided comparison of independent correlations via Fisher's z."""
    for rho in (rho1, rho2):
        if abs(rho) >= 1.0:
            raise MetricsError("|rho| must be < 1 for the z transform")
    if n1 < 4 or n2 < 4:
        raise MetricsError("need n >= 4 per group")
    z = (math.atanh(rho1) - math.atanh(rho2)) / math.sqrt(1.0 / (n1 - 3) + 1.0 / (n2 - 3))
    p = float(2.0 * _sps.norm.sf(abs(z)))
    return z, p


# ---------------------------------------------------------------------------
# Descriptives and dispersion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Descriptives:
    n: int
    median: float
    mad: float
    iqr: float
    min: float
    max: float

    def as_dict(self) -> dict:
        return {
            "n": self.n, "median": self.median, "mad": self.mad,
            "iqr": self.iqr, "min": self.min, "max": self.max,
        }


def descriptives(samples) -> Descriptives:
    """Median, median absolute deviation, IQR (linear-interpolation
    quantiles), and range."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise MetricsError("empty sample")
    med = float(np.median(x))
    mad = float(np.median(np.abs(x - med)))
    q1, q3 = np.percentile(x, [25.0, 75.0])
    return Descriptives(
        n=int(x.size),
        median=med,
        mad=mad,
        iqr=float(q3 - q1),
        min=float(x.min()),
        max=float(x.max()),
    )


def fligner_killeen(a, b) -> tuple[float, float]:
    """Fligner-Killeen dispersion test for two groups.

    Median-centers each group, ranks the pooled absolute deviations,
    transforms ranks to half-normal scores, and compares group means of
    the scores; chi-square reference with df = 1.
    """
    groups = [np.asarray(g, dtype=np.float64) for g in (a, b)]
    if any(len(g) == 0 for g in groups):
        raise MetricsError("both groups must be non-empty")
    centered = [np.abs(g - np.median(g)) for g in groups]
    pooled = np.concatenate(centered)
    n = len(pooled)
    ranks = _midranks(pooled)
    scores = _sps.norm.ppf(0.5 + ranks / (2.0 * (n + 1.0)))
    grand = scores.mean()
    var = scores.var(ddof=1)
    if var == 0:
        raise MetricsError("degenerate input: all deviations identical")
    stat = 0.0
    offset = 0
    for g in groups:
        k = len(g)
        stat += k * (scores[offset:offset + k].mean() - grand) ** 2
        offset += k
    stat /= var
    p = float(_sps.chi2.sf(stat, len(groups) - 1))
    return float(stat), p


# ---------------------------------------------------------------------------
# Report assembly over log collections
# ---------------------------------------------------------------------------

def accuracy_samples(logs: list[TrialLog], modality: str) -> dict[str, np.ndarray]:
    """Placement metrics from successful trials of one modality."""
    ok = [
        log for log in logs
        if log.modality == modality and log.outcome is Outcome.SUCCESSFUL_COMPLETION
    ]
    return {
        "min_dist_pericardium": np.array(
            [log.min_dist_pericardium for log in ok if log.min_dist_pericardium is not None]
        ),
        "dist_to_target": np.array(
            [log.dist_to_target for log in ok if log.dist_to_target is not None]
        ),
        "execution_time": np.array(
            [log.execution_time for log in ok if log.execution_time is not None]
        ),
    }


def analyze_logs(logs: list[TrialLog], modalities: tuple[str, str] = ("V", "MS")) -> dict:
    """Full comparison report across two modalities, as a plain dict.

    Nonparametric throughout: the placement metrics in this domain are
    skewed, so normality is not assumed anywhere.
    """
    table = outcome_rates(logs, group_key="expertise")
    report: dict = {"outcomes": table.as_dict()}
    present = [m for m in modalities if m in table.rows]
    if len(present) == 2:
        observed = np.array([table.counts(m) for m in modalities], dtype=np.float64)
        nonzero = observed.sum(axis=0) > 0  # drop never-observed categories
        observed = observed[:, nonzero]
        if observed.shape[1] >= 2:
            stat, p = chi_square_counts(observed)
            report["outcome_chi_square"] = {
                "statistic": stat, "p": p, "df": observed.shape[1] - 1,
            }

    for metric in ("min_dist_pericardium", "dist_to_target", "execution_time"):
        entry: dict = {}
        samples = {m: accuracy_samples(logs, m)[metric] for m in modalities}
        for m in modalities:
            if len(samples[m]):
                entry[m] = descriptives(samples[m]).as_dict()
        a, b = samples[modalities[0]], samples[modalities[1]]
        if len(a) and len(b):
            u, p = mann_whitney_u(a, b)
            entry["mann_whitney"] = {"U": u, "p": p}
            entry["cliffs_delta"] = cliffs_delta(a, b)
            try:
                fstat, fp = fligner_killeen(a, b)
                entry["fligner"] = {"statistic": fstat, "p": fp}
            except MetricsError:
                entry["fligner"] = None
        if entry:
            report[metric] = entry

    # Time-accuracy coupling per modality, compared across modalities.
    corr: dict = {}
    rhos = {}
    for m in modalities:
        s = accuracy_samples(logs, m)
        t, d = s["execution_time"], s["dist_to_target"]
        if len(t) >= 3 and len(t) == len(d):
            try:
                rho, p = spearman_rho(t, d)
            except MetricsError:
                continue
            corr[m] = {"rho": rho, "p": p, "n": len(t)}
            rhos[m] = (rho, len(t))
    if len(rhos) == 2:
        (r1, k1), (r2, k2) = (rhos[m] for m in modalities)
        if abs(r1) < 1 and abs(r2) < 1 and min(k1, k2) >= 4:
            z, p = fisher_z_compare(r1, k1, r2, k2)
            corr["fisher_z"] = {"z": z, "p": p}
    if corr:
        report["time_accuracy"] = corr
    return report


def report_markdown(report: dict) -> str:
    """Human-readable rendering of an analyze_logs() report."""
    lines = ["# Trial analysis", "", "## Outcome rates", ""]
    lines.append("| group | n | success | missed | critical |")
    lines.append("|---|---|---|---|---|")
    for group, row in report["outcomes"].items():
        if row["percent"]:
            pct = " / ".join(f"{p:.2f}%" for p in row["percent"])
        else:
            pct = "-"
        lines.append(
            f"| {group} | {row['n']} | {row['success']} | {row['missed']} | {row['critical']} | "
            + pct
        )
    if "outcome_chi_square" in report:
        c = report["outcome_chi_square"]
        lines += ["", f"Chi-square (df={c['df']}): {c['statistic']:.2f}, p = {c['p']:.4g}"]
    for metric in ("min_dist_pericardium", "dist_to_target", "execution_time"):
        if metric not in report:
            continue
        lines += ["", f"## {metric}", ""]
        entry = report[metric]
        for key, val in entry.items():
            if isinstance(val, dict) and "median" in val:
                lines.append(
                    f"- {key}: median {val['median']:.3f}, MAD {val['mad']:.3f}, "
                    f"IQR {val['iqr']:.3f}, range [{val['min']:.3f}, {val['max']:.3f}] (n={val['n']})"
                )
        if "mann_whitney" in entry:
            mw = entry["mann_whitney"]
            lines.append(f"- Mann-Whitney U = {mw['U']:.1f}, p = {mw['p']:.4g}")
        if entry.get("cliffs_delta") is not None:
            lines.append(f"- Cliff's delta = {entry['cliffs_delta']:.3f}")
        if entry.get("fligner"):
            fl = entry["fligner"]
            lines.append(f"- Fligner statistic = {fl['statistic']:.3f}, p = {fl['p']:.4g}")
    if "time_accuracy" in report:
        lines += ["", "## Time-accuracy correlation", ""]
        for key, val in report["time_accuracy"].items():
            if key == "fisher_z":
                lines.append(f"- Fisher z = {val['z']:.2f}, p = {val['p']:.4g}")
            else:
                lines.append(f"- {key}: rho = {val['rho']:.3f}, p = {val['p']:.4g} (n={val['n']})")
    return "\n".join(lines) + "\n"
