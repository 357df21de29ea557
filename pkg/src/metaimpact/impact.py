"""Signed impact curves in rescaled time, bucket averaging, power-law fits,
temporary/permanent impact extraction, square-root-law and fair-pricing checks.

Conventions: impact is the relative price move against the price prevailing
just before the metaorder started (quote mid where available, else last trade,
else the first fill itself), multiplied by the metaorder sign. Execution is
mapped to volume time [0, 1] (cumulative executed quantity over total size)
and relaxation to (1, 2] (physical time over one extra duration).

Per-metaorder path computation is independent across metaorders; pooling and
bucketing are sequential reductions over those immutable paths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .records import (
    CurvePoint,
    FairPricingPoint,
    ImpactCurve,
    Metaorder,
    Phase,
    PowerLawFit,
    TradeTape,
)

__all__ = [
    "return_proxy",
    "reference_price",
    "ImpactPath",
    "signed_impact_path",
    "bucket_average",
    "impact_dynamics",
    "DynamicsResult",
    "temporary_impact",
    "permanent_impact",
    "fit_power_law",
    "square_root_analysis",
    "SqrtLawResult",
    "vwap",
    "fair_pricing_check",
    "FairPricingResult",
]

DEFAULT_RELAX_GRID = 50
DEFAULT_EXEC_GRID = 100
# terminal execution bucket is flagged when shortest metaorders dominate it
ARTIFACT_N2_SHARE = 0.5


def return_proxy(p_t: float, p_t0: float) -> float:
    """Relative price move (p_t - p_t0) / p_t0."""
    if p_t0 <= 0:
        raise ValueError(f"reference price must be positive, got {p_t0}")
    return (p_t - p_t0) / p_t0


def reference_price(metaorder: Metaorder, tape: TradeTape | None) -> tuple[float, str]:
    """Price prevailing at the metaorder start, with its provenance.

    Prefers the quote mid just before t0, then the last trade strictly
    before t0, then falls back to the first fill price itself.
    """
    if tape is not None:
        mid = tape.mid_at_or_before(metaorder.t0_ms, strict=True)
        if mid is not None:
            return mid, "quote_mid"
        last = tape.last_trade_price_before(metaorder.t0_ms, strict=True)
        if last is not None:
            return last, "last_trade"
    return float(metaorder.fills[0].price), "first_fill"


@dataclass(frozen=True)
class ImpactPath:
    """Signed impact of one metaorder over rescaled time.

    Execution carries one point per merged fill at volume time
    cum-quantity / Q; relaxation is sampled on a uniform physical-time grid
    over (t0+T, t0+2T] mapped to (1, 2]. ``truncated`` marks tapes that end
    before t0+2T: such paths keep execution points but are excluded from
    relaxation aggregation.
    """

    metaorder: Metaorder
    exec_vt: np.ndarray
    exec_signed: np.ndarray
    relax_vt: np.ndarray
    relax_signed: np.ndarray
    reference: float
    reference_source: str
    relax_proxy: bool
    truncated: bool

    def exec_on_grid(self, grid: np.ndarray) -> np.ndarray:
        """Step-function resample of the execution path on a volume-time grid:
        the impact standing after the last fill at or before each grid time,
        zero before the first fill."""
        k = np.searchsorted(self.exec_vt, grid, side="right")
        vals = np.where(k > 0, self.exec_signed[np.maximum(k - 1, 0)], 0.0)
        return vals


def signed_impact_path(
    metaorder: Metaorder,
    tape: TradeTape | None,
    relax_grid: int = DEFAULT_RELAX_GRID,
) -> ImpactPath:
    """Measure the metaorder's signed impact path against the tape.

    Execution-phase prices are the merged fill prices; relaxation uses quote
    mids where quotes exist and falls back to the last trade price (flagged
    as proxy) otherwise.
    """
    ref, source = reference_price(metaorder, tape)
    eps = metaorder.sign
    q = np.cumsum([f.quantity for f in metaorder.fills], dtype=np.float64)
    exec_vt = q / q[-1]
    prices = np.array([float(f.price) for f in metaorder.fills])
    exec_signed = eps * (prices - ref) / ref

    t0, t_ms = metaorder.t0_ms, metaorder.duration_ms
    relax_end = t0 + 2 * t_ms
    truncated = tape is None or tape.last_event_ms < relax_end
    relax_vt: list[float] = []
    relax_signed: list[float] = []
    proxy = False
    if tape is not None:
        for j in range(1, relax_grid + 1):
            tau = t0 + t_ms + round(j * t_ms / relax_grid)
            if tau > tape.last_event_ms:
                break
            mid = tape.mid_at_or_before(tau)
            if mid is None:
                mid = tape.last_trade_price_before(tau, strict=False)
                if mid is None:
                    continue
                proxy = True
            relax_vt.append(1.0 + j / relax_grid)
            relax_signed.append(eps * (mid - ref) / ref)
    return ImpactPath(
        metaorder=metaorder,
        exec_vt=exec_vt,
        exec_signed=exec_signed,
        relax_vt=np.asarray(relax_vt),
        relax_signed=np.asarray(relax_signed),
        reference=ref,
        reference_source=source,
        relax_proxy=proxy,
        truncated=truncated,
    )


def bucket_average(
    xs: Sequence[float], ys: Sequence[float], n_buckets: int
) -> list[tuple[float, float]]:
    """Sort pairs by x (stable), split into n_buckets contiguous groups as
    equal in count as possible, and return the arithmetic mean pair of each
    group, sorted by mean x."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise ValueError("xs and ys must have equal length")
    if n_buckets < 1:
        raise ValueError("n_buckets must be positive")
    if x.size < n_buckets:
        raise ValueError(f"fewer points ({x.size}) than buckets ({n_buckets})")
    order = np.argsort(x, kind="stable")
    xs_sorted, ys_sorted = x[order], y[order]
    out = [
        (float(gx.mean()), float(gy.mean()))
        for gx, gy in zip(np.array_split(xs_sorted, n_buckets), np.array_split(ys_sorted, n_buckets))
    ]
    out.sort(key=lambda p: p[0])
    return out


def _partition_runs(counts: np.ndarray, n_groups: int) -> list[np.ndarray]:
    """Split run indices into n_groups contiguous groups with near-equal
    total counts, never splitting a run."""
    total = counts.sum()
    cum = np.cumsum(counts)
    groups: list[np.ndarray] = []
    start = 0
    for g in range(1, n_groups):
        target = total * g / n_groups
        cut = int(np.searchsorted(cum, target, side="left"))
        if cum[cut] - target > target - (cum[cut - 1] if cut > 0 else 0):
            cut -= 1
        cut = max(cut, start - 1)
        if cut >= start:
            groups.append(np.arange(start, cut + 1))
            start = cut + 1
    groups.append(np.arange(start, len(counts)))
    return [g for g in groups if len(g)]


def _bucket_ties(
    x: np.ndarray, y: np.ndarray, n_buckets: int
) -> list[tuple[float, float, int]]:
    """Equal-count bucketing that never splits identical-x runs.

    Returns (mean x, mean y, count) per bucket. Used for pooled dynamics
    curves, where rescaled-time values sit on shared grids and splitting an
    atom across buckets would manufacture duplicate curve points.
    """
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    uniq, start_idx, counts = np.unique(xs, return_index=True, return_counts=True)
    sums = np.add.reduceat(ys, start_idx)
    n_groups = min(n_buckets, len(uniq))
    out = []
    for grp in _partition_runs(counts, n_groups):
        c = counts[grp].sum()
        out.append(
            (
                float((uniq[grp] * counts[grp]).sum() / c),
                float(sums[grp].sum() / c),
                int(c),
            )
        )
    return out


@dataclass(frozen=True)
class DynamicsResult:
    curve: ImpactCurve
    n_metaorders: int
    n_truncated: int
    n_missing_tape: int
    exec_sampling: str


def impact_dynamics(
    metaorders: Sequence[Metaorder],
    tapes: Mapping[tuple[str, str], TradeTape],
    n_buckets: int = 100,
    exec_sampling: str = "grid",
    exec_grid: int = DEFAULT_EXEC_GRID,
    relax_grid: int = DEFAULT_RELAX_GRID,
) -> DynamicsResult:
    """Pool signed impact over all metaorders and bucket each phase.

    ``exec_sampling``:

    * ``"grid"`` (default): each metaorder's execution path is resampled as a
      step function on a shared uniform volume-time grid, so every metaorder
      carries equal weight at every rescaled time, mirroring the relaxation
      sampling.
    * ``"per_fill"``: the raw one-point-per-merged-fill paths are pooled, so
      longer metaorders contribute more points.

    In both modes the completion points (volume time exactly 1, one per
    metaorder) form their own terminal bucket; it is flagged as an artifact
    when over half of it comes from length-2 metaorders, which are
    over-represented there.
    """
    if not metaorders:
        raise ValueError("impact_dynamics requires at least one metaorder")
    if exec_sampling not in ("grid", "per_fill"):
        raise ValueError(f"unknown exec_sampling {exec_sampling!r}")

    n_missing = 0
    n_truncated = 0
    used = 0
    n2_terminal = 0

    grid = np.arange(1, exec_grid + 1) / exec_grid
    grid_sum = np.zeros(exec_grid)
    grid_cnt = 0
    pf_vt: list[np.ndarray] = []
    pf_val: list[np.ndarray] = []
    pf_is_n2: list[np.ndarray] = []

    relax_sum = np.zeros(relax_grid)
    relax_cnt = np.zeros(relax_grid, dtype=np.int64)
    proxy_points = 0
    relax_points = 0

    for m in metaorders:
        tape = tapes.get((m.instrument_id, m.day.isoformat()))
        if tape is None:
            n_missing += 1
            continue
        path = signed_impact_path(m, tape, relax_grid=relax_grid)
        used += 1
        if exec_sampling == "grid":
            grid_sum += path.exec_on_grid(grid)
            grid_cnt += 1
            if m.length == 2:
                n2_terminal += 1
        else:
            pf_vt.append(path.exec_vt)
            pf_val.append(path.exec_signed)
            pf_is_n2.append(np.full(m.length, m.length == 2))
        if path.truncated:
            n_truncated += 1
            continue
        if len(path.relax_vt):
            idx = np.rint(path.relax_vt * relax_grid).astype(int) - relax_grid - 1
            relax_sum[idx] += path.relax_signed
            relax_cnt[idx] += 1
            relax_points += len(idx)
            if path.relax_proxy:
                proxy_points += len(idx)

    if used == 0:
        raise ValueError("no metaorder had a matching tape")
    exec_point_count = grid_cnt * exec_grid if exec_sampling == "grid" else sum(len(v) for v in pf_vt)
    if n_buckets > exec_point_count:
        raise ValueError(
            f"fewer execution points ({exec_point_count}) than buckets ({n_buckets})"
        )
    if relax_points and n_buckets > relax_points:
        raise ValueError(
            f"fewer relaxation points ({relax_points}) than buckets ({n_buckets})"
        )

    points: list[CurvePoint] = []
    if exec_sampling == "grid":
        body_means = grid_sum[:-1] / grid_cnt
        # every metaorder contributes one point per grid time, so grid atoms
        # carry equal weight and plain grouping preserves count-weighted means
        body = _bucket_ties(grid[:-1], body_means, max(n_buckets - 1, 1))
        for bx, by, bc in body:
            points.append(CurvePoint(bx, by, bc * grid_cnt, Phase.EXECUTION))
        terminal_mean = grid_sum[-1] / grid_cnt
        n2_share = n2_terminal / grid_cnt
        points.append(
            CurvePoint(1.0, float(terminal_mean), grid_cnt, Phase.EXECUTION,
                       artifact=n2_share > ARTIFACT_N2_SHARE)
        )
    else:
        vt = np.concatenate(pf_vt)
        val = np.concatenate(pf_val)
        is_n2 = np.concatenate(pf_is_n2)
        terminal = vt >= 1.0 - 1e-12
        body_vt, body_val = vt[~terminal], val[~terminal]
        if len(body_vt):
            for bx, by, bc in _bucket_ties(body_vt, body_val, max(n_buckets - 1, 1)):
                points.append(CurvePoint(bx, by, bc, Phase.EXECUTION))
        term_val = val[terminal]
        n2_share = float(is_n2[terminal].mean()) if terminal.any() else 0.0
        if terminal.any():
            points.append(
                CurvePoint(1.0, float(term_val.mean()), int(terminal.sum()),
                           Phase.EXECUTION, artifact=n2_share > ARTIFACT_N2_SHARE)
            )

    live = relax_cnt > 0
    if live.any():
        relax_means = relax_sum[live] / relax_cnt[live]
        relax_x = (np.arange(1, relax_grid + 1) / relax_grid + 1.0)[live]
        weights = relax_cnt[live].astype(float)
        uniq_groups = _partition_runs(weights, min(n_buckets, int(live.sum())))
        for grp in uniq_groups:
            w = weights[grp]
            points.append(
                CurvePoint(
                    float((relax_x[grp] * w).sum() / w.sum()),
                    float((relax_means[grp] * w).sum() / w.sum()),
                    int(w.sum()),
                    Phase.RELAXATION,
                )
            )

    curve = ImpactCurve(
        points=tuple(points),
        proxy_relaxation_share=proxy_points / relax_points if relax_points else 0.0,
        truncated_metaorders=n_truncated,
    )
    return DynamicsResult(
        curve=curve,
        n_metaorders=used,
        n_truncated=n_truncated,
        n_missing_tape=n_missing,
        exec_sampling=exec_sampling,
    )


def temporary_impact(curve: ImpactCurve) -> float:
    """Signed impact at the end of execution (rescaled time -> 1).

    The terminal bucket is skipped when it is flagged as the short-metaorder
    artifact, in which case the last clean bucket is used.
    """
    execution = curve.execution_points()
    if not execution:
        raise ValueError("curve has no execution points")
    clean = [p for p in execution if not p.artifact]
    chosen = clean[-1] if clean else execution[-1]
    return chosen.mean_signed_impact


def permanent_impact(curve: ImpactCurve) -> float:
    """Signed impact at the end of relaxation (rescaled time -> 2)."""
    relaxation = curve.relaxation_points()
    if not relaxation:
        raise ValueError("curve has no relaxation points")
    return relaxation[-1].mean_signed_impact


def fit_power_law(
    xs: Sequence[float], ys: Sequence[float], method: str = "loglog"
) -> PowerLawFit:
    """Fit y = a * x**b over strictly positive pairs.

    ``loglog`` is ordinary least squares of log y on log x; ``nonlinear``
    refines it by least squares in linear space (for sensitivity checks).
    The reported residual is the RMS log-space error either way.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise ValueError("xs and ys must have equal length")
    if x.size < 3:
        raise ValueError("power-law fit requires at least 3 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit requires strictly positive coordinates")
    lx, ly = np.log(x), np.log(y)
    if np.allclose(lx, lx[0]):
        raise ValueError("degenerate x: all values equal")
    design = np.vstack([np.ones_like(lx), lx]).T
    coef, *_ = np.linalg.lstsq(design, ly, rcond=None)
    a, b = float(np.exp(coef[0])), float(coef[1])
    if method == "nonlinear":
        popt, _ = curve_fit(lambda xv, aa, bb: aa * xv**bb, x, y, p0=(a, b), maxfev=10000)
        a, b = float(popt[0]), float(popt[1])
    elif method != "loglog":
        raise ValueError(f"unknown method {method!r}")
    resid = ly - (np.log(a) + b * lx)
    return PowerLawFit(
        prefactor=a,
        exponent=b,
        residual=float(np.sqrt(np.mean(resid**2))),
        point_count=int(x.size),
    )


@dataclass(frozen=True)
class SqrtLawResult:
    """Scatter of per-metaorder temporary impact against participation rate,
    with duration attached, plus the participation fit and the residual
    regression on duration (zero under the square-root law)."""

    participation: np.ndarray
    signed_impact: np.ndarray
    duration_s: np.ndarray
    fit: PowerLawFit
    duration_coefficient: float
    duration_coefficient_stderr: float
    n_dropped_nonpositive: int


def square_root_analysis(
    metaorders: Sequence[Metaorder],
    tapes: Mapping[tuple[str, str], TradeTape],
) -> SqrtLawResult:
    """Per-metaorder impact vs participation, and the duration dependence of
    the residuals (indistinguishable from zero if impact depends on the
    participation rate alone)."""
    qv: list[float] = []
    imp: list[float] = []
    dur: list[float] = []
    for m in metaorders:
        if m.participation is None:
            raise ValueError("square_root_analysis requires enriched metaorders")
        tape = tapes.get((m.instrument_id, m.day.isoformat()))
        ref, _ = reference_price(m, tape)
        last = float(m.fills[-1].price)
        qv.append(m.participation)
        imp.append(m.sign * return_proxy(last, ref))
        dur.append(m.duration_s)
    if len(qv) < 10:
        raise ValueError(f"square_root_analysis requires >= 10 metaorders, got {len(qv)}")
    qv_arr = np.asarray(qv)
    imp_arr = np.asarray(imp)
    dur_arr = np.asarray(dur)
    positive = imp_arr > 0
    fit = fit_power_law(qv_arr[positive], imp_arr[positive])
    resid = np.log(imp_arr[positive]) - (np.log(fit.prefactor) + fit.exponent * np.log(qv_arr[positive]))
    lt = np.log(dur_arr[positive])
    design = np.vstack([np.ones_like(lt), lt]).T
    coef, *_ = np.linalg.lstsq(design, resid, rcond=None)
    fitted = design @ coef
    dof = max(lt.size - 2, 1)
    s2 = float(np.sum((resid - fitted) ** 2)) / dof
    sxx = float(np.sum((lt - lt.mean()) ** 2))
    stderr = math.sqrt(s2 / sxx) if sxx > 0 else float("nan")
    return SqrtLawResult(
        participation=qv_arr,
        signed_impact=imp_arr,
        duration_s=dur_arr,
        fit=fit,
        duration_coefficient=float(coef[1]),
        duration_coefficient_stderr=stderr,
        n_dropped_nonpositive=int((~positive).sum()),
    )


def vwap(metaorder: Metaorder) -> float:
    """Quantity-weighted average execution price over the merged fills."""
    total = metaorder.total_quantity
    return math.fsum(float(f.price) * f.quantity for f in metaorder.fills) / total


@dataclass(frozen=True)
class FairPricingResult:
    points: tuple[FairPricingPoint, ...]
    slope: float
    intercept: float
    rms_identity: float
    n_excluded_truncated: int


def fair_pricing_check(
    metaorders: Sequence[Metaorder],
    tapes: Mapping[tuple[str, str], TradeTape],
) -> FairPricingResult:
    """Compare 1 + R_vwap with 1 + R at t0+2T per metaorder (start price
    normalized to 1), regress one on the other, and report the RMS deviation
    from the identity line. Metaorders whose tape ends before t0+2T are
    excluded and counted."""
    pts: list[FairPricingPoint] = []
    excluded = 0
    for m in metaorders:
        tape = tapes.get((m.instrument_id, m.day.isoformat()))
        ref, _ = reference_price(m, tape)
        end = m.t0_ms + 2 * m.duration_ms
        if tape is None or tape.last_event_ms < end:
            excluded += 1
            continue
        final = tape.mid_at_or_before(end)
        if final is None:
            final = tape.last_trade_price_before(end, strict=False)
        if final is None:
            excluded += 1
            continue
        pts.append(
            FairPricingPoint(
                r_vwap=return_proxy(vwap(m), ref),
                r_final=return_proxy(final, ref),
                metaorder_key=m.key(),
            )
        )
    if not pts:
        raise ValueError("fair_pricing_check needs at least one complete metaorder")
    x = np.array([1.0 + p.r_vwap for p in pts])
    y = np.array([1.0 + p.r_final for p in pts])
    if np.allclose(x, x[0]):
        slope, intercept = float("nan"), float("nan")
    else:
        design = np.vstack([np.ones_like(x), x]).T
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        intercept, slope = float(coef[0]), float(coef[1])
    return FairPricingResult(
        points=tuple(pts),
        slope=slope,
        intercept=intercept,
        rms_identity=float(np.sqrt(np.mean((y - x) ** 2))),
        n_excluded_truncated=excluded,
    )


CURVE_COLUMNS = ("phase", "rescaled_time", "mean_signed_impact", "count", "artifact")


def write_curve(curve: ImpactCurve, stream) -> None:
    stream.write(",".join(CURVE_COLUMNS) + "\n")
    for p in curve.points:
        stream.write(
            f"{p.phase.value},{p.rescaled_time:.12g},{p.mean_signed_impact:.12g},"
            f"{p.count},{int(p.artifact)}\n"
        )


SQRT_SCATTER_COLUMNS = ("participation", "signed_impact", "duration_s")


def write_sqrt_scatter(result: SqrtLawResult, stream) -> None:
    stream.write(",".join(SQRT_SCATTER_COLUMNS) + "\n")
    for q, i, d in zip(result.participation, result.signed_impact, result.duration_s):
        stream.write(f"{q:.12g},{i:.12g},{d:.12g}\n")


FAIR_PRICING_COLUMNS = ("one_plus_r_vwap", "one_plus_r_final", "agent_id", "instrument_id", "day", "t0_ms")


def write_fair_pricing_points(result: FairPricingResult, stream) -> None:
    stream.write(",".join(FAIR_PRICING_COLUMNS) + "\n")
    for p in result.points:
        agent, instrument, day, t0 = p.metaorder_key
        stream.write(
            f"{1.0 + p.r_vwap:.12g},{1.0 + p.r_final:.12g},{agent},{instrument},{day},{t0}\n"
        )
