"""Synthetic order-log and market-tape generator with known ground truth.

Two price models are available:

* ``model``: fill prices follow the closed-form impact schedule of
  :mod:`metaimpact.model` (scaled into return units) plus an optional noise
  walk, and the mid price reverts to the schedule's permanent level over the
  relaxation window. This corpus is the end-to-end oracle for the empirical
  pipeline.
* ``planted``: each metaorder's terminal impact is planted as
  prefactor * participation**a * duration**b, for exercising the
  square-root-law analysis with a known duration effect.

Every metaorder gets its own agent and instrument, so reconstruction is
unambiguous by construction; fills land on distinct whole seconds, so
same-second merging is the identity. Output files parse cleanly with
:mod:`metaimpact.orderlog`, and a ground-truth sidecar records each
metaorder's true length, size, duration, sign and tail exponent.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from datetime import datetime
from zoneinfo import ZoneInfo

import numpy as np

from .model import ModelParams, build_schedule
from .orderlog import ORDER_LOG_COLUMNS, TAPE_QUOTE_COLUMNS
from .records import DEFAULT_EXCHANGE_TZ

__all__ = [
    "GeneratorConfig",
    "MetaorderTruth",
    "sample_metaorder_length",
    "simulate_metaorder",
    "generate_corpus",
    "CorpusFiles",
]

SESSION_DAY = (2024, 3, 12)
SESSION_OPEN_HOUR = 9
QUOTE_HALF_SPREAD = 5e-6


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for the synthetic market; all scales positive."""

    n_metaorders: int
    beta: float = 1.5
    horizon: int = 1000
    seed: int = 0
    mode: str = "model"                 # "model" or "planted"
    base_price: float = 100.0
    impact_scale: float = 0.01          # return units per model impact unit
    first_fill_jump: float = 1.0
    increment_scale: float = 1.0
    noise_scale: float = 0.0            # return-unit noise per execution step
    relax_noise_scale: float = 0.0      # return-unit noise per relaxation update
    mean_gap_s: float = 3.0             # mean inter-fill gap (>= 1 s floor)
    gap_scale_min_s: float | None = None  # per-metaorder gap scale range
    gap_scale_max_s: float | None = None
    lot_mean: int = 100
    lot_sigma: float = 0.75             # lognormal lot dispersion; 0 = equal lots
    volume_multiplier_min: float = 10.0  # tape volume = multiplier * metaorder volume
    volume_multiplier_max: float = 10.0
    buy_prob: float = 0.5
    relax_profile: str = "quadratic"    # "quadratic", "geometric" or "jump"
    relax_decay_steps: int = 20         # geometric profile only
    relax_decay_rate: float = 0.5
    relax_quote_updates: int = 25
    price_decimals: int = 8
    planted_prefactor: float = 0.05
    planted_participation_exponent: float = 0.5
    planted_duration_exponent: float = 0.0
    timezone: str = DEFAULT_EXCHANGE_TZ

    def __post_init__(self):
        if self.n_metaorders < 1:
            raise ValueError("n_metaorders must be positive")
        if self.mode not in ("model", "planted"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.relax_profile not in ("quadratic", "geometric", "jump"):
            raise ValueError(f"unknown relax_profile {self.relax_profile!r}")
        if not 0.0 <= self.buy_prob <= 1.0:
            raise ValueError("buy_prob must lie in [0, 1]")
        for name in ("base_price", "impact_scale", "mean_gap_s", "lot_mean"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.noise_scale < 0 or self.relax_noise_scale < 0 or self.lot_sigma < 0:
            raise ValueError("noise and dispersion scales must be non-negative")
        if self.volume_multiplier_min < 1.0 or self.volume_multiplier_max < self.volume_multiplier_min:
            raise ValueError("volume multipliers must satisfy 1 <= min <= max")

    def session_open_ms(self) -> int:
        dt = datetime(*SESSION_DAY, SESSION_OPEN_HOUR, 0, tzinfo=ZoneInfo(self.timezone))
        return int(dt.timestamp() * 1000)


@dataclass(frozen=True)
class MetaorderTruth:
    """Ground truth for one simulated metaorder, including the exact signed
    impact at each fill (in return units) for oracle comparisons."""

    index: int
    agent_id: str
    instrument_id: str
    day: str
    sign: int
    length: int
    quantity: int
    t0_ms: int
    duration_ms: int
    market_volume: int
    volume_time: np.ndarray       # cumulative executed fraction per fill
    exec_impact: np.ndarray       # scale * immediate impact per fill (unsigned)
    permanent_impact: float       # scale * settled impact (unsigned)
    amplitude: float              # planted terminal impact (planted mode)

    @property
    def participation(self) -> float:
        return self.quantity / self.market_volume


def sample_metaorder_length(
    beta: float, rng: np.random.Generator, n_min: int = 2, horizon: int = 1000
) -> int:
    """One draw from p_n ~ n^-(beta+1) truncated and renormalized over
    [n_min, horizon], by inverse CDF over the exact table."""
    return int(_sample_lengths(beta, rng, 1, n_min, horizon)[0])


def _length_table(beta: float, n_min: int, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    n = np.arange(n_min, horizon + 1)
    w = n.astype(np.float64) ** (-(beta + 1.0))
    return n, w / w.sum()


def _sample_lengths(beta, rng, size, n_min, horizon) -> np.ndarray:
    n, p = _length_table(beta, n_min, horizon)
    cdf = np.cumsum(p)
    u = rng.random(size)
    return n[np.searchsorted(cdf, u, side="right").clip(max=len(n) - 1)]


def _relax_profile(config: GeneratorConfig, m: int) -> np.ndarray:
    """Fraction of the reversion completed at each of m relaxation updates;
    reaches exactly 1 at the last update for quadratic and jump, and after
    relax_decay_steps for geometric."""
    j = np.arange(1, m + 1)
    if config.relax_profile == "quadratic":
        return 1.0 - (1.0 - j / m) ** 2
    if config.relax_profile == "jump":
        return np.ones(m)
    prof = 1.0 - config.relax_decay_rate ** j
    prof[j >= config.relax_decay_steps] = 1.0
    return prof


@dataclass
class _SimulatedMetaorder:
    truth: MetaorderTruth
    order_rows: list[str] = field(default_factory=list)
    tape_rows: list[str] = field(default_factory=list)


def simulate_metaorder(
    config: GeneratorConfig,
    rng: np.random.Generator,
    index: int = 0,
    sign_override: int | None = None,
    schedule=None,
) -> _SimulatedMetaorder:
    """Simulate one metaorder: fills for the order log plus the tape segment
    (reference trade and quote before the start, the fills themselves,
    background volume, and relaxation quotes down to the settled price)."""
    if schedule is None and config.mode == "model":
        schedule = build_schedule(
            ModelParams(config.beta, config.horizon, config.first_fill_jump, config.increment_scale)
        )
    sign = 1 if rng.random() < config.buy_prob else -1
    if sign_override is not None:
        sign = sign_override
    n = int(_sample_lengths(config.beta, rng, 1, 2, config.horizon)[0])
    if n > config.horizon:
        raise ValueError(f"sampled length {n} exceeds horizon {config.horizon}")

    if config.lot_sigma > 0:
        lots = np.maximum(
            1, np.rint(config.lot_mean * rng.lognormal(0.0, config.lot_sigma, n)).astype(np.int64)
        )
    else:
        lots = np.full(n, config.lot_mean, dtype=np.int64)
    quantity = int(lots.sum())
    vt = np.cumsum(lots) / quantity

    if config.gap_scale_min_s is not None and config.gap_scale_max_s is not None:
        gap_scale = float(
            np.exp(rng.uniform(np.log(config.gap_scale_min_s), np.log(config.gap_scale_max_s)))
        )
    else:
        gap_scale = config.mean_gap_s
    exp_scale = max(gap_scale - 1.0, 1e-9)
    gaps = 1 + np.floor(rng.exponential(exp_scale, n - 1)).astype(np.int64)
    offsets_ms = np.concatenate([[0], np.cumsum(gaps)]) * 1000
    t0 = config.session_open_ms()
    fill_ts = t0 + offsets_ms
    duration_ms = int(offsets_ms[-1])

    mult = float(
        np.exp(rng.uniform(np.log(config.volume_multiplier_min), np.log(config.volume_multiplier_max)))
    )
    background_qty = int(round((mult - 1.0) * quantity))
    market_volume = quantity + background_qty

    noise = np.cumsum(rng.normal(0.0, config.noise_scale, n)) if config.noise_scale > 0 else np.zeros(n)
    amplitude = 0.0
    if config.mode == "model":
        exec_impact = config.impact_scale * schedule.immediate[1 : n + 1]
        reversion = config.impact_scale * float(schedule.down[n])
    else:
        t_s = duration_ms / 1000.0
        amplitude = (
            config.planted_prefactor
            * (quantity / market_volume) ** config.planted_participation_exponent
            * t_s**config.planted_duration_exponent
        )
        exec_impact = amplitude * np.sqrt(vt)
        reversion = amplitude / 3.0

    exec_ret = sign * exec_impact + noise

    m_q = config.relax_quote_updates
    prof = _relax_profile(config, m_q)
    relax_noise = (
        np.cumsum(rng.normal(0.0, config.relax_noise_scale, m_q))
        if config.relax_noise_scale > 0
        else np.zeros(m_q)
    )
    relax_ret = exec_ret[-1] - sign * reversion * prof + relax_noise
    relax_ts = t0 + duration_ms + np.rint(np.arange(1, m_q + 1) * duration_ms / m_q).astype(np.int64)

    x0 = config.base_price
    dec = config.price_decimals
    agent = f"agent-{index:06d}"
    instrument = f"SYN-{index:06d}"
    side = "buy" if sign > 0 else "sell"
    day = datetime(*SESSION_DAY).date().isoformat()

    order_rows: list[str] = []
    tape_rows: list[str] = []

    # reference trade and quote strictly before the start
    ref_price = f"{x0:.{dec}f}"
    bid = f"{x0 * (1.0 - QUOTE_HALF_SPREAD):.{dec}f}"
    ask = f"{x0 * (1.0 + QUOTE_HALF_SPREAD):.{dec}f}"
    tape_rows.append(f"{t0 - 2000},{instrument},{ref_price},{config.lot_mean},,")
    tape_rows.append(f"{t0 - 1500},{instrument},,,{bid},{ask}")

    for k in range(n):
        price = f"{x0 * (1.0 + exec_ret[k]):.{dec}f}"
        order_rows.append(
            f"{fill_ts[k]},{agent},{instrument},SYNTH,{side},{price},{lots[k]},aggressive_limit"
        )
        tape_rows.append(f"{fill_ts[k]},{instrument},{price},{lots[k]},,")

    if background_qty > 0:
        bg_ts = t0 + duration_ms // 2
        tape_rows.append(f"{bg_ts},{instrument},{ref_price},{background_qty},,")

    for j in range(m_q):
        mid = x0 * (1.0 + relax_ret[j])
        b = f"{mid * (1.0 - QUOTE_HALF_SPREAD):.{dec}f}"
        a = f"{mid * (1.0 + QUOTE_HALF_SPREAD):.{dec}f}"
        tape_rows.append(f"{relax_ts[j]},{instrument},,,{b},{a}")

    if config.mode == "model":
        permanent = config.impact_scale * float(schedule.permanent[n])
    else:
        permanent = amplitude * 2.0 / 3.0
    truth = MetaorderTruth(
        index=index,
        agent_id=agent,
        instrument_id=instrument,
        day=day,
        sign=sign,
        length=n,
        quantity=quantity,
        t0_ms=int(t0),
        duration_ms=duration_ms,
        market_volume=market_volume,
        volume_time=vt,
        exec_impact=np.asarray(exec_impact),
        permanent_impact=permanent,
        amplitude=amplitude,
    )
    return _SimulatedMetaorder(truth=truth, order_rows=order_rows, tape_rows=tape_rows)


TRUTH_COLUMNS = (
    "index",
    "agent_id",
    "instrument_id",
    "day",
    "sign",
    "length",
    "quantity",
    "t0_ms",
    "duration_ms",
    "market_volume",
    "participation",
    "beta",
)


@dataclass(frozen=True)
class CorpusFiles:
    orders_path: str
    tape_path: str
    truth_path: str
    truths: tuple[MetaorderTruth, ...]


def generate_corpus(
    config: GeneratorConfig,
    out_dir: str,
    rng: np.random.Generator | None = None,
    prefix: str = "corpus",
) -> CorpusFiles:
    """Write order-log, tape and ground-truth sidecar files.

    Deterministic given the config seed: the same configuration always
    produces byte-identical files.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    os.makedirs(out_dir, exist_ok=True)
    schedule = None
    if config.mode == "model":
        schedule = build_schedule(
            ModelParams(config.beta, config.horizon, config.first_fill_jump, config.increment_scale)
        )
    orders_path = os.path.join(out_dir, f"{prefix}_orders.csv")
    tape_path = os.path.join(out_dir, f"{prefix}_tape.csv")
    truth_path = os.path.join(out_dir, f"{prefix}_truth.csv")
    truths: list[MetaorderTruth] = []
    with open(orders_path, "w", encoding="utf-8", newline="") as fo, open(
        tape_path, "w", encoding="utf-8", newline=""
    ) as ft, open(truth_path, "w", encoding="utf-8", newline="") as fg:
        fo.write(",".join(ORDER_LOG_COLUMNS) + "\n")
        ft.write(",".join(TAPE_QUOTE_COLUMNS) + "\n")
        fg.write(",".join(TRUTH_COLUMNS) + "\n")
        for i in range(config.n_metaorders):
            sim = simulate_metaorder(config, rng, index=i, schedule=schedule)
            fo.write("\n".join(sim.order_rows) + "\n")
            ft.write("\n".join(sim.tape_rows) + "\n")
            t = sim.truth
            fg.write(
                f"{t.index},{t.agent_id},{t.instrument_id},{t.day},{t.sign},{t.length},"
                f"{t.quantity},{t.t0_ms},{t.duration_ms},{t.market_volume},"
                f"{t.participation:.12g},{config.beta:.12g}\n"
            )
            truths.append(t)
    return CorpusFiles(
        orders_path=orders_path,
        tape_path=tape_path,
        truth_path=truth_path,
        truths=tuple(truths),
    )
