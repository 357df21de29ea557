"""Domain records shared by every stage of the pipeline.

All records are immutable after construction and safe to share between
concurrent workers. Prices are stored as exact decimals; quantities are
integer share counts. Analytics convert to float at computation boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import date, datetime
from decimal import Decimal, InvalidOperation
from enum import Enum
from zoneinfo import ZoneInfo

import numpy as np

DEFAULT_EXCHANGE_TZ = "Europe/Paris"


class Side(str, Enum):
    BUY = "buy"
    SELL = "sell"


class OrderClass(str, Enum):
    AGGRESSIVE_LIMIT = "aggressive_limit"
    PASSIVE_LIMIT = "passive_limit"
    OTHER = "other"


class Phase(str, Enum):
    EXECUTION = "execution"
    RELAXATION = "relaxation"


class ValidationError(ValueError):
    """A record violated one of its invariants; ``reason`` names it."""

    def __init__(self, reason: str, line_number: int | None = None):
        super().__init__(reason)
        self.reason = reason
        self.line_number = line_number


def sign_of(side: Side) -> int:
    """Map trade direction to a sign: buy -> +1, sell -> -1."""
    return 1 if side is Side.BUY else -1


def trading_day(timestamp_ms: int, tz: str = DEFAULT_EXCHANGE_TZ) -> date:
    """Assign an epoch-ms UTC timestamp to a trading day in the exchange timezone."""
    return datetime.fromtimestamp(timestamp_ms / 1000.0, tz=ZoneInfo(tz)).date()


@dataclass(frozen=True)
class Fill:
    """A single executed order slice."""

    timestamp_ms: int
    agent_id: str
    instrument_id: str
    venue_id: str
    side: Side
    price: Decimal
    quantity: int
    order_class: OrderClass

    def __post_init__(self):
        if not isinstance(self.price, Decimal) or not self.price.is_finite():
            raise ValidationError("price must be a finite decimal")
        if self.price <= 0:
            raise ValidationError("price > 0 violated")
        if not isinstance(self.quantity, int) or isinstance(self.quantity, bool):
            raise ValidationError("quantity must be an integer share count")
        if self.quantity <= 0:
            raise ValidationError("quantity > 0 violated")
        if not isinstance(self.timestamp_ms, int) or isinstance(self.timestamp_ms, bool):
            raise ValidationError("timestamp must be epoch milliseconds")
        if not self.agent_id or not self.instrument_id:
            raise ValidationError("agent_id and instrument_id must be non-empty")

    def day(self, tz: str = DEFAULT_EXCHANGE_TZ) -> date:
        return trading_day(self.timestamp_ms, tz)

    @property
    def second(self) -> int:
        """Whole second containing this fill (floor of the millisecond stamp)."""
        return self.timestamp_ms // 1000

    @property
    def sign(self) -> int:
        return sign_of(self.side)


def validate_fill(record: dict) -> Fill:
    """Build a Fill from a parsed raw record, raising ValidationError naming
    the violated invariant on bad input."""
    try:
        side = Side(str(record["side"]).strip().lower())
    except ValueError:
        raise ValidationError(f"unknown side {record.get('side')!r}") from None
    except KeyError:
        raise ValidationError("missing field 'side'") from None
    try:
        order_class = OrderClass(str(record.get("order_class", "other")).strip().lower())
    except ValueError:
        raise ValidationError(f"unknown order_class {record.get('order_class')!r}") from None
    try:
        timestamp_ms = int(record["timestamp_ms"])
    except (KeyError, ValueError, TypeError):
        raise ValidationError("malformed timestamp") from None
    raw_price = record.get("price")
    try:
        price = raw_price if isinstance(raw_price, Decimal) else Decimal(str(raw_price).strip())
    except (InvalidOperation, TypeError):
        raise ValidationError(f"malformed price {raw_price!r}") from None
    raw_qty = record.get("quantity")
    if isinstance(raw_qty, float) or (isinstance(raw_qty, str) and "." in raw_qty):
        raise ValidationError("fractional quantity rejected")
    try:
        quantity = int(raw_qty)
    except (ValueError, TypeError):
        raise ValidationError(f"malformed quantity {raw_qty!r}") from None
    return Fill(
        timestamp_ms=timestamp_ms,
        agent_id=str(record.get("agent_id", "")),
        instrument_id=str(record.get("instrument_id", "")),
        venue_id=str(record.get("venue_id", "")),
        side=side,
        price=price,
        quantity=quantity,
        order_class=order_class,
    )


@dataclass(frozen=True)
class Metaorder:
    """A reconstructed sequence of same-second-merged fills sharing
    (agent, instrument, direction, day)."""

    agent_id: str
    instrument_id: str
    day: date
    side: Side
    fills: tuple[Fill, ...]
    market_volume: int | None = None

    def __post_init__(self):
        if len(self.fills) < 2:
            raise ValidationError("metaorder length N >= 2 violated")
        key = (self.agent_id, self.instrument_id, self.side)
        for f in self.fills:
            if (f.agent_id, f.instrument_id, f.side) != key:
                raise ValidationError("fills must share agent, instrument and side")
        ts = [f.timestamp_ms for f in self.fills]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValidationError("fill timestamps must be non-decreasing")
        if self.market_volume is not None:
            if self.market_volume < self.total_quantity:
                raise ValidationError("market volume V >= Q violated")

    @property
    def sign(self) -> int:
        return sign_of(self.side)

    @property
    def length(self) -> int:
        """N: number of merged fills."""
        return len(self.fills)

    @property
    def total_quantity(self) -> int:
        """Q: total shares executed."""
        return sum(f.quantity for f in self.fills)

    @property
    def t0_ms(self) -> int:
        return self.fills[0].timestamp_ms

    @property
    def end_ms(self) -> int:
        return self.fills[-1].timestamp_ms

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.t0_ms

    @property
    def duration_s(self) -> float:
        """T: duration in seconds."""
        return self.duration_ms / 1000.0

    @property
    def participation(self) -> float | None:
        """Q/V once the metaorder has been enriched with market volume."""
        if self.market_volume is None:
            return None
        return self.total_quantity / self.market_volume

    def with_market_volume(self, volume: int) -> "Metaorder":
        return replace(self, market_volume=volume)

    def key(self) -> tuple:
        return (self.agent_id, self.instrument_id, self.day.isoformat(), self.t0_ms)


@dataclass(frozen=True)
class TradeTape:
    """Market-wide trade (and optional quote) series for one instrument-day.

    Prices are held as float arrays: the tape feeds analytics only, never
    bit-exact serialization.
    """

    instrument_id: str
    day: date
    trade_ts: np.ndarray      # int64 epoch ms
    trade_price: np.ndarray   # float64
    trade_qty: np.ndarray     # int64 shares
    quote_ts: np.ndarray | None = None
    quote_bid: np.ndarray | None = None
    quote_ask: np.ndarray | None = None

    def __post_init__(self):
        if len(self.trade_ts) and np.any(np.diff(self.trade_ts) < 0):
            raise ValidationError("tape trades must be non-decreasing in time")
        if self.quote_ts is not None and len(self.quote_ts):
            if np.any(np.diff(self.quote_ts) < 0):
                raise ValidationError("tape quotes must be non-decreasing in time")
            if np.any(self.quote_bid >= self.quote_ask):
                raise ValidationError("crossed quote: best_bid < best_ask violated")

    @property
    def has_quotes(self) -> bool:
        return self.quote_ts is not None and len(self.quote_ts) > 0

    @property
    def last_event_ms(self) -> int:
        last = self.trade_ts[-1] if len(self.trade_ts) else np.int64(-(2**62))
        if self.has_quotes:
            last = max(last, self.quote_ts[-1])
        return int(last)

    def volume_between(self, start_ms: int, end_ms: int) -> int:
        """Total traded shares in the closed interval [start_ms, end_ms]."""
        lo = np.searchsorted(self.trade_ts, start_ms, side="left")
        hi = np.searchsorted(self.trade_ts, end_ms, side="right")
        return int(self.trade_qty[lo:hi].sum())

    def last_trade_price_before(self, ts_ms: int, strict: bool = True) -> float | None:
        side = "left" if strict else "right"
        i = int(np.searchsorted(self.trade_ts, ts_ms, side=side)) - 1
        if i < 0:
            return None
        return float(self.trade_price[i])

    def mid_at_or_before(self, ts_ms: int, strict: bool = False) -> float | None:
        if not self.has_quotes:
            return None
        side = "left" if strict else "right"
        i = int(np.searchsorted(self.quote_ts, ts_ms, side=side)) - 1
        if i < 0:
            return None
        return float(self.quote_bid[i] + self.quote_ask[i]) / 2.0


@dataclass(frozen=True)
class CurvePoint:
    """One bucket of an impact curve in rescaled time."""

    rescaled_time: float
    mean_signed_impact: float
    count: int
    phase: Phase
    artifact: bool = False   # terminal bucket dominated by shortest metaorders

    def __post_init__(self):
        if self.count <= 0:
            raise ValidationError("curve point count > 0 violated")
        lo, hi = (0.0, 1.0) if self.phase is Phase.EXECUTION else (1.0, 2.0)
        if not (lo - 1e-12 <= self.rescaled_time <= hi + 1e-12):
            raise ValidationError(
                f"{self.phase.value} point at rescaled time {self.rescaled_time} "
                f"outside [{lo}, {hi}]"
            )


@dataclass(frozen=True)
class ImpactCurve:
    """Bucketed signed impact over rescaled time: execution [0,1], relaxation [1,2]."""

    points: tuple[CurvePoint, ...]
    proxy_relaxation_share: float = 0.0   # share of relaxation points using last-trade proxy
    truncated_metaorders: int = 0         # excluded from relaxation: tape ended early

    def __post_init__(self):
        times = [p.rescaled_time for p in self.points]
        phases = [p.phase for p in self.points]
        for (t1, ph1), (t2, ph2) in zip(zip(times, phases), zip(times[1:], phases[1:])):
            if ph1 is Phase.RELAXATION and ph2 is Phase.EXECUTION:
                raise ValidationError("execution points must precede relaxation points")
            if ph1 is ph2 and t2 < t1 - 1e-12:
                raise ValidationError("curve rescaled times must be non-decreasing")

    def execution_points(self) -> tuple[CurvePoint, ...]:
        return tuple(p for p in self.points if p.phase is Phase.EXECUTION)

    def relaxation_points(self) -> tuple[CurvePoint, ...]:
        return tuple(p for p in self.points if p.phase is Phase.RELAXATION)


@dataclass(frozen=True)
class PowerLawFit:
    """y = prefactor * x**exponent fitted by least squares on logs."""

    prefactor: float
    exponent: float
    residual: float       # RMS error in log space
    point_count: int

    def __post_init__(self):
        if self.prefactor <= 0:
            raise ValidationError("power-law prefactor must be positive")

    def __call__(self, x):
        return self.prefactor * np.asarray(x, dtype=float) ** self.exponent


@dataclass(frozen=True)
class FairPricingPoint:
    """Per-metaorder comparison of VWAP return vs post-relaxation return,
    prices normalized to 1 at the metaorder start."""

    r_vwap: float
    r_final: float
    metaorder_key: tuple

    def __post_init__(self):
        if not (np.isfinite(self.r_vwap) and np.isfinite(self.r_final)):
            raise ValidationError("fair pricing returns must be finite")
