"""Parsing and writing of order-log and market-tape files.

Both formats are UTF-8 delimited text with a mandatory header row.
Malformed lines are never silently dropped: they are collected in a
rejection report with their line numbers. Parsers are single-pass and keep
no shared mutable state, so distinct files can be parsed concurrently.

Order log columns (exactly, in order):
    timestamp_ms,agent_id,instrument_id,venue_id,side,price,quantity,order_class

Market tape columns:
    timestamp_ms,instrument_id,price,quantity[,best_bid,best_ask]
A tape line may carry a trade (price+quantity), a quote (best_bid+best_ask),
or both; empty cells mark the absent part.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, TextIO

import numpy as np

from .records import (
    DEFAULT_EXCHANGE_TZ,
    Fill,
    TradeTape,
    ValidationError,
    trading_day,
    validate_fill,
)

ORDER_LOG_COLUMNS = (
    "timestamp_ms",
    "agent_id",
    "instrument_id",
    "venue_id",
    "side",
    "price",
    "quantity",
    "order_class",
)
TAPE_COLUMNS = ("timestamp_ms", "instrument_id", "price", "quantity")
TAPE_QUOTE_COLUMNS = TAPE_COLUMNS + ("best_bid", "best_ask")


class FormatError(ValueError):
    """Fatal file-level problem: unreadable source or wrong header."""


@dataclass(frozen=True)
class RejectedLine:
    line_number: int
    reason: str
    raw: str


@dataclass
class RejectionReport:
    """Per-line rejections accumulated by a parser, in file order."""

    rejections: list[RejectedLine] = field(default_factory=list)

    def add(self, line_number: int, reason: str, raw: str) -> None:
        self.rejections.append(RejectedLine(line_number, reason, raw))

    def __len__(self) -> int:
        return len(self.rejections)

    def __bool__(self) -> bool:
        return bool(self.rejections)

    def write(self, stream: TextIO) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(("line_number", "reason", "raw"))
        for r in self.rejections:
            w.writerow((r.line_number, r.reason, r.raw))


def _open_text(source) -> TextIO:
    if isinstance(source, (str, bytes)) and not isinstance(source, bytes):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, io.TextIOBase):
        return source
    if hasattr(source, "read"):  # byte stream
        return io.TextIOWrapper(source, encoding="utf-8", newline="")
    raise FormatError(f"unreadable source: {source!r}")


def parse_order_log(source) -> tuple[list[Fill], RejectionReport]:
    """Parse an order log, yielding validated fills in file order.

    A missing or mismatched header is fatal; individual bad lines are
    reported and skipped.
    """
    stream = _open_text(source)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("missing header row") from None
    if tuple(h.strip() for h in header) != ORDER_LOG_COLUMNS:
        raise FormatError(
            f"header mismatch: expected {','.join(ORDER_LOG_COLUMNS)}, "
            f"got {','.join(header)}"
        )
    fills: list[Fill] = []
    report = RejectionReport()
    for line_number, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(ORDER_LOG_COLUMNS):
            report.add(line_number, f"expected {len(ORDER_LOG_COLUMNS)} columns, got {len(row)}", ",".join(row))
            continue
        record = dict(zip(ORDER_LOG_COLUMNS, row))
        try:
            fills.append(validate_fill(record))
        except ValidationError as err:
            report.add(line_number, err.reason, ",".join(row))
    return fills, report


def format_fill(fill: Fill) -> str:
    return (
        f"{fill.timestamp_ms},{fill.agent_id},{fill.instrument_id},{fill.venue_id},"
        f"{fill.side.value},{fill.price},{fill.quantity},{fill.order_class.value}"
    )


def write_order_log(fills: Iterable[Fill], stream: TextIO) -> None:
    stream.write(",".join(ORDER_LOG_COLUMNS) + "\n")
    for f in fills:
        stream.write(format_fill(f) + "\n")


@dataclass
class _TapeAccumulator:
    trade_ts: list = field(default_factory=list)
    trade_price: list = field(default_factory=list)
    trade_qty: list = field(default_factory=list)
    quote_ts: list = field(default_factory=list)
    quote_bid: list = field(default_factory=list)
    quote_ask: list = field(default_factory=list)


def parse_market_tape(
    source, tz: str = DEFAULT_EXCHANGE_TZ
) -> tuple[dict[tuple[str, str], TradeTape], RejectionReport]:
    """Parse a market tape into per-(instrument, day) tapes, time-sorted.

    Returns tapes keyed by (instrument_id, ISO day). Crossed quotes are
    rejected per line.
    """
    stream = _open_text(source)
    reader = csv.reader(stream)
    try:
        header = tuple(h.strip() for h in next(reader))
    except StopIteration:
        raise FormatError("missing header row") from None
    if header == TAPE_QUOTE_COLUMNS:
        has_quote_cols = True
    elif header == TAPE_COLUMNS:
        has_quote_cols = False
    else:
        raise FormatError(
            f"header mismatch: expected {','.join(TAPE_COLUMNS)} or "
            f"{','.join(TAPE_QUOTE_COLUMNS)}, got {','.join(header)}"
        )

    report = RejectionReport()
    acc: dict[tuple[str, str], _TapeAccumulator] = {}
    n_cols = len(header)
    for line_number, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != n_cols:
            report.add(line_number, f"expected {n_cols} columns, got {len(row)}", ",".join(row))
            continue
        try:
            ts = int(row[0])
        except ValueError:
            report.add(line_number, f"malformed timestamp {row[0]!r}", ",".join(row))
            continue
        instrument = row[1]
        price_s, qty_s = row[2].strip(), row[3].strip()
        bid = ask = None
        if has_quote_cols:
            bid_s, ask_s = row[4].strip(), row[5].strip()
            if bid_s or ask_s:
                try:
                    bid, ask = float(bid_s), float(ask_s)
                except ValueError:
                    report.add(line_number, "malformed quote", ",".join(row))
                    continue
                if bid >= ask:
                    report.add(line_number, f"crossed quote: bid {bid} >= ask {ask}", ",".join(row))
                    continue
        price = qty = None
        if price_s or qty_s:
            try:
                price, qty = float(price_s), int(qty_s)
            except ValueError:
                report.add(line_number, "malformed trade fields", ",".join(row))
                continue
            if price <= 0 or qty <= 0:
                report.add(line_number, "trade price and quantity must be positive", ",".join(row))
                continue
        if price is None and bid is None:
            report.add(line_number, "line carries neither trade nor quote", ",".join(row))
            continue
        key = (instrument, trading_day(ts, tz).isoformat())
        bucket = acc.get(key)
        if bucket is None:
            bucket = acc[key] = _TapeAccumulator()
        if price is not None:
            bucket.trade_ts.append(ts)
            bucket.trade_price.append(price)
            bucket.trade_qty.append(qty)
        if bid is not None:
            bucket.quote_ts.append(ts)
            bucket.quote_bid.append(bid)
            bucket.quote_ask.append(ask)

    tapes: dict[tuple[str, str], TradeTape] = {}
    from datetime import date as _date

    for (instrument, day_iso), b in acc.items():
        t_ts = np.asarray(b.trade_ts, dtype=np.int64)
        order = np.argsort(t_ts, kind="stable")
        quote_ts = quote_bid = quote_ask = None
        if b.quote_ts:
            q_ts = np.asarray(b.quote_ts, dtype=np.int64)
            q_order = np.argsort(q_ts, kind="stable")
            quote_ts = q_ts[q_order]
            quote_bid = np.asarray(b.quote_bid, dtype=np.float64)[q_order]
            quote_ask = np.asarray(b.quote_ask, dtype=np.float64)[q_order]
        tapes[(instrument, day_iso)] = TradeTape(
            instrument_id=instrument,
            day=_date.fromisoformat(day_iso),
            trade_ts=t_ts[order],
            trade_price=np.asarray(b.trade_price, dtype=np.float64)[order],
            trade_qty=np.asarray(b.trade_qty, dtype=np.int64)[order],
            quote_ts=quote_ts,
            quote_bid=quote_bid,
            quote_ask=quote_ask,
        )
    return tapes, report


def aggregate_same_second(fills: list[Fill]) -> list[Fill]:
    """Merge fills landing in the same whole second.

    Quantities are summed, the price becomes the quantity-weighted mean of
    the merged fills (exact decimal arithmetic), and the timestamp of the
    last merged fill is retained. Input must already be time-sorted.
    """
    if any(b.timestamp_ms < a.timestamp_ms for a, b in zip(fills, fills[1:])):
        raise ValidationError("aggregate_same_second requires time-sorted fills")
    merged: list[Fill] = []
    group: list[Fill] = []

    def flush():
        if not group:
            return
        if len(group) == 1:
            merged.append(group[0])
            return
        total_qty = sum(f.quantity for f in group)
        notional = sum(f.price * f.quantity for f in group)
        price = notional / Decimal(total_qty)
        last = group[-1]
        merged.append(
            Fill(
                timestamp_ms=last.timestamp_ms,
                agent_id=last.agent_id,
                instrument_id=last.instrument_id,
                venue_id=last.venue_id if all(f.venue_id == last.venue_id for f in group) else "*",
                side=last.side,
                price=price,
                quantity=total_qty,
                order_class=last.order_class
                if all(f.order_class is last.order_class for f in group)
                else last.order_class,
            )
        )

    current_second: int | None = None
    for f in fills:
        if current_second is None or f.second == current_second:
            group.append(f)
        else:
            flush()
            group = [f]
        current_second = f.second
    flush()
    return merged
