"""Grouping validated fills into metaorders and enriching them with market volume.

A metaorder is the time-sorted, same-second-merged series of all fills
sharing (agent, instrument, direction, trading day). Groups that collapse
to fewer than two merged fills are discarded. Grouping is a pure function
of its input; per-key groups are independent work units.
"""
from __future__ import annotations

from typing import Iterable, Mapping, TextIO

from .orderlog import aggregate_same_second
from .records import DEFAULT_EXCHANGE_TZ, Fill, Metaorder, TradeTape


class TapeMismatchError(ValueError):
    """Tape does not match the metaorder's instrument/day, or is inconsistent."""


def reconstruct_metaorders(
    fills: Iterable[Fill],
    tz: str = DEFAULT_EXCHANGE_TZ,
    gap_split_s: float | None = None,
) -> list[Metaorder]:
    """Group fills by (agent, instrument, side, day) into metaorders.

    The output is independent of input ordering: fills are grouped, then
    canonically sorted within each group before same-second merging.
    ``gap_split_s`` optionally splits a group at idle gaps longer than the
    threshold (off by default; no such rule exists in the reconstruction
    definition itself).
    """
    groups: dict[tuple, list[Fill]] = {}
    for f in fills:
        key = (f.agent_id, f.instrument_id, f.side, f.day(tz))
        groups.setdefault(key, []).append(f)

    out: list[Metaorder] = []
    for (agent_id, instrument_id, side, day), group in groups.items():
        group.sort(key=lambda f: (f.timestamp_ms, str(f.price), f.quantity, f.venue_id))
        if gap_split_s is not None:
            runs: list[list[Fill]] = [[group[0]]]
            for prev, cur in zip(group, group[1:]):
                if (cur.timestamp_ms - prev.timestamp_ms) / 1000.0 > gap_split_s:
                    runs.append([cur])
                else:
                    runs[-1].append(cur)
        else:
            runs = [group]
        for run in runs:
            merged = aggregate_same_second(run)
            if len(merged) < 2:
                continue
            out.append(
                Metaorder(
                    agent_id=agent_id,
                    instrument_id=instrument_id,
                    day=day,
                    side=side,
                    fills=tuple(merged),
                )
            )
    out.sort(key=lambda m: (m.day.isoformat(), m.instrument_id, m.agent_id, m.side.value, m.t0_ms))
    return out


def filter_min_length(metaorders: Iterable[Metaorder], n_star: int) -> list[Metaorder]:
    """Keep exactly the metaorders with N >= n_star, order preserved."""
    if n_star < 2:
        raise ValueError(f"minimum length must be >= 2, got {n_star}")
    return [m for m in metaorders if m.length >= n_star]


def enrich_with_market_volume(metaorder: Metaorder, tape: TradeTape) -> Metaorder:
    """Attach V: shares traded market-wide during [t0, t0 + T], both endpoints
    included. The metaorder's own prints are part of the tape, so V >= Q."""
    if tape.instrument_id != metaorder.instrument_id or tape.day != metaorder.day:
        raise TapeMismatchError(
            f"tape ({tape.instrument_id}, {tape.day}) does not match metaorder "
            f"({metaorder.instrument_id}, {metaorder.day})"
        )
    volume = tape.volume_between(metaorder.t0_ms, metaorder.end_ms)
    if volume < metaorder.total_quantity:
        raise TapeMismatchError(
            f"inconsistent tape: V={volume} < Q={metaorder.total_quantity} "
            f"(the metaorder's own prints must be on the tape)"
        )
    return metaorder.with_market_volume(volume)


def enrich_all(
    metaorders: Iterable[Metaorder],
    tapes: Mapping[tuple[str, str], TradeTape],
) -> tuple[list[Metaorder], list[Metaorder]]:
    """Enrich every metaorder whose (instrument, day) tape exists.

    Returns (enriched, skipped); skipped metaorders had no matching tape.
    """
    enriched: list[Metaorder] = []
    skipped: list[Metaorder] = []
    for m in metaorders:
        tape = tapes.get((m.instrument_id, m.day.isoformat()))
        if tape is None:
            skipped.append(m)
            continue
        enriched.append(enrich_with_market_volume(m, tape))
    return enriched, skipped


SUMMARY_COLUMNS = (
    "agent_id",
    "instrument_id",
    "day",
    "sign",
    "t0_ms",
    "duration_s",
    "length",
    "quantity",
    "market_volume",
    "participation",
)


def write_metaorder_summaries(metaorders: Iterable[Metaorder], stream: TextIO) -> None:
    stream.write(",".join(SUMMARY_COLUMNS) + "\n")
    for m in metaorders:
        v = m.market_volume if m.market_volume is not None else ""
        p = f"{m.participation:.12g}" if m.participation is not None else ""
        stream.write(
            f"{m.agent_id},{m.instrument_id},{m.day.isoformat()},{m.sign},"
            f"{m.t0_ms},{m.duration_s:.12g},{m.length},{m.total_quantity},{v},{p}\n"
        )
