"""Shared helper: run the file-based pipeline end to end."""
from metaimpact.orderlog import parse_market_tape, parse_order_log
from metaimpact.reconstruct import enrich_all, filter_min_length, reconstruct_metaorders


def run_pipeline(orders_path, tape_path, min_length=2):
    fills, order_report = parse_order_log(orders_path)
    assert not order_report, f"unexpected rejections: {order_report.rejections[:3]}"
    tapes, tape_report = parse_market_tape(tape_path)
    assert not tape_report, f"unexpected tape rejections: {tape_report.rejections[:3]}"
    metaorders = reconstruct_metaorders(fills)
    metaorders = filter_min_length(metaorders, min_length)
    metaorders, skipped = enrich_all(metaorders, tapes)
    assert not skipped
    return metaorders, tapes
