"""Synthetic market generator: sampling law, round trips, oracle equivalence."""
import io

import numpy as np
import pytest
from pipeline_util import run_pipeline

from metaimpact.impact import fair_pricing_check, signed_impact_path, vwap
from metaimpact.model import hurwitz_zeta
from metaimpact.orderlog import ORDER_LOG_COLUMNS, TAPE_QUOTE_COLUMNS, parse_market_tape, parse_order_log
from metaimpact.reconstruct import reconstruct_metaorders
from metaimpact.synth import (
    GeneratorConfig,
    generate_corpus,
    sample_metaorder_length,
    simulate_metaorder,
)
from metaimpact.tails import estimate_beta


def parse_rows(sim):
    orders = io.StringIO(",".join(ORDER_LOG_COLUMNS) + "\n" + "\n".join(sim.order_rows) + "\n")
    tape = io.StringIO(",".join(TAPE_QUOTE_COLUMNS) + "\n" + "\n".join(sim.tape_rows) + "\n")
    fills, r1 = parse_order_log(orders)
    tapes, r2 = parse_market_tape(tape)
    assert not r1 and not r2
    return fills, tapes


class TestLengthSampling:
    def test_no_short_lengths(self):
        rng = np.random.default_rng(0)
        draws = [sample_metaorder_length(1.5, rng, horizon=50) for _ in range(5000)]
        assert min(draws) >= 2
        assert max(draws) <= 50

    def test_frequency_of_two(self):
        rng = np.random.default_rng(1)
        from metaimpact.synth import _sample_lengths

        n = 1_000_000
        draws = _sample_lengths(1.5, rng, n, 2, 1000)
        # truncated-law probability of N=2, tail beyond the horizon folded in
        norm = hurwitz_zeta(2.5, 2.0) - hurwitz_zeta(2.5, 1001.0)
        p2 = 2.0**-2.5 / norm
        observed = np.mean(draws == 2)
        se = np.sqrt(p2 * (1 - p2) / n)
        assert abs(observed - p2) < 3 * se

    def test_beta_round_trip(self):
        rng = np.random.default_rng(2)
        from metaimpact.synth import _sample_lengths

        draws = _sample_lengths(1.5, rng, 1_000_000, 2, 1000)
        est = estimate_beta(draws, method="mle", n_max=1000)
        assert abs(est.beta - 1.5) < 0.1


NOISELESS = dict(
    n_metaorders=1,
    beta=1.5,
    horizon=400,
    noise_scale=0.0,
    relax_noise_scale=0.0,
    lot_sigma=0.75,
)


class TestSimulateOne:
    def test_noiseless_path_matches_schedule(self):
        config = GeneratorConfig(seed=3, **NOISELESS)
        rng = np.random.default_rng(3)
        sim = simulate_metaorder(config, rng, index=0)
        fills, tapes = parse_rows(sim)
        (meta,) = reconstruct_metaorders(fills)
        assert meta.length == sim.truth.length
        tape = tapes[(meta.instrument_id, meta.day.isoformat())]
        path = signed_impact_path(meta, tape, relax_grid=config.relax_quote_updates)
        assert np.allclose(path.exec_signed, sim.truth.exec_impact, atol=2e-8)
        assert np.allclose(path.exec_vt, sim.truth.volume_time, atol=1e-12)
        # relaxation ends at the settled level
        assert path.relax_signed[-1] == pytest.approx(sim.truth.permanent_impact, abs=2e-8)
        assert not path.truncated

    def test_noiseless_fair_pricing_identity(self):
        config = GeneratorConfig(seed=4, lot_sigma=0.0, **{k: v for k, v in NOISELESS.items() if k != "lot_sigma"})
        rng = np.random.default_rng(4)
        sim = simulate_metaorder(config, rng, index=0)
        fills, tapes = parse_rows(sim)
        (meta,) = reconstruct_metaorders(fills)
        result = fair_pricing_check([meta], tapes)
        (point,) = result.points
        assert abs((1 + point.r_vwap) - (1 + point.r_final)) < 1e-9

    def test_sign_mirror(self):
        config = GeneratorConfig(seed=5, **NOISELESS)
        buy = simulate_metaorder(config, np.random.default_rng(5), index=0, sign_override=1)
        sell = simulate_metaorder(config, np.random.default_rng(5), index=0, sign_override=-1)
        fb, tb = parse_rows(buy)
        fs, ts = parse_rows(sell)
        (mb,) = reconstruct_metaorders(fb)
        (ms,) = reconstruct_metaorders(fs)
        pb = signed_impact_path(mb, tb[(mb.instrument_id, mb.day.isoformat())])
        ps = signed_impact_path(ms, ts[(ms.instrument_id, ms.day.isoformat())])
        assert mb.sign == 1 and ms.sign == -1
        assert np.allclose(pb.exec_signed, ps.exec_signed, atol=1e-12)
        assert np.allclose(pb.relax_signed, ps.relax_signed, atol=1e-12)

    def test_equal_lots_vwap_is_mean_price(self):
        config = GeneratorConfig(seed=6, lot_sigma=0.0, **{k: v for k, v in NOISELESS.items() if k != "lot_sigma"})
        sim = simulate_metaorder(config, np.random.default_rng(6), index=0)
        fills, _ = parse_rows(sim)
        (meta,) = reconstruct_metaorders(fills)
        mean_price = np.mean([float(f.price) for f in meta.fills])
        assert vwap(meta) == pytest.approx(mean_price, rel=1e-14)


class TestGenerateCorpus:
    def test_same_seed_byte_identical(self, tmp_path):
        config = GeneratorConfig(n_metaorders=200, seed=7, noise_scale=1e-3, horizon=200)
        a = generate_corpus(config, str(tmp_path / "a"))
        b = generate_corpus(config, str(tmp_path / "b"))
        for pa, pb in [(a.orders_path, b.orders_path), (a.tape_path, b.tape_path),
                       (a.truth_path, b.truth_path)]:
            assert open(pa, "rb").read() == open(pb, "rb").read()

    def test_reconstruction_recovers_sidecar(self, tmp_path):
        config = GeneratorConfig(n_metaorders=300, seed=8, noise_scale=5e-4, horizon=300)
        files = generate_corpus(config, str(tmp_path))
        metaorders, _ = run_pipeline(files.orders_path, files.tape_path)
        assert len(metaorders) == len(files.truths)
        by_agent = {m.agent_id: m for m in metaorders}
        for truth in files.truths:
            m = by_agent[truth.agent_id]
            assert m.length == truth.length
            assert m.total_quantity == truth.quantity
            assert m.sign == truth.sign
            assert m.t0_ms == truth.t0_ms
            assert m.duration_ms == truth.duration_ms
            assert m.market_volume == truth.market_volume

    def test_participation_matches_multiplier(self, tmp_path):
        config = GeneratorConfig(
            n_metaorders=50, seed=9, horizon=100,
            volume_multiplier_min=8.0, volume_multiplier_max=8.0,
        )
        files = generate_corpus(config, str(tmp_path))
        metaorders, _ = run_pipeline(files.orders_path, files.tape_path)
        for m in metaorders:
            assert m.participation == pytest.approx(1.0 / 8.0, rel=2e-2)

    def test_unsigned_mean_return_near_zero(self, tmp_path):
        config = GeneratorConfig(n_metaorders=2000, seed=10, noise_scale=1e-3, horizon=200)
        files = generate_corpus(config, str(tmp_path))
        metaorders, tapes = run_pipeline(files.orders_path, files.tape_path)
        from metaimpact.impact import reference_price, return_proxy

        rets = []
        for m in metaorders:
            tape = tapes[(m.instrument_id, m.day.isoformat())]
            ref, _ = reference_price(m, tape)
            rets.append(return_proxy(float(m.fills[-1].price), ref))   # unsigned
        mean = np.mean(rets)
        se = np.std(rets) / np.sqrt(len(rets))
        assert abs(mean) < 4 * se + 1e-4

    def test_truth_file_parses(self, tmp_path):
        config = GeneratorConfig(n_metaorders=20, seed=11, horizon=50)
        files = generate_corpus(config, str(tmp_path))
        lines = open(files.truth_path).read().splitlines()
        assert lines[0].startswith("index,agent_id")
        assert len(lines) == 21


def terminal_bucket_deviation(count, seed):
    """Gap between the curve's completion bucket and the exact ground-truth
    mean: a pure Monte Carlo statistic whose size is driven by noise."""
    config = GeneratorConfig(n_metaorders=count, seed=seed, noise_scale=2e-3, horizon=100)
    rng = np.random.default_rng(seed)
    measured = 0.0
    exact = 0.0
    for i in range(count):
        sim = simulate_metaorder(config, rng, index=i)
        fills, tapes = parse_rows(sim)
        (meta,) = reconstruct_metaorders(fills)
        tape = tapes[(meta.instrument_id, meta.day.isoformat())]
        path = signed_impact_path(meta, tape, relax_grid=5)
        measured += path.exec_signed[-1]
        exact += sim.truth.exec_impact[-1]
    return (measured - exact) / count


class TestMonteCarloRate:
    def test_noise_cancellation_rate(self):
        # quadrupling the corpus should halve the deviation (two sqrt-2 steps)
        small = [terminal_bucket_deviation(500, seed) for seed in range(8)]
        large = [terminal_bucket_deviation(2000, seed + 100) for seed in range(8)]
        ratio = np.sqrt(np.mean(np.square(small))) / np.sqrt(np.mean(np.square(large)))
        assert 1.3 < ratio < 3.1


class TestDiffusiveDispersion:
    """Under diffusive noise, scatter grows with metaorder duration."""

    def make_corpus(self, tmp_path, mode, seed, **over):
        base = dict(
            n_metaorders=6000, beta=1.5, horizon=150, seed=seed, mode=mode,
            noise_scale=6e-4, relax_noise_scale=2e-4, lot_sigma=0.0,
            volume_multiplier_min=2.0, volume_multiplier_max=50.0,
            gap_scale_min_s=2.0, gap_scale_max_s=60.0, relax_quote_updates=12,
        )
        base.update(over)
        files = generate_corpus(GeneratorConfig(**base), str(tmp_path / f"{mode}{seed}"))
        return run_pipeline(files.orders_path, files.tape_path)

    def test_sqrt_residual_dispersion_grows_with_duration(self, tmp_path):
        from metaimpact.impact import square_root_analysis

        metaorders, tapes = self.make_corpus(tmp_path, "planted", seed=71)
        result = square_root_analysis(metaorders, tapes)
        positive = result.signed_impact > 0
        resid = np.log(result.signed_impact[positive]) - (
            np.log(result.fit.prefactor)
            + result.fit.exponent * np.log(result.participation[positive])
        )
        duration = result.duration_s[positive]
        cut = np.median(duration)
        short_std = resid[duration <= cut].std()
        long_std = resid[duration > cut].std()
        assert long_std > short_std

    def test_fair_pricing_scatter_grows_with_return_size(self, tmp_path):
        metaorders, tapes = self.make_corpus(
            tmp_path, "model", seed=72,
            volume_multiplier_min=10.0, volume_multiplier_max=10.0,
            gap_scale_min_s=None, gap_scale_max_s=None,
        )
        result = fair_pricing_check(metaorders, tapes)
        x = np.array([p.r_vwap for p in result.points])
        y = np.array([p.r_final for p in result.points])
        distance = np.abs(y - x)
        size = np.abs(x)
        cut = np.median(size)
        assert distance[size > cut].mean() > distance[size <= cut].mean()
