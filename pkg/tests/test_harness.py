"""Monte Carlo runner: aggregation math, exclusion rules, curve grids."""

import csv
import io
import math

import numpy as np
import pytest

from dynmte.data import EstimationConfig
from dynmte.dgp import DgpSpec
from dynmte.errors import HarnessError, NumericalError, ValidationError
from dynmte.harness import (
    McReport,
    McRow,
    McTarget,
    _normalize_truths,
    run_curve,
    run_mc,
    standard_targets,
)

TINY_SPEC = DgpSpec(n=500)


class TestMcTarget:
    def test_keys(self):
        assert McTarget(((1, 1), (0, 0)), "ate").key() == "ate:11-00"
        t = McTarget(((1, 0), (0, 1)), "mte", v=(0.25, 0.75))
        assert t.key() == "mte:10-01:0.25,0.75"

    def test_requests(self):
        ate = McTarget(((1, 1), (0, 0)), "ate").request(np.array([0.5, 0.6, 5.0]))
        assert ate.kind == "ate_marginal"
        assert ate.x is None
        mte = McTarget(((1, 1), (0, 0)), "mte", v=(0.5, 0.5)).request(np.array([0.5, 0.6, 5.0]))
        assert mte.kind == "mte"
        assert mte.x == (0.5, 0.6, 5.0)
        assert mte.v == (0.5, 0.5)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(contrast=((1, 1), (0, 0)), kind="rmst"),
            dict(contrast=((1, 1), (0, 0)), kind="mte"),
            dict(contrast=((1, 1), (0, 0)), kind="ate", v=(0.5, 0.5)),
            dict(contrast=((3, 1), (0, 0)), kind="ate"),
        ],
    )
    def test_rejects_malformed(self, kwargs):
        with pytest.raises(ValidationError):
            McTarget(**kwargs)

    def test_standard_targets(self):
        targets = standard_targets()
        keys = [t.key() for t in targets]
        assert len(targets) == 16
        assert len(set(keys)) == 16
        assert sum(1 for t in targets if t.kind == "ate") == 4
        assert "mte:11-00:0.25,0.75" in keys


class TestNormalizeTruths:
    def test_accepts_three_shapes(self):
        out = _normalize_truths(
            {
                "plain": 0.5,
                "pair": (1.0, 0.1),
                "record": {"value": 2.0, "se": 0.2},
                "record_no_se": {"value": 3.0},
            }
        )
        assert out["plain"] == (0.5, 0.0)
        assert out["pair"] == (1.0, 0.1)
        assert out["record"] == (2.0, 0.2)
        assert out["record_no_se"] == (3.0, 0.0)


def offset_estimator(offsets, half_width=0.5):
    """Estimator stub: truth-anchored points with a fixed interval width."""

    def estimate(data, requests, config, dataset_index):
        delta = offsets[dataset_index]
        out = []
        for req in requests:
            center = 1.0 + delta if req.kind == "ate_marginal" else delta
            out.append((center, (center - half_width, center + half_width)))
        return out

    return estimate


TRUTHS = {"ate:11-00": (1.0, 0.0), "mte:11-00:0.5,0.5": (0.0, 0.0)}
TARGETS = [
    McTarget(((1, 1), (0, 0)), "ate"),
    McTarget(((1, 1), (0, 0)), "mte", v=(0.5, 0.5)),
]


class TestRunMc:
    def test_aggregation_math(self):
        offsets = [0.2, -0.2, 0.4, -0.4]
        report = run_mc(
            TINY_SPEC,
            TARGETS,
            reps=4,
            config=EstimationConfig(bootstrap_reps=1),
            truths=TRUTHS,
            estimator=offset_estimator(offsets),
        )
        for row in report.rows:
            assert row.avg_bias == pytest.approx(0.0, abs=1e-15)
            assert row.med_bias == pytest.approx(0.0, abs=1e-15)
            assert row.rmse == pytest.approx(math.sqrt(0.1), abs=1e-15)
            assert row.coverage == 1.0
            assert row.ci_length == pytest.approx(1.0, abs=1e-15)

    def test_rmse_dominates_avg_bias(self):
        offsets = [0.3, 0.1, -0.2, 0.5]
        report = run_mc(
            TINY_SPEC,
            TARGETS,
            reps=4,
            config=EstimationConfig(bootstrap_reps=1),
            truths=TRUTHS,
            estimator=offset_estimator(offsets),
        )
        for row in report.rows:
            assert row.rmse >= abs(row.avg_bias)

    def test_failed_replicates_are_excluded_not_redrawn(self):
        offsets = {r: 0.1 for r in range(50)}
        offsets[7] = None  # replicate 7 fails; its offset must not reappear

        def estimator(data, requests, config, dataset_index):
            if offsets[dataset_index] is None:
                raise NumericalError("degenerate replicate")
            return offset_estimator(offsets)(data, requests, config, dataset_index)

        report = run_mc(
            TINY_SPEC,
            TARGETS,
            reps=50,
            config=EstimationConfig(bootstrap_reps=1),
            truths=TRUTHS,
            estimator=estimator,
        )
        assert report.n_failed == 1
        assert report.reps == 50
        assert report.failure_rate == pytest.approx(0.02)
        # aggregates come from the 49 surviving replicates only
        assert report.rows[0].avg_bias == pytest.approx(0.1, abs=1e-12)

    def test_failure_rate_above_threshold_aborts(self):
        def estimator(data, requests, config, dataset_index):
            if dataset_index == 0:
                raise NumericalError("degenerate replicate")
            return offset_estimator({r: 0.0 for r in range(20)})(
                data, requests, config, dataset_index
            )

        with pytest.raises(HarnessError, match="rate"):
            run_mc(
                TINY_SPEC,
                TARGETS,
                reps=20,
                config=EstimationConfig(bootstrap_reps=1),
                truths=TRUTHS,
                estimator=estimator,
            )

    def test_missing_truth_is_an_error(self):
        with pytest.raises(ValidationError, match="mte:11-00"):
            run_mc(
                TINY_SPEC,
                TARGETS,
                reps=2,
                config=EstimationConfig(bootstrap_reps=1),
                truths={"ate:11-00": 1.0},
                estimator=offset_estimator({0: 0.0, 1: 0.0}),
            )

    @pytest.mark.parametrize("reps, targets", [(0, TARGETS), (2, [])])
    def test_rejects_empty_runs(self, reps, targets):
        with pytest.raises(ValidationError):
            run_mc(
                TINY_SPEC,
                targets,
                reps=reps,
                config=EstimationConfig(bootstrap_reps=1),
                truths=TRUTHS,
                estimator=offset_estimator({}),
            )

    def test_replicate_panels_are_seed_indexed(self):
        seen = {}

        def estimator(data, requests, config, dataset_index):
            seen[dataset_index] = float(data.x.sum() + data.z.sum())
            return offset_estimator({r: 0.0 for r in range(4)})(
                data, requests, config, dataset_index
            )

        config = EstimationConfig(bootstrap_reps=1)
        run_mc(TINY_SPEC, TARGETS, 4, config, TRUTHS, estimator=estimator)
        first = dict(seen)
        seen.clear()
        run_mc(TINY_SPEC, TARGETS, 4, config, TRUTHS, estimator=estimator)
        assert seen == first
        assert len(set(first.values())) == 4

    def test_thread_count_does_not_change_rows(self):
        offsets = {r: 0.01 * r for r in range(8)}
        config = EstimationConfig(bootstrap_reps=1)
        serial = run_mc(
            TINY_SPEC, TARGETS, 8, config, TRUTHS, estimator=offset_estimator(offsets)
        )
        pooled = run_mc(
            TINY_SPEC,
            TARGETS,
            8,
            config,
            TRUTHS,
            estimator=offset_estimator(offsets),
            threads=4,
        )
        assert serial.rows == pooled.rows

    def test_end_to_end_smoke(self, truths):
        # three real replicates of the full pipeline against frozen truths
        spec = DgpSpec(n=5_000)
        targets = [
            McTarget(((1, 1), (0, 0)), "ate"),
            McTarget(((1, 1), (0, 0)), "mte", v=(0.5, 0.5)),
        ]
        frozen = {**truths["ate"], **truths["mte"]}
        report = run_mc(
            spec, targets, reps=3, config=EstimationConfig(bootstrap_reps=15), truths=frozen
        )
        assert report.n_failed == 0
        for row in report.rows:
            assert math.isfinite(row.avg_bias)
            assert row.rmse >= abs(row.avg_bias)
            assert 0.0 <= row.coverage <= 1.0
            assert row.ci_length > 0.0


class TestMcReportOutput:
    REPORT = McReport(
        rows=(
            McRow("ate:11-00", 0.25, 0.125, 0.5, 0.9375, 0.333),
            McRow("mte:11-00:0.25,0.75", -0.1, -0.05, 0.2, 1.0, 0.25),
        ),
        reps=16,
        n_failed=1,
        truths={"ate:11-00": (1.0, 0.01), "mte:11-00:0.25,0.75": (0.0, 0.02)},
        seed=7,
    )

    def test_csv_quotes_comma_targets(self):
        text = self.REPORT.to_csv()
        lines = text.splitlines()
        assert lines[0] == "target,avg_bias,med_bias,rmse,coverage,ci_length"
        assert lines[2].startswith('"mte:11-00:0.25,0.75"')

    def test_csv_round_trips_exactly(self):
        rows = list(csv.DictReader(io.StringIO(self.REPORT.to_csv())))
        assert rows[0]["target"] == "ate:11-00"
        assert float(rows[0]["avg_bias"]) == 0.25
        assert rows[1]["target"] == "mte:11-00:0.25,0.75"
        assert float(rows[1]["rmse"]) == 0.2

    def test_sidecar_fields(self):
        side = self.REPORT.sidecar()
        assert side["reps"] == 16
        assert side["n_failed"] == 1
        assert side["failure_rate"] == pytest.approx(1 / 16)
        assert side["seed"] == 7
        assert side["truths"]["ate:11-00"] == {"value": 1.0, "se": 0.01}


class TestRunCurve:
    CONFIG = EstimationConfig(bootstrap_reps=12)

    @pytest.mark.parametrize(
        "kwargs, message",
        [
            (dict(axis=3, fixed_v=0.5, grid=5), "axis"),
            (dict(axis=1, fixed_v=0.0, grid=5), "fixed_v"),
            (dict(axis=1, fixed_v=1.0, grid=5), "fixed_v"),
            (dict(axis=1, fixed_v=0.5, grid=1), "grid"),
        ],
    )
    def test_rejects_malformed(self, kwargs, message):
        with pytest.raises(ValidationError, match=message):
            run_curve(DgpSpec(n=5_000), ((1, 1), (0, 0)), config=self.CONFIG, **kwargs)

    def test_grid_layout_and_csv(self):
        curve = run_curve(
            DgpSpec(n=5_000), ((1, 1), (0, 0)), axis=1, fixed_v=0.5, grid=3, config=self.CONFIG
        )
        assert curve.contrast == ((1, 1), (0, 0))
        assert curve.axis == 1
        assert curve.fixed_v == 0.5
        assert [p.v for p in curve.points] == pytest.approx([0.05, 0.5, 0.95], abs=1e-12)
        for p in curve.points:
            assert p.ci_lo <= p.ci_hi

        text = curve.to_csv()
        lines = text.splitlines()
        assert lines[0] == "v,estimate,ci_lo,ci_hi"
        assert len(lines) == 4
        parsed = list(csv.DictReader(io.StringIO(text)))
        for p, row in zip(curve.points, parsed):
            # %.17g must reproduce the binary float exactly
            assert float(row["estimate"]) == p.estimate
            assert float(row["ci_lo"]) == p.ci_lo
            assert float(row["ci_hi"]) == p.ci_hi
