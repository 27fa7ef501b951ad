import math

import numpy as np
import pytest

from cbleak.experiments import (
    CSV_HEADER,
    SweepConfig,
    cell_seed,
    leakage_levels,
    mean_series,
    read_csv_rows,
    rows_to_csv,
    run_sweep,
    summarize_rows,
)
from cbleak.numerics import InvalidParameterError

TINY = dict(n_values=(120,), d_values=(20,), k_values=(3,), noise_values=(0.5,), J=3,
            kinds=("gbt",), levels=3, runs=2, base_seed=1, h=8)


class TestLeakageLevels:
    def test_default_grid_endpoints(self):
        levels = leakage_levels(50, 500, m=30)
        assert levels[0] == 51 and levels[-1] == 449
        assert len(levels) == 30
        assert levels == sorted(set(levels))

    def test_small_range_deduplicates(self):
        assert leakage_levels(3, 10, m=30) == [4, 5, 6]

    def test_explicit_rounding(self):
        expected = sorted({math.floor(x + 0.5) for x in np.linspace(201, 2299, 30)})
        assert leakage_levels(200, 2500) == expected

    def test_no_admissible_level(self):
        with pytest.raises(InvalidParameterError):
            leakage_levels(200, 401)


class TestSweepConfig:
    def test_default_grid_size(self):
        assert len(list(SweepConfig().grid())) == 24

    def test_text_round_trip(self):
        cfg = SweepConfig(**TINY)
        assert SweepConfig.from_text(cfg.to_text()) == cfg

    def test_overrides_and_comments(self):
        cfg = SweepConfig.from_text("runs = 4  # more runs\nkinds = rf, mlp\n", runs=7)
        assert cfg.runs == 7 and cfg.kinds == ("rf", "mlp")

    @pytest.mark.parametrize("text", ["bogus = 1", "runs = many", "runs"])
    def test_bad_text(self, text):
        with pytest.raises(InvalidParameterError):
            SweepConfig.from_text(text)

    def test_invalid_kind(self):
        with pytest.raises(InvalidParameterError):
            SweepConfig(**{**TINY, "kinds": ("svm",)}).validate()


@pytest.fixture(scope="module")
def rows():
    return run_sweep(SweepConfig(**TINY))


class TestRunSweep:
    def test_cardinality(self, rows):
        # 1 config x 3 levels x 1 classifier x 2 runs
        assert len(rows) == 6
        assert not any(r.error for r in rows)
        assert [r.b for r in rows] == [4, 4, 10, 10, 16, 16]

    def test_seeds_unique(self, rows):
        assert len({r.seed for r in rows}) == len(rows)

    def test_thirty_row_cell(self):
        cfg = SweepConfig(**{**TINY, "levels": 5, "runs": 3, "kinds": ("gbt", "rf")})
        levels = leakage_levels(3, 20, m=5)
        assert len(levels) == 5
        seeds = {cell_seed(1, 120, 20, 3, 0.5, b, ki, r)
                 for b in levels for ki in range(2) for r in range(3)}
        assert len(seeds) == 30
        assert sum(1 for _ in cfg.grid()) == 1

    def test_csv_determinism(self, rows):
        again = run_sweep(SweepConfig(**TINY))
        assert rows_to_csv(rows, timing=False) == rows_to_csv(again, timing=False)

    def test_csv_layout(self, rows, tmp_path):
        text = rows_to_csv(rows)
        lines = text.splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 7
        path = tmp_path / "r.csv"
        path.write_text(text)
        back = read_csv_rows(path)
        assert back[0]["classifier"] == "gbt"
        assert back[0]["leakage"] == pytest.approx(rows[0].leakage, rel=1e-5)

    def test_summary_counts_negatives(self, rows):
        summary = summarize_rows(rows)
        assert summary["rows"] == 6
        assert summary["negative_leakage_rows"] == sum(r.leakage < 0 for r in rows)

    def test_failed_cell_recorded(self):
        cfg = SweepConfig(**{**TINY, "n_values": (5,), "runs": 1})
        rows = run_sweep(cfg)
        assert all("DegenerateSplitError" in r.error for r in rows)
        assert all(math.isnan(r.leakage) for r in rows)


def test_mean_series():
    rows = [
        {"config_id": "a", "b": 1, "classifier": "gbt", "leakage": 0.1},
        {"config_id": "a", "b": 1, "classifier": "gbt", "leakage": 0.3},
        {"config_id": "a", "b": 2, "classifier": "gbt", "leakage": 0.0},
        {"config_id": "a", "b": 1, "classifier": "rf", "leakage": float("nan")},
    ]
    out = mean_series(rows)
    assert list(out) == [("a",)]
    assert out[("a",)]["gbt"] == [(1.0, pytest.approx(0.2), 0.1, 0.3), (2.0, 0.0, 0.0, 0.0)]
    assert "rf" not in out[("a",)]
