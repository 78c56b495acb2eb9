import numpy as np
import pytest

from rirsense import (
    AnalysisConfig,
    BandSpec,
    CoherenceCurve,
    EnergyEnvelope,
    Rir,
    SensitivityRating,
    TFCoherenceMap,
    ValidationError,
)


class TestRir:
    def test_valid_construction(self):
        r = Rir(48000, [0.0, 1.0, -0.5], condition_id="c")
        assert r.sample_rate == 48000
        assert r.duration == pytest.approx(3 / 48000)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValidationError):
            Rir(0, [1.0])
        with pytest.raises(ValidationError):
            Rir(-8000, [1.0])
        with pytest.raises(ValidationError):
            Rir(48000.5, [1.0])

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(ValidationError):
            Rir(48000, [])
        with pytest.raises(ValidationError):
            Rir(48000, [1.0, np.nan])
        with pytest.raises(ValidationError):
            Rir(48000, [1.0, np.inf])

    def test_rejects_all_zero(self):
        with pytest.raises(ValidationError):
            Rir(48000, np.zeros(100))

    def test_value_semantics(self):
        a = Rir(48000, [0.0, 1.0], channel_id="3")
        b = Rir(48000, [0.0, 1.0], channel_id="3")
        c = Rir(48000, [0.0, 2.0], channel_id="3")
        assert a == b
        assert a != c

    def test_immutable(self):
        r = Rir(48000, [0.0, 1.0])
        with pytest.raises(ValueError):
            r.samples[0] = 5.0
        source = np.array([0.0, 1.0])
        r2 = Rir(48000, source)
        source[0] = 9.0  # caller's array is copied, not aliased
        assert r2.samples[0] == 0.0

    def test_rescaled(self):
        r = Rir(48000, [0.0, 1.0])
        assert np.array_equal(r.rescaled(2.0).samples, [0.0, 2.0])
        with pytest.raises(ValidationError):
            r.rescaled(-1.0)


class TestBandSpec:
    def test_valid(self):
        b = BandSpec(1000, 1000)
        assert b.low == 500 and b.high == 1500

    def test_rejects_nonpositive_bandwidth(self):
        with pytest.raises(ValidationError):
            BandSpec(1000, 0)

    def test_rejects_band_touching_dc(self):
        with pytest.raises(ValidationError):
            BandSpec(500, 1000)

    def test_nyquist_check_at_use_time(self):
        b = BandSpec(19000, 1000)
        b.validate_for_rate(48000)
        with pytest.raises(ValidationError):
            b.validate_for_rate(39000)

    def test_hashable_value_semantics(self):
        assert BandSpec(1000, 1000) == BandSpec(1000, 1000)
        assert len({BandSpec(1000, 1000), BandSpec(1000, 1000)}) == 1


class TestAnalysisConfig:
    def test_defaults(self):
        c = AnalysisConfig()
        assert c.avg_window == 0.010
        assert c.snr_threshold_db == 30.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"avg_window": 0.0},
            {"snr_threshold_db": -3.0},
            {"stft_hop": 0},
            {"stft_hop": 1024, "stft_window_len": 512},
            {"guard_epsilon": 0.0},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValidationError):
            AnalysisConfig(**kwargs)


class TestCoherenceCurve:
    def test_valid_with_undefined_marker(self):
        c = CoherenceCurve([0.0, 0.1, 0.2], [1.0, np.nan, 0.5], None, ("a", "b"))
        assert list(c.defined) == [True, False, True]

    def test_rejects_out_of_range(self):
        with pytest.raises(ValidationError):
            CoherenceCurve([0.0, 0.1], [1.2, 0.5], None, ("a", "b"))
        with pytest.raises(ValidationError):
            CoherenceCurve([0.0, 0.1], [-0.1, 0.5], None, ("a", "b"))

    def test_rejects_axis_problems(self):
        with pytest.raises(ValidationError):
            CoherenceCurve([0.1, 0.0], [0.5, 0.5], None, ("a", "b"))
        with pytest.raises(ValidationError):
            CoherenceCurve([0.0, 0.1, 0.2], [0.5, 0.5], None, ("a", "b"))

    def test_equality_treats_nan_as_equal(self):
        a = CoherenceCurve([0.0, 0.1], [np.nan, 0.5], None, ("a", "b"))
        b = CoherenceCurve([0.0, 0.1], [np.nan, 0.5], None, ("a", "b"))
        assert a == b


class TestEnergyEnvelope:
    def test_valid(self):
        e = EnergyEnvelope([0.0, 0.1], [1.0, 0.5], 0.01)
        assert np.array_equal(e.total_power, [1.01, 0.51])

    def test_rejects_negative_energy(self):
        with pytest.raises(ValidationError):
            EnergyEnvelope([0.0, 0.1], [-1.0, 0.5], 0.0)
        with pytest.raises(ValidationError):
            EnergyEnvelope([0.0, 0.1], [1.0, 0.5], -0.1)

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValidationError):
            EnergyEnvelope([0.0, 0.1, 0.2], [1.0, 0.5], 0.0)


class TestSensitivityRating:
    def test_valid(self):
        r = SensitivityRating(None, 0.25, 10, ("a", "b"))
        assert r.gamma_rating == 0.25

    def test_rejects_out_of_range(self):
        with pytest.raises(ValidationError):
            SensitivityRating(None, 1.5, 10, ("a", "b"))
        with pytest.raises(ValidationError):
            SensitivityRating(None, -0.1, 10, ("a", "b"))
        with pytest.raises(ValidationError):
            SensitivityRating(None, 0.5, -1, ("a", "b"))


class TestTFCoherenceMap:
    def test_valid(self):
        m = TFCoherenceMap([0.0, 0.1], [0.0, 100.0, 200.0], np.full((2, 3), 0.5))
        assert m.gamma.shape == (2, 3)

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValidationError):
            TFCoherenceMap([0.0, 0.1], [0.0, 100.0], np.full((3, 2), 0.5))

    def test_rejects_out_of_range_cells(self):
        grid = np.full((2, 2), 0.5)
        grid[0, 0] = 1.5
        with pytest.raises(ValidationError):
            TFCoherenceMap([0.0, 0.1], [0.0, 100.0], grid)

    def test_undefined_cells_allowed(self):
        grid = np.full((2, 2), 0.5)
        grid[0, 0] = np.nan
        m = TFCoherenceMap([0.0, 0.1], [0.0, 100.0], grid)
        assert not m.defined[0, 0] and m.defined[1, 1]
