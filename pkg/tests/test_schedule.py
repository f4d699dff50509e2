import numpy as np
import pytest

from chemoplast.schedule import (
    FINAL_TIME,
    PEAK_TIME,
    PEAK_TRACTION,
    LoadSchedule,
    default_load_schedule,
    ramp_scale,
)


def test_default_schedule_shape():
    s = default_load_schedule()
    t = np.array(s.times)
    assert len(s) == 26
    assert t[0] == pytest.approx(0.44)
    assert t[-1] == pytest.approx(FINAL_TIME)
    assert np.all(np.diff(t) > 0)
    assert s.times[s.peak_index] == PEAK_TIME and s.peak_index == 15
    # unloading: 0.2 s increments first, 0.05 s increments at the end
    np.testing.assert_allclose(np.diff(t[15:19]), 0.2)
    np.testing.assert_allclose(np.diff(t[-7:]), 0.05)


def test_load_scales():
    s = default_load_schedule()
    assert s.scale_at(1.2) == pytest.approx(1.0)
    assert s.scales[0] == pytest.approx(0.44 / 1.2)
    assert s.scales[-1] == 0.0
    sc = np.array(s.scales)
    assert np.all(np.diff(sc[:16]) > 0) and np.all(np.diff(sc[15:]) < 0)
    assert PEAK_TRACTION == 133e6


def test_ramp_and_interpolation():
    assert ramp_scale(0.6) == pytest.approx(0.5)
    assert ramp_scale(1.7) == pytest.approx(0.5)
    assert ramp_scale(3.0) == 0.0
    s = LoadSchedule((1.0, 2.0), (0.5, 1.0))
    assert s.scale_at(0.5) == pytest.approx(0.25)
    assert s.scale_at(1.5) == pytest.approx(0.75)


def test_round_trip_and_empty_schedule():
    s = default_load_schedule()
    assert LoadSchedule.from_dict(s.to_dict()) == s
    assert len(LoadSchedule((), ())) == 0


@pytest.mark.parametrize("times, scales", [((1.0, 1.0), (0.1, 0.2)), ((0.0, 1.0), (0.0, 0.1)),
                                           ((1.0,), (1.5,)), ((1.0, 2.0), (0.1,))])
def test_invalid_schedules(times, scales):
    with pytest.raises(ValueError):
        LoadSchedule(times, scales)
