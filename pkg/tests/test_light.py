import numpy as np
import pytest
from hypothesis import given, strategies as st

from otclock import light as lt


def test_constants():
    assert lt.light_at(lt.ConstantDark(), 0.0) == 0
    assert lt.light_at(lt.ConstantDark(), 123.4) == 0
    assert lt.light_at(lt.ConstantLight(), 0.0) == 1
    assert lt.light_at(lt.ConstantLight(), 500.0) == 1


def test_periodic_basic_values():
    ld = lt.Periodic(6, 18)
    assert lt.light_at(ld, 12.0) == 1  # midday is lit
    assert lt.light_at(ld, 30.0) == 0  # 30 mod 24 = 6: dawn instant, H(0)=0
    assert lt.light_at(ld, 6.0) == 0
    assert lt.light_at(ld, 18.0) == 0  # dusk instant dark as well
    assert lt.light_at(ld, 6.0 + 1e-9) == 1
    assert lt.light_at(ld, 3.0) == 0
    assert lt.light_at(ld, 23.0) == 0


def test_transfer_ll_dd_at_160():
    sched = lt.Transfer(lt.ConstantLight(), 160.0, lt.ConstantDark())
    assert lt.light_at(sched, 159.9) == 1
    assert lt.light_at(sched, 160.1) == 0
    assert lt.light_at(sched, 160.0) == 0  # switch instant belongs to the after side


def test_validation():
    with pytest.raises(ValueError):
        lt.Periodic(18, 6)
    with pytest.raises(ValueError):
        lt.Periodic(6, 6)
    with pytest.raises(ValueError):
        lt.Periodic(24, 25)
    with pytest.raises(ValueError):
        lt.Periodic(-1, 6)
    inner = lt.Transfer(lt.ConstantLight(), 10.0, lt.ConstantDark())
    with pytest.raises(ValueError, match="nest"):
        lt.Transfer(inner, 20.0, lt.ConstantLight())
    with pytest.raises(ValueError):
        lt.light_at(lt.ConstantDark(), -0.1)


def test_period_24_on_dyadic_grid():
    ld = lt.Periodic(6, 18)
    for t in np.arange(0, 2000, 0.125):
        assert lt.light_at(ld, t) == lt.light_at(ld, t + 24.0)


@given(st.floats(0, 1e5), st.integers(1, 5))
def test_period_24_property(t, k):
    ld = lt.Periodic(7.25, 19.5)
    tm = t % 24.0
    # stay away from the measure-zero switch instants where float rounding
    # of t + 24k can legitimately cross the boundary
    if min(abs(tm - 7.25), abs(tm - 19.5)) < 1e-6:
        return
    assert lt.light_at(ld, t) == lt.light_at(ld, t + 24.0 * k)


def test_exactly_12_lit_hours_per_day():
    ld = lt.Periodic(6, 18)
    cells = 24000
    mids = (np.arange(cells) + 0.5) * (24.0 / cells)
    lit = sum(lt.light_at(ld, m) for m in mids)
    assert lit * (24.0 / cells) == 12.0


def test_segments_ld_12_12():
    bounds, values = lt.segments(lt.Periodic(6, 18), 48.0)
    assert np.allclose(bounds, [0, 6, 18, 30, 42, 48])
    assert values.tolist() == [0, 1, 0, 1, 0]
    lit_measure = float(np.sum(np.diff(bounds) * values))
    assert lit_measure == 24.0


def test_segments_interior_matches_light_at():
    for sched in (lt.Periodic(0, 24), lt.Periodic(6, 24), lt.Periodic(0, 6),
                  lt.Transfer(lt.Periodic(6, 18), 30.0, lt.ConstantDark())):
        bounds, values = lt.segments(sched, 100.0)
        assert bounds[0] == 0.0 and bounds[-1] == 100.0
        assert np.all(np.diff(bounds) > 0)
        mids = 0.5 * (bounds[:-1] + bounds[1:])
        assert values.tolist() == [lt.light_at(sched, m) for m in mids]


def test_transfer_switch_times():
    sched = lt.Transfer(lt.ConstantLight(), 160.0, lt.ConstantDark())
    assert lt.switch_times(sched, 240.0).tolist() == [160.0]
    sched2 = lt.Transfer(lt.Periodic(6, 18), 20.0, lt.ConstantDark())
    assert lt.switch_times(sched2, 48.0).tolist() == [6.0, 18.0, 20.0]


def test_json_round_trip():
    for sched in (lt.ConstantDark(), lt.ConstantLight(), lt.Periodic(6, 18),
                  lt.Transfer(lt.ConstantLight(), 160.0, lt.ConstantDark())):
        assert lt.from_json(lt.to_json(sched)) == sched
