"""Shared test helpers."""

from greenlb.cluster import PowerModel
from greenlb.policy import PowerState


def assert_timeline_wellformed(timeline, power: PowerModel):
    """Structural checks on a (enter_time, state) history.

    The history must start at t=0, be gapless with non-decreasing times, and
    honour the transition protocol: sleep only after a full-length suspend,
    on only after a full-length wakeup (or at t=0), suspend only from on,
    and wakeup only from sleep or suspend.
    """
    assert timeline[0][0] == 0.0
    times = [t for t, _ in timeline]
    assert times == sorted(times)
    for i in range(1, len(timeline)):
        (prev_t, prev_s), (t, s) = timeline[i - 1], timeline[i]
        assert s != prev_s, "state change events must change the state"
        duration = t - prev_t
        if s is PowerState.SLEEP:
            assert prev_s is PowerState.SUSPEND
            assert abs(duration - power.t_suspend) < 1e-9
        elif s is PowerState.ON:
            assert prev_s is PowerState.WAKEUP
            assert abs(duration - power.t_wakeup) < 1e-9
        elif s is PowerState.SUSPEND:
            assert prev_s is PowerState.ON
        else:
            assert prev_s in (PowerState.SLEEP, PowerState.SUSPEND)
