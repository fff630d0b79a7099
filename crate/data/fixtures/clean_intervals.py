# Interval arithmetic helpers used by the scheduling planner.


def span(interval):
    """Length of a (start, end) interval, zero when missing."""
    if interval is None:
        return 0
    start, end = interval
    return end - start


def overlap(a, b):
    """Shared length between two intervals."""
    if a is None or b is None:
        return 0
    a_start, a_end = a
    b_start, b_end = b
    low = max(a_start, b_start)
    high = min(a_end, b_end)
    if high - low < 0:
        return 0
    return high - low
