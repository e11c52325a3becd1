import numpy as np


def format_number(value):
    """17 significant digits: enough to round-trip any float64."""
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), '.17g')


def parse_float_list(text):
    """'0.4, 0.2,0.1' -> [0.4, 0.2, 0.1]"""
    values = []
    for part in str(text).split(','):
        part = part.strip()
        if part:
            values.append(float(part))
    return values


def make_rng(seed):
    # All randomness in a run comes from one seeded stream.
    return np.random.default_rng(int(seed))


def is_strictly_decreasing(values):
    values = list(values)
    return all(b < a for a, b in zip(values, values[1:]))
