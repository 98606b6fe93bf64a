"""Predefined spindle-speed lookup table.

Entries were generated once from round(1000 * Vc / (pi * d)) with the
cutting speeds below and are frozen here as data; the formula stays in the
test suite as the independent oracle. Diameters are capped at 50 mm to
match the drilling constraint.
"""

CUTTING_SPEED_M_PER_MIN = {
    "aluminum": 100,
    "brass": 60,
    "steel": 30,
    "stainless": 20,
}

DIAMETERS_MM = (3, 5, 6, 8, 10, 12, 16, 20, 25, 30, 40, 50)

RPM_TABLE = {
    "aluminum": {3: 10610, 5: 6366, 6: 5305, 8: 3979, 10: 3183, 12: 2653,
                 16: 1989, 20: 1592, 25: 1273, 30: 1061, 40: 796, 50: 637},
    "brass": {3: 6366, 5: 3820, 6: 3183, 8: 2387, 10: 1910, 12: 1592,
              16: 1194, 20: 955, 25: 764, 30: 637, 40: 477, 50: 382},
    "steel": {3: 3183, 5: 1910, 6: 1592, 8: 1194, 10: 955, 12: 796,
              16: 597, 20: 477, 25: 382, 30: 318, 40: 239, 50: 191},
    "stainless": {3: 2122, 5: 1273, 6: 1061, 8: 796, 10: 637, 12: 531,
                  16: 398, 20: 318, 25: 255, 30: 212, 40: 159, 50: 127},
}

SUPPORTED_MATERIALS = list(CUTTING_SPEED_M_PER_MIN)


def lookup_rpm(material: str, diameter_mm) -> int:
    """Exact-match lookup; KeyError when the pair is not in the table."""
    return RPM_TABLE[material][int(diameter_mm)]
