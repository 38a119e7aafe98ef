"""Recompute the headline rates from the reported raw counts.

    python scripts/recompute_reported_metrics.py
"""

import sys

from bumpfix.metrics import Ratio, half_up_percent, ref_value

# (label, numerator, denominator, reported percent)
RATES = [
    ("BSR o3-mini P8", 28, 103, 27),
    ("FFSR o3-mini P4", 97, 239, 41),
    ("CEFR o3-mini P8", 741, 955, 78),
]
# (label, fixed, new, initial, reported percent)
REFS = [
    ("REF qwen2.5 P8", 609, 522, 1004, 9),
    ("REF qwen2.5 P6", 728, 1125, 1004, -40),
]


def main() -> int:
    ok = True
    for label, num, den, want in RATES:
        got = Ratio(num, den).percent
        ok &= got == want
        print(f"{label:24s} {num}/{den} = {got}%  (reported {want}%)")
    for label, fixed, new, initial, want in REFS:
        got = half_up_percent(ref_value(fixed, new, initial))
        ok &= got == want
        print(f"{label:24s} ({fixed}-{new})/{initial} = {got}%  (reported {want}%)")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
