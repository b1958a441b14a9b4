"""Computable constraints for interactive sessions.

The default is a WCAG-style contrast ratio over two sRGB triplets, standing in
for an external quality predictor: the system owns the constraint while the
human owns the preference.
"""

from __future__ import annotations

import numpy as np


def _srgb_linear(c: np.ndarray) -> np.ndarray:
    c = np.clip(c, 0.0, 1.0)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def relative_luminance(rgb) -> float:
    lin = _srgb_linear(np.asarray(rgb, dtype=float))
    return float(0.2126 * lin[0] + 0.7152 * lin[1] + 0.0722 * lin[2])


def contrast_constraint(params) -> float:
    """Contrast ratio of two sRGB triplets packed as 6 values in [0, 1]."""
    p = np.asarray(params, dtype=float).ravel()
    if p.shape[0] != 6:
        raise ValueError("contrast constraint expects 6 parameters (two RGB triplets)")
    l1 = relative_luminance(p[:3])
    l2 = relative_luminance(p[3:])
    lmax, lmin = max(l1, l2), min(l1, l2)
    return (lmax + 0.05) / (lmin + 0.05)


CONSTRAINTS = {
    "contrast": {"fn": contrast_constraint, "default_lambda": 4.5, "dim": 6},
}


def get_constraint(name: str):
    if name not in CONSTRAINTS:
        raise KeyError(name)
    return CONSTRAINTS[name]
