def roi_label(f_target: float, f_effective: float, eps: float) -> bool:
    """True when ``|f_effective - f_target| <= eps * f_target`` (boundary included)."""
    if not f_target > 0:
        raise ValueError("f_target must be > 0")
    return abs(f_effective - f_target) <= eps * f_target
