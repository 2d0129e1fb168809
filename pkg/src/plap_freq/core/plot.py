"""SVG line plots of frequency profiles."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import DomainError  # noqa: E402
from .frequency import FrequencyProfile  # noqa: E402

logger = logging.getLogger(__name__)

SERIES = ("I", "D", "F")


def series_fragments(profile: FrequencyProfile, series: str) -> list[tuple[np.ndarray, np.ndarray]]:
    """Maximal runs of consecutive defined points; only F has gaps."""
    if series not in SERIES:
        raise DomainError(f"Unknown series '{series}', expected one of {SERIES}")
    values = getattr(profile, series)
    defined = profile.F_defined if series == "F" else np.ones(values.size, dtype=bool)
    fragments = []
    start = None
    for idx, ok in enumerate(np.append(defined, False)):
        if ok and start is None:
            start = idx
        elif not ok and start is not None:
            fragments.append((profile.radii[start:idx], values[start:idx]))
            start = None
    return fragments


def emit_plot(
    profile: FrequencyProfile,
    path: Path | str,
    series: Sequence[str] = ("F",),
    title: str | None = None,
) -> Path:
    """
    Standalone SVG with r on the horizontal axis, one line per defined fragment.

    A fragment of a single point is drawn as a marker.
    """
    if len(profile) == 0:
        raise DomainError("Cannot plot an empty profile")
    path = Path(path)
    plt.rcParams["svg.hashsalt"] = "plapfreq"
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    try:
        for color, name in zip(("C0", "C1", "C2"), series):
            for k, (r, v) in enumerate(series_fragments(profile, name)):
                label = name if k == 0 else None
                if r.size == 1:
                    ax.plot(r, v, linestyle="none", marker="o", color=color, label=label)
                else:
                    ax.plot(r, v, linestyle="-", color=color, label=label)
        ax.set_xlabel("r")
        ax.set_title(title or f"frequency profile, p = {profile.p:g}")
        ax.grid(True, alpha=0.3)
        if ax.get_legend_handles_labels()[0]:
            ax.legend()
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
    logger.info(f"wrote {path}")
    return path
