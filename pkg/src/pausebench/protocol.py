"""Fixed protocol constants shared across the toolkit.

These values define the frame grid, windowing, training regime, and
evaluation rules that every stage assumes. Reports embed them so a run
can be audited against the protocol it claims to follow.
"""

from __future__ import annotations

RATE_HZ = 50
WINDOW_S = 15.0
WINDOW_FRAMES = 750
STRIDE_S = 1.0
TOLERANCE_FRAMES = 10
MIN_OVERLAP_RATIO = 0.30
MASK_TAIL_FRAMES = 50
BATCH_SIZE = 64
LEARNING_RATE = 1e-4
EXERTION_LOW_LEVELS = (1, 2)
EXERTION_HIGH_LEVELS = (3, 4, 5)

AUDIO_RATE_HZ = 16000


def protocol_constants() -> dict:
    """Protocol block embedded in every report."""
    return {
        "rate_hz": RATE_HZ,
        "window_s": WINDOW_S,
        "window_frames": WINDOW_FRAMES,
        "stride_s": STRIDE_S,
        "tolerance_frames": TOLERANCE_FRAMES,
        "min_overlap_ratio": MIN_OVERLAP_RATIO,
        "mask_tail_frames": MASK_TAIL_FRAMES,
        "batch_size": BATCH_SIZE,
        "learning_rate": LEARNING_RATE,
        "exertion_clusters": {
            "low": list(EXERTION_LOW_LEVELS),
            "high": list(EXERTION_HIGH_LEVELS),
        },
    }
