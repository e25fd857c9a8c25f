"""Canonical emotion label set.

Order follows the RAVDESS numeric codes (01..08); parsing and all class
indices in the models use this order, not any prose ordering.
"""

EMOTIONS = (
    "neutral",
    "calm",
    "happy",
    "sad",
    "angry",
    "fearful",
    "disgust",
    "surprised",
)

EMOTION_TO_INDEX = {name: i for i, name in enumerate(EMOTIONS)}

N_EMOTIONS = len(EMOTIONS)

CUE_NAMES = (
    "shrillness",
    "loudness",
    "mean_pitch",
    "pitch_range",
    "speaking_rate",
    "pause_proportion",
)

RELATIONS = ("lower", "similar", "higher")


def emotion_from_code(code: int) -> str:
    """Map a 1-based dataset emotion code to its label."""
    if not 1 <= code <= 8:
        raise ValueError(f"emotion code out of range: {code}")
    return EMOTIONS[code - 1]
