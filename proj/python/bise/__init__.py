"""Bilateral speech enhancement toolkit."""

from ._core import (
    __version__,
    enhance_file,
    expected_quality,
    gain_log_mmse,
    gain_mmse,
    gcc_delay,
    quiet_detection_score,
    read_wav,
    segmental_snr,
    segmental_snr_improvement,
    storage_bits,
    suppression_advantage,
    synth_hrir,
    vad_labels,
    write_wav,
)

__all__ = [
    "__version__",
    "enhance_file",
    "expected_quality",
    "gain_log_mmse",
    "gain_mmse",
    "gcc_delay",
    "quiet_detection_score",
    "read_wav",
    "segmental_snr",
    "segmental_snr_improvement",
    "storage_bits",
    "suppression_advantage",
    "synth_hrir",
    "vad_labels",
    "write_wav",
]
