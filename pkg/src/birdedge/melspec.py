"""Log-mel spectrogram value types and the dB conventions used everywhere.

Every spectrogram handled by this package is a (n_mels, n_frames) float32
matrix in dB, referenced so that the loudest cell of a chunk sits at exactly
0 dB, with a hard floor at FLOOR_DB. Silence is the floor value, never -inf.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError

# Hard lower bound of the dB scale. Cells at or below this value carry no
# usable energy and augmentations treat it as "empty".
FLOOR_DB = -80.0


@dataclass(frozen=True)
class MelConfig:
    """Parameters of the waveform -> log-mel conversion.

    Defaults describe the deployed pipeline: 48 kHz input, 64 mel bands
    between 150 and 7500 Hz, 512-point FFT with hop 384 and no centering,
    so a 2 s chunk yields exactly 249 frames.
    """

    sample_rate: int = 48000
    n_mels: int = 64
    fft_size: int = 512
    hop: int = 384
    f_min: float = 150.0
    f_max: float = 7500.0

    def validate(self) -> None:
        """Raise ConfigError if any field is out of its legal range."""
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.n_mels < 1:
            raise ConfigError(f"n_mels must be >= 1, got {self.n_mels}")
        if self.fft_size < 2:
            raise ConfigError(f"fft_size must be >= 2, got {self.fft_size}")
        if not 0 < self.hop <= self.fft_size:
            raise ConfigError(
                f"hop must be in (0, fft_size], got hop={self.hop} fft_size={self.fft_size}"
            )
        if not 0 < self.f_min < self.f_max:
            raise ConfigError(
                f"need 0 < f_min < f_max, got f_min={self.f_min} f_max={self.f_max}"
            )
        if self.f_max > self.sample_rate / 2:
            raise ConfigError(
                f"f_max={self.f_max} exceeds Nyquist {self.sample_rate / 2}"
            )

    def frame_count(self, n_samples: int) -> int:
        """Number of full analysis frames for a waveform of n_samples."""
        if n_samples < self.fft_size:
            return 0
        return (n_samples - self.fft_size) // self.hop + 1


@dataclass
class MelSpectrogram:
    """A log-mel matrix plus the config that produced it.

    values: float32 array of shape (n_mels, n_frames), dB in [FLOOR_DB, 0].
    config is carried for provenance; file round-trips only preserve values.
    """

    values: np.ndarray
    config: MelConfig | None = None

    @property
    def n_mels(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_frames(self) -> int:
        return int(self.values.shape[1])


def db_to_power(db: np.ndarray) -> np.ndarray:
    """Map dB values to linear power, 0 dB -> 1.0."""
    return np.power(10.0, np.asarray(db, dtype=np.float64) / 10.0)


def power_to_db(power: np.ndarray, ref: float) -> np.ndarray:
    """Map linear power to dB relative to ref, floored at FLOOR_DB.

    ref must be the maximum power of the matrix so the loudest cell lands
    exactly on 0 dB. Zero power maps to the floor, not -inf.
    """
    if ref <= 0.0:
        raise ValueError(f"reference power must be positive, got {ref}")
    power = np.asarray(power, dtype=np.float64)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(power / ref)
    return np.maximum(db, FLOOR_DB)
