"""birdedge: a desk-side toolkit mirroring an on-device bird call monitor.

Subpackages cover the full chain: WAV decoding and spectrogram storage
(audio_io), waveform-to-log-mel preprocessing (preprocess), stochastic
spectrogram augmentation (augment), int8 CNN inference with static cost
estimation (nnrt), compression trial analysis (trials), and solar energy
budget sizing (energy). The birdedge CLI front-ends all of it.
"""

__version__ = "0.1.0"
