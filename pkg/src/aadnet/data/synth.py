"""Synthetic stand-in for the two-task EEG dataset.

Each trial is independent 1/f background noise on every channel plus one
band-limited source projected through a lateralized spatial pattern:

* orientation is encoded spatially: the source reaches the "left" channel
  group (first half of the indices) with gain ``1 + g`` and the "right"
  group (second half) with ``1 - g`` on left trials, mirrored on right
  trials;
* timbre is encoded spectrally: 2-8 Hz source for "male", 8-20 Hz for
  "female" (both 2-20 Hz with ``ta_contrast=False``).

Within each group the pattern tapers from the lateral edge towards the
midline. Without the taper a common average reference would turn the two
orientation patterns into exact negatives of each other, leaving the class
covariances identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import ConfigError
from ..preprocess import TrialRecord
from .manifest import DatasetManifest
from .trial_io import save_trial

MALE_BAND = (2.0, 8.0)
FEMALE_BAND = (8.0, 20.0)
MATCHED_BAND = (2.0, 20.0)
NOISE_RMS_UV = 10.0
TAPER_END = 0.2
PATTERN_JITTER = 0.2

_SUBJECT_STREAM = 0
_TRIAL_STREAM = 1


@dataclass(frozen=True)
class SynthSpec:
    """Generator settings. ``spatial_gain=0`` with ``ta_contrast=False`` gives null data."""

    n_subjects: int = 16
    trials_per_subject: int = 12
    trial_seconds: float = 69.0
    fs: float = 500.0
    n_channels: int = 32
    snr_db: float = 0.0
    spatial_gain: float = 0.8
    seed: int = 0
    ta_contrast: bool = True

    @property
    def n_samples(self):
        return int(round(self.trial_seconds * self.fs))

    def validate(self):
        if not np.isfinite(self.snr_db):
            raise ConfigError(f"snr_db must be finite, got {self.snr_db}")
        if not 0.0 <= self.spatial_gain <= 1.0:
            raise ConfigError(f"spatial_gain must lie in [0, 1], got {self.spatial_gain}")
        if self.n_subjects < 1:
            raise ConfigError("need at least one subject")
        if self.trials_per_subject < 4 or self.trials_per_subject % 4:
            # OA and TA are crossed, so balancing both needs a multiple of 4
            raise ConfigError(
                f"trials_per_subject must be a positive multiple of 4, got {self.trials_per_subject}"
            )
        if self.n_channels < 2:
            raise ConfigError("need at least two channels")
        if not np.isfinite(self.fs) or self.fs <= 2 * FEMALE_BAND[1]:
            raise ConfigError(f"fs must exceed {2 * FEMALE_BAND[1]} Hz, got {self.fs}")
        if self.trial_seconds < 1.0:
            raise ConfigError("trials must last at least 1 s")
        return self


def subject_name(index):
    return f"S{index + 1:02d}"


def trial_labels(spec, subject_index):
    """(oa, ta) pairs for one subject: every combination equally often, seeded order."""
    n = spec.trials_per_subject
    pairs = np.array([(i % 2, (i // 2) % 2) for i in range(n)], dtype=np.int64)
    rng = np.random.default_rng([spec.seed, _SUBJECT_STREAM, subject_index])
    return pairs[rng.permutation(n)]


def base_pattern(spec, subject_index):
    """Subject-specific tapered pattern shared by both orientation classes."""
    c = spec.n_channels
    half = c // 2
    taper = np.linspace(1.0, TAPER_END, half)
    pattern = np.zeros(c)
    pattern[:half] = taper
    pattern[c - half:] = taper[::-1]
    rng = np.random.default_rng([spec.seed, _SUBJECT_STREAM, subject_index, 1])
    return pattern * (1.0 + PATTERN_JITTER * rng.uniform(-1.0, 1.0, c))


def orientation_gains(n_channels, label_oa, g):
    """Per-channel group gains: left-labelled (0) trials favour the first half."""
    half = n_channels // 2
    gains = np.ones(n_channels)
    near, far = (1.0 + g, 1.0 - g) if label_oa == 0 else (1.0 - g, 1.0 + g)
    gains[:half] = near
    gains[n_channels - half:] = far
    return gains


def band_noise(rng, n, fs, band):
    """Random-phase sum of every DFT sinusoid inside ``band``; unit RMS."""
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    inside = (freqs >= band[0]) & (freqs <= band[1])
    spec = np.zeros(freqs.size, dtype=np.complex128)
    spec[inside] = np.exp(2j * np.pi * rng.random(int(inside.sum())))
    s = np.fft.irfft(spec, n)
    return s / np.sqrt(np.mean(s**2))


def pink_noise(rng, n_channels, n, fs):
    """Independent 1/f-power noise per channel by 1/sqrt(f) spectral shaping; unit RMS."""
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    mask = np.zeros_like(freqs)
    mask[1:] = 1.0 / np.sqrt(freqs[1:])
    white = rng.standard_normal((n_channels, n))
    x = np.fft.irfft(np.fft.rfft(white, axis=1) * mask, n, axis=1)
    return x / np.sqrt(np.mean(x**2, axis=1, keepdims=True))


def trial_components(spec, subject_index, trial_index):
    """Return ``(signal, noise, label_oa, label_ta)`` before mixing, both (C, N) float64."""
    oa, ta = trial_labels(spec, subject_index)[trial_index]
    rng = np.random.default_rng([spec.seed, _TRIAL_STREAM, subject_index, trial_index])
    n, c = spec.n_samples, spec.n_channels
    noise = NOISE_RMS_UV * pink_noise(rng, c, n, spec.fs)
    band = (FEMALE_BAND if ta else MALE_BAND) if spec.ta_contrast else MATCHED_BAND
    source = band_noise(rng, n, spec.fs, band)
    pattern = base_pattern(spec, subject_index) * orientation_gains(c, oa, spec.spatial_gain)
    signal = pattern[:, None] * source[None, :]
    target = np.mean(noise**2) * 10.0 ** (spec.snr_db / 10.0)
    signal *= np.sqrt(target / np.mean(signal**2))
    return signal, noise, int(oa), int(ta)


def measured_snr_db(signal, noise):
    return float(10.0 * np.log10(np.mean(signal**2) / np.mean(noise**2)))


def synth_trial(spec, subject_index, trial_index):
    signal, noise, oa, ta = trial_components(spec, subject_index, trial_index)
    # round through float32 so in-memory trials equal their on-disk copies
    samples = (signal + noise).astype(np.float32).astype(np.float64)
    return TrialRecord(
        subject_id=subject_name(subject_index), trial_id=trial_index, fs=float(spec.fs),
        samples=samples, label_oa=oa, label_ta=ta,
    )


def synthesize(spec):
    """All trials in memory, subject-major."""
    spec.validate()
    return [
        synth_trial(spec, s, t)
        for s in range(spec.n_subjects)
        for t in range(spec.trials_per_subject)
    ]


def generate_synthetic(spec, out_dir):
    """Write every trial plus ``manifest.ini`` under ``out_dir``; returns the manifest."""
    spec.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    subjects = {}
    for s in range(spec.n_subjects):
        name = subject_name(s)
        (out / name).mkdir(exist_ok=True)
        files = []
        for t in range(spec.trials_per_subject):
            rel = f"{name}/trial_{t:02d}.aadb"
            save_trial(synth_trial(spec, s, t), out / rel)
            files.append(rel)
        subjects[name] = files
    manifest = DatasetManifest(
        fs=float(spec.fs), n_channels=spec.n_channels, subjects=subjects,
        task="OA,TA", generator_seed=spec.seed,
    )
    manifest.write(out)
    return manifest
