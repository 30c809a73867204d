"""Signal conditioning: FIR band-pass, common average reference, windowing.

The pipeline order is fixed: filter, re-reference, artifact stage (a
documented pass-through), segment.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .exceptions import ParameterError, TooShortError

log = logging.getLogger(__name__)

STAGE_ORDER = ("filter", "reference", "artifact", "segment")
ICA_SKIPPED = "ICA skipped"


@dataclass
class TrialRecord:
    """One EEG trial: ``samples`` is ``(channels, n_samples)`` in microvolts."""

    subject_id: str
    trial_id: int
    fs: float
    samples: np.ndarray
    label_oa: int
    label_ta: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 2:
            raise ParameterError(f"samples must be (C, N), got shape {self.samples.shape}")

    @property
    def n_channels(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]

    def label(self, task):
        task = task.upper()
        if task == "OA":
            return self.label_oa
        if task == "TA":
            return self.label_ta
        raise ParameterError(f"unknown task {task!r}; expected OA or TA")

    def with_samples(self, samples):
        return dataclasses.replace(self, samples=samples)

    def validate(self):
        """Check the record invariants (positive rate, >= 1 channel, >= 1 s, binary labels)."""
        if not np.isfinite(self.fs) or self.fs <= 0:
            raise ParameterError(f"fs must be positive, got {self.fs}")
        if self.n_channels < 1:
            raise ParameterError("trial has no channels")
        if self.n_samples < self.fs:
            raise ParameterError(f"trial is shorter than 1 s ({self.n_samples} samples at {self.fs} Hz)")
        for name in ("label_oa", "label_ta"):
            if getattr(self, name) not in (0, 1):
                raise ParameterError(f"{name} must be 0 or 1, got {getattr(self, name)}")
        return self


@dataclass(frozen=True)
class FirSpec:
    low_hz: float = 0.4
    high_hz: float = 32.0
    taps: int | None = None
    window: str = "hamming"


def default_taps(fs):
    """4001 taps at 500 Hz, scaled with the sampling rate and forced odd."""
    taps = int(round(4000 * fs / 500.0))
    return taps + 1 if taps % 2 == 0 else taps


def _lowpass(cutoff, fs, taps, window):
    n = np.arange(taps) - (taps - 1) / 2
    h = np.sinc(2.0 * cutoff / fs * n) * window
    return h / h.sum()


def design_fir(spec, fs):
    """Hamming-windowed-sinc band-pass as the difference of two unit-gain low-passes.

    The coefficients are symmetric (linear phase) and sum to zero up to
    rounding, so the DC response vanishes.
    """
    taps = spec.taps if spec.taps is not None else default_taps(fs)
    if not 0 < spec.low_hz < spec.high_hz < fs / 2:
        raise ParameterError(
            f"band edges must satisfy 0 < {spec.low_hz} < {spec.high_hz} < fs/2 = {fs / 2}"
        )
    if taps < 3 or taps % 2 == 0:
        raise ParameterError(f"taps must be odd and >= 3, got {taps}")
    if spec.window != "hamming":
        raise ParameterError(f"only the hamming window is supported, got {spec.window!r}")
    win = np.hamming(taps)
    h = _lowpass(spec.high_hz, fs, taps, win) - _lowpass(spec.low_hz, fs, taps, win)
    # exact symmetry regardless of rounding in the two sinc evaluations
    return 0.5 * (h + h[::-1])


def frequency_response(coeffs, fs, freqs):
    """|H(f)| of the FIR at the requested frequencies (direct DFT of the taps)."""
    n = np.arange(len(coeffs))
    freqs = np.atleast_1d(np.asarray(freqs, dtype=np.float64))
    phase = np.exp(-2j * np.pi * np.outer(freqs, n) / fs)
    return np.abs(phase @ coeffs)


def filter_array(x, coeffs):
    """Zero-phase FIR filtering along the last axis.

    Edges are extended by mirror reflection of ``(taps - 1) // 2`` samples
    (edge sample not repeated); the output has the input length.
    """
    x = np.asarray(x, dtype=np.float64)
    taps = len(coeffs)
    n = x.shape[-1]
    if n <= taps:
        raise TooShortError(f"signal of {n} samples is not longer than the {taps}-tap filter")
    pad = (taps - 1) // 2
    widths = [(0, 0)] * (x.ndim - 1) + [(pad, pad)]
    padded = np.pad(x, widths, mode="reflect")
    kernel = np.asarray(coeffs, dtype=np.float64).reshape((1,) * (x.ndim - 1) + (-1,))
    return fftconvolve(padded, kernel, mode="valid", axes=-1)


def filter_trial(trial, coeffs):
    """Band-pass every channel; output is time-aligned and of the same length."""
    return trial.with_samples(filter_array(trial.samples, coeffs))


def average_reference(trial):
    """Subtract the cross-channel mean at every sample."""
    x = np.asarray(trial.samples, dtype=np.float64)
    if x.shape[0] < 2:
        raise ParameterError("average referencing needs at least two channels")
    return trial.with_samples(x - x.mean(axis=0, keepdims=True))


def artifact_stage(trial, stage_log=None):
    """Placeholder for ICA-based artifact removal; returns the trial unchanged."""
    log.info("%s for subject %s trial %s", ICA_SKIPPED, trial.subject_id, trial.trial_id)
    entry = f"artifact: {ICA_SKIPPED}"
    if stage_log is not None and entry not in stage_log:
        stage_log.append(entry)
    return trial


@dataclass
class WindowSet:
    """Fixed-length windows cut from one or more trials.

    ``X`` is ``(n_windows, channels, T)``; the remaining arrays carry one
    entry per window.
    """

    X: np.ndarray
    label_oa: np.ndarray
    label_ta: np.ndarray
    subject_id: np.ndarray
    trial_id: np.ndarray
    offset: np.ndarray
    fs: float
    window_samples: int
    stride_samples: int

    def __len__(self):
        return self.X.shape[0]

    def labels(self, task):
        task = task.upper()
        if task == "OA":
            return self.label_oa
        if task == "TA":
            return self.label_ta
        raise ParameterError(f"unknown task {task!r}; expected OA or TA")

    def subset(self, idx):
        idx = np.asarray(idx)
        return dataclasses.replace(
            self,
            X=self.X[idx],
            label_oa=self.label_oa[idx],
            label_ta=self.label_ta[idx],
            subject_id=self.subject_id[idx],
            trial_id=self.trial_id[idx],
            offset=self.offset[idx],
        )

    def subjects(self):
        return sorted(set(self.subject_id.tolist()))

    def for_subject(self, subject):
        return self.subset(np.flatnonzero(self.subject_id == subject))

    @classmethod
    def concatenate(cls, sets):
        sets = [s for s in sets]
        if not sets:
            raise ParameterError("nothing to concatenate")
        first = sets[0]
        return cls(
            X=np.concatenate([s.X for s in sets]),
            label_oa=np.concatenate([s.label_oa for s in sets]),
            label_ta=np.concatenate([s.label_ta for s in sets]),
            subject_id=np.concatenate([s.subject_id for s in sets]),
            trial_id=np.concatenate([s.trial_id for s in sets]),
            offset=np.concatenate([s.offset for s in sets]),
            fs=first.fs,
            window_samples=first.window_samples,
            stride_samples=first.stride_samples,
        )


def segment(trial, window_s, stride_s=None):
    """Cut ``trial`` into windows at offsets 0, stride, 2*stride, ...

    ``stride_s`` defaults to the window length (non-overlapping windows).
    Windows that would run past the end of the trial are not emitted.
    """
    stride_s = window_s if stride_s is None else stride_s
    t = int(round(window_s * trial.fs))
    stride = int(round(stride_s * trial.fs))
    if t < 1:
        raise ParameterError(f"window of {window_s} s is shorter than one sample")
    if stride_s <= 0 or stride < 1:
        raise ParameterError(f"stride must be positive, got {stride_s} s")
    n = trial.n_samples
    offsets = np.arange(0, n - t + 1, stride, dtype=np.int64) if n >= t else np.zeros(0, np.int64)
    x = np.asarray(trial.samples, dtype=np.float64)
    windows = np.stack([x[:, o : o + t] for o in offsets]) if len(offsets) else np.zeros(
        (0, trial.n_channels, t)
    )
    k = len(offsets)
    return WindowSet(
        X=windows,
        label_oa=np.full(k, trial.label_oa, dtype=np.int64),
        label_ta=np.full(k, trial.label_ta, dtype=np.int64),
        subject_id=np.array([trial.subject_id] * k, dtype=object),
        trial_id=np.full(k, trial.trial_id, dtype=np.int64),
        offset=offsets,
        fs=trial.fs,
        window_samples=t,
        stride_samples=stride,
    )


@dataclass
class Preprocessor:
    """Runs the fixed four-stage pipeline and records what it did."""

    window_s: float = 0.5
    stride_s: float | None = None
    fir: FirSpec = field(default_factory=FirSpec)
    stage_log: list = field(default_factory=list)
    _coeffs: dict = field(default_factory=dict, repr=False)

    def coefficients(self, fs):
        if fs not in self._coeffs:
            self._coeffs[fs] = design_fir(self.fir, fs)
        return self._coeffs[fs]

    def condition(self, trial):
        """Filter, re-reference and pass through the artifact stage."""
        coeffs = self.coefficients(trial.fs)
        out = filter_trial(trial, coeffs)
        out = average_reference(out)
        return artifact_stage(out, self.stage_log)

    def run(self, trials):
        """Condition and segment every trial; returns one concatenated :class:`WindowSet`."""
        fir = self.fir
        self.stage_log.append(
            f"filter: FIR band-pass {fir.low_hz}-{fir.high_hz} Hz, {fir.window} window"
        )
        self.stage_log.append("reference: common average")
        sets = []
        for trial in trials:
            sets.append(segment(self.condition(trial), self.window_s, self.stride_s))
        stride = self.window_s if self.stride_s is None else self.stride_s
        self.stage_log.append(f"segment: window {self.window_s} s, stride {stride} s")
        return WindowSet.concatenate(sets)
