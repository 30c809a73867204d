import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import freqz

from aadnet.exceptions import ParameterError, TooShortError
from aadnet.preprocess import (
    ICA_SKIPPED,
    STAGE_ORDER,
    FirSpec,
    Preprocessor,
    TrialRecord,
    artifact_stage,
    average_reference,
    design_fir,
    filter_array,
    frequency_response,
    segment,
)

FS = 500.0


@pytest.fixture(scope="module")
def taps():
    return design_fir(FirSpec(), FS)


def _trial(samples, fs=FS, trial_id=0):
    return TrialRecord("S01", trial_id, fs, np.asarray(samples, dtype=np.float64), 0, 1)


def test_coefficients_symmetric_and_zero_dc(taps):
    assert taps.size % 2 == 1
    np.testing.assert_array_equal(taps, taps[::-1])
    assert abs(taps.sum()) <= 1e-3


def test_response_matches_scipy_freqz(taps):
    freqs = np.array([0.05, 0.4, 4.0, 8.0, 16.0, 32.0, 45.0])
    _, h = freqz(taps, worN=freqs, fs=FS)
    np.testing.assert_allclose(frequency_response(taps, FS, freqs), np.abs(h), rtol=1e-9, atol=1e-12)


def test_stopband_and_passband_levels(taps):
    _, h = freqz(taps, worN=np.array([0.05, 45.0, 60.0, 4.0, 8.0, 16.0]), fs=FS)
    db = 20 * np.log10(np.abs(h))
    assert np.all(db[:3] <= -40)
    assert np.all(np.abs(db[3:]) <= 0.5)


def test_sinusoid_passes_with_zero_phase(taps):
    t = np.arange(int(20 * FS)) / FS
    x = np.sin(2 * np.pi * 8.0 * t)
    y = filter_array(x, taps)
    core = slice(len(taps), len(t) - len(taps))
    amp = np.max(np.abs(y[core]))
    assert abs(amp - 1.0) <= 0.06
    # zero phase: output is aligned with the input, no delay compensation needed
    np.testing.assert_allclose(y[core], x[core], atol=0.06)


def test_dc_and_line_noise_rejected(taps):
    n = int(20 * FS)
    y = filter_array(np.full((1, n), 7.0), taps)
    assert np.max(np.abs(y)) <= 1e-2 * 7.0
    t = np.arange(n) / FS
    y = filter_array(np.sin(2 * np.pi * 60.0 * t), taps)
    core = y[len(taps) : -len(taps)]
    assert 20 * np.log10(np.max(np.abs(core))) <= -40


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_filter_is_linear(seed):
    r = np.random.default_rng(seed)
    h = design_fir(FirSpec(taps=101), FS)
    a, b = r.standard_normal((2, 600)), r.standard_normal((2, 600))
    np.testing.assert_allclose(filter_array(a + b, h), filter_array(a, h) + filter_array(b, h), atol=1e-9)


def test_filter_needs_longer_signal(taps):
    with pytest.raises(TooShortError):
        filter_array(np.zeros(len(taps)), taps)


def test_design_validation():
    with pytest.raises(ParameterError):
        design_fir(FirSpec(low_hz=40.0, high_hz=30.0), FS)
    with pytest.raises(ParameterError):
        design_fir(FirSpec(taps=100), FS)


def test_average_reference():
    out = average_reference(_trial([[1.0, 1.0], [3.0, 3.0]]))
    np.testing.assert_array_equal(out.samples, [[-1.0, -1.0], [1.0, 1.0]])
    zero_mean = np.array([[1.0, -2.0], [-1.0, 2.0]])
    np.testing.assert_array_equal(average_reference(_trial(zero_mean)).samples, zero_mean)
    r = np.random.default_rng(0).standard_normal((32, 100))
    assert np.max(np.abs(average_reference(_trial(r)).samples.sum(axis=0))) <= 1e-12


def test_segment_counts():
    assert len(segment(_trial(np.zeros((2, 34500))), 0.5)) == 138
    assert len(segment(_trial(np.zeros((2, 500))), 1.0, 1.0)) == 1
    w = segment(_trial(np.zeros((2, 500))), 0.5, 0.25)
    assert w.offset.tolist() == [0, 125, 250]
    assert w.X.shape == (3, 2, 250)


def test_segment_carries_labels_and_data():
    x = np.arange(2 * 1000).reshape(2, 1000).astype(float)
    w = segment(_trial(x, trial_id=4), 0.5)
    np.testing.assert_array_equal(w.X[1], x[:, 250:500])
    assert set(w.label_ta.tolist()) == {1} and set(w.trial_id.tolist()) == {4}


def test_artifact_stage_passthrough():
    trial = _trial(np.random.default_rng(1).standard_normal((3, 600)))
    log = []
    out = artifact_stage(trial, log)
    assert out.samples.tobytes() == trial.samples.tobytes()
    assert any(ICA_SKIPPED in line for line in log)


def test_pipeline_stage_order():
    pre = Preprocessor(window_s=0.5, fir=FirSpec(taps=201))
    trial = _trial(np.random.default_rng(2).standard_normal((4, 2000)))
    windows = pre.run([trial])
    assert len(windows) == 8
    stages = [line.split(":")[0] for line in pre.stage_log]
    assert [s for s in STAGE_ORDER if s in stages] == list(STAGE_ORDER)
    assert stages.index("filter") < stages.index("reference") < stages.index("artifact") < stages.index("segment")
