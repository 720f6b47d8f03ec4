import numpy as np
import pytest

from nerula.rng import RngStream
from nerula.signals import (
    Corpus, CorpusConfig, DatasetSplit, Signal, SynthParams, build_corpus,
    load_signal_csv, load_signal_f32, normalize, save_signal_csv,
    save_signal_f32, split_ids, synth_ecg,
)


def detect_r_peaks(x, fs, min_gap_s=0.18, thresh_frac=0.5, smooth_s=0.0):
    """Independent oracle: threshold clusters, one peak per cluster. A short
    moving average before thresholding keeps detection reliable on moderately
    noisy draws (peaks are located on the raw samples either way)."""
    y = x
    if smooth_s > 0:
        w = max(int(round(smooth_s * fs)) | 1, 3)
        y = np.convolve(x, np.ones(w) / w, mode="same")
    thr = thresh_frac * y.max()
    idx = np.flatnonzero(y > thr)
    if len(idx) == 0:
        return np.array([], dtype=int)
    groups = np.split(idx, np.flatnonzero(np.diff(idx) > int(min_gap_s * fs)) + 1)
    return np.array([g[np.argmax(x[g])] for g in groups])


def test_regular_rhythm_exact_peak_grid():
    sig = synth_ecg(SynthParams(heart_rate_bpm=60.0), 10.0, 300.0, RngStream(0))
    peaks = detect_r_peaks(sig.samples, 300.0)
    assert len(peaks) == 10
    spacing = np.diff(peaks)
    assert np.all(np.abs(spacing - 300) <= 1)


def test_noise_free_regular_signal_is_exactly_periodic():
    sig = synth_ecg(SynthParams(heart_rate_bpm=60.0), 10.0, 300.0, RngStream(1))
    x = sig.samples
    period = 300
    assert np.array_equal(x[:-period], x[period:])


def test_peak_count_property_over_many_draws():
    # bounds: rhythms whose closest displaced beats stay >= 0.25 s apart, so
    # adjacent R-waves never fuse into one bump on the sample grid
    rng = RngStream(2)
    fs, dur = 200.0, 6.0
    checked = 0
    for i in range(1400):
        r = rng.split(i)
        hr = float(r.uniform(40.0, 180.0))
        jit = float(r.uniform(0.0, 0.30))
        if 60.0 / hr * (1.0 - 2.0 * jit) < 0.25:
            continue
        params = SynthParams(heart_rate_bpm=hr, rr_jitter_frac=jit,
                             noise_sigma=0.02)
        sig = synth_ecg(params, dur, fs, r.split("synth"))
        count = len(detect_r_peaks(sig.samples, fs))
        expect = int(np.floor(dur * hr / 60.0))
        assert abs(count - expect) <= 1, (hr, jit, count, expect)
        checked += 1
    assert checked >= 1000


def test_rr_variability_separates_jitter_levels():
    fs = 300.0
    cvs = []
    for jit, seed in ((0.0, 10), (0.3, 11)):
        sig = synth_ecg(SynthParams(heart_rate_bpm=75.0, rr_jitter_frac=jit),
                        30.0, fs, RngStream(seed))
        rr = np.diff(detect_r_peaks(sig.samples, fs)) / fs
        cvs.append(rr.std() / rr.mean())
    # grid-anchored displacement gives CV ~= j * sqrt(2/3) = 0.245 at j=0.3
    assert cvs[1] - cvs[0] > 0.2


def test_synth_rejects_bad_params():
    with pytest.raises(ValueError):
        SynthParams(heart_rate_bpm=10.0)
    with pytest.raises(ValueError):
        SynthParams(rr_jitter_frac=1.0)
    with pytest.raises(ValueError):
        SynthParams(widths_s=(0.04, 0.01, -0.01, 0.01, 0.09))
    with pytest.raises(ValueError, match="fewer than two beats"):
        synth_ecg(SynthParams(heart_rate_bpm=30.0), 1.0, 300.0, RngStream(0))


def test_synth_deterministic():
    p = SynthParams(heart_rate_bpm=80.0, rr_jitter_frac=0.2, noise_sigma=0.05)
    a = synth_ecg(p, 8.0, 250.0, RngStream(42))
    b = synth_ecg(p, 8.0, 250.0, RngStream(42))
    assert np.array_equal(a.samples, b.samples)


def test_signal_validation():
    with pytest.raises(ValueError, match="non-finite"):
        Signal(np.array([1.0, np.nan, 2.0]), 100.0, "bad")
    with pytest.raises(ValueError):
        Signal(np.array([1.0]), 100.0, "short")
    with pytest.raises(ValueError):
        Signal(np.zeros(10), -5.0, "rate")


# ------------------------------------------------------------------ normalize

def test_normalize_zero_mean_unit_var():
    sig = synth_ecg(SynthParams(noise_sigma=0.05), 10.0, 300.0, RngStream(3))
    z = normalize(sig)
    assert abs(z.samples.mean()) < 1e-12
    assert abs(z.samples.var() - 1.0) < 1e-12


def test_normalize_constant_signal_maps_to_zeros():
    z = normalize(Signal(np.full(100, 3.3), 100.0, "const"))
    assert np.all(z.samples == 0.0)


def test_normalize_idempotent():
    sig = synth_ecg(SynthParams(noise_sigma=0.05), 10.0, 300.0, RngStream(4))
    once = normalize(sig)
    twice = normalize(once)
    assert np.abs(twice.samples - once.samples).max() < 1e-9


# --------------------------------------------------------------------- corpus

@pytest.fixture(scope="module")
def small_corpus():
    cfg = CorpusConfig(seed=5, sample_rate_hz=100.0, duration_s=5.12,
                       pretrain_count=8, rhythm_per_class=6, attr_per_class=4,
                       rate_count=5)
    return build_corpus(cfg)


def test_corpus_counts_and_labels(small_corpus):
    c = small_corpus
    assert len(c.pretrain) == 8 and all(s.label is None for s in c.pretrain)
    assert len(c.rhythm3) == 18
    assert sorted({s.label for s in c.rhythm3}) == [0, 1, 2]
    assert len(c.attr2) == 8 and sorted({s.label for s in c.attr2}) == [0, 1]
    assert len(c.rate) == 5
    assert all(55.0 <= s.label <= 110.0 for s in c.rate)


def test_corpus_ids_unique(small_corpus):
    ids = [s.id for group in (small_corpus.pretrain, small_corpus.rhythm3,
                              small_corpus.attr2, small_corpus.rate)
           for s in group]
    assert len(ids) == len(set(ids))


def test_corpus_deterministic():
    cfg = CorpusConfig(seed=6, sample_rate_hz=100.0, duration_s=5.12,
                       pretrain_count=3, rhythm_per_class=2, attr_per_class=2,
                       rate_count=2)
    a, b = build_corpus(cfg), build_corpus(cfg)
    for sa, sb in zip(a.pretrain + a.rhythm3, b.pretrain + b.rhythm3):
        assert sa.id == sb.id
        assert np.array_equal(sa.samples, sb.samples)


def test_corpus_rhythm_classes_differ_in_rr_variability():
    cfg = CorpusConfig(seed=7, sample_rate_hz=300.0, duration_s=10.0,
                       pretrain_count=1, rhythm_per_class=6, attr_per_class=1,
                       rate_count=1)
    corpus = build_corpus(cfg)
    cv = {0: [], 1: []}
    hf = {0: [], 1: [], 2: []}
    for s in corpus.rhythm3:
        # high-frequency residual power, independent of beat detection
        w = np.ones(7) / 7
        hf[s.label].append(np.mean((s.samples - np.convolve(s.samples, w, mode="same")) ** 2))
        if s.label in cv:
            # corpus rates stay <= 110 bpm, so a 0.4 s gap merges each R..T
            # complex into one cluster and the cluster argmax is the R wave
            rr = np.diff(detect_r_peaks(s.samples, 300.0, min_gap_s=0.4,
                                        smooth_s=0.03))
            cv[s.label].append(rr.std() / rr.mean())
    assert max(cv[0]) < 0.1
    assert min(cv[1]) > 0.2
    # the noisy class carries visibly more high-frequency power than either
    # rhythm class at the same morphology family
    assert min(hf[2]) > max(max(hf[0]), max(hf[1]))


# ---------------------------------------------------------------------- splits

def test_split_disjoint_cover_proportions():
    ids = [f"s{i}" for i in range(200)]
    sp = split_ids(ids, (0.6, 0.2, 0.2), seed=8)
    all_ids = list(sp.train) + list(sp.val) + list(sp.test)
    assert sorted(all_ids) == sorted(ids)
    assert abs(len(sp.train) / 200 - 0.6) <= 0.01
    assert abs(len(sp.val) / 200 - 0.2) <= 0.01


def test_split_deterministic_and_seed_sensitive():
    ids = [f"s{i}" for i in range(50)]
    a = split_ids(ids, (0.5, 0.25, 0.25), seed=9)
    b = split_ids(ids, (0.5, 0.25, 0.25), seed=9)
    c = split_ids(ids, (0.5, 0.25, 0.25), seed=10)
    assert a == b
    assert a != c


def test_split_rejects_bad_fractions():
    with pytest.raises(ValueError):
        split_ids(["a", "b"], (0.5, 0.2, 0.2), seed=0)


def test_split_duplicate_detection():
    with pytest.raises(ValueError, match="more than one"):
        DatasetSplit(train=("a", "b"), val=("b",), test=())


# -------------------------------------------------------------------- file IO

def test_csv_round_trip_exact(tmp_path):
    sig = synth_ecg(SynthParams(noise_sigma=0.05), 4.0, 50.0, RngStream(12))
    p = tmp_path / "sig.csv"
    save_signal_csv(sig, p)
    back = load_signal_csv(p, id=sig.id)
    assert back.sample_rate_hz == sig.sample_rate_hz
    assert np.array_equal(back.samples, sig.samples)


def test_csv_headerless_needs_default_rate(tmp_path):
    p = tmp_path / "raw.csv"
    p.write_text("1.0\n2.0\n3.0\n")
    with pytest.raises(ValueError, match="sample_rate_hz"):
        load_signal_csv(p)
    sig = load_signal_csv(p, default_rate_hz=125.0)
    assert sig.sample_rate_hz == 125.0
    assert np.array_equal(sig.samples, [1.0, 2.0, 3.0])


def test_csv_bad_line_is_reported_with_number(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("sample_rate_hz=100.0\n1.0\noops\n3.0\n")
    with pytest.raises(ValueError, match="line 3"):
        load_signal_csv(p)


def test_csv_nan_rejected_with_line(tmp_path):
    p = tmp_path / "nan.csv"
    p.write_text("sample_rate_hz=100.0\n1.0\nnan\n")
    with pytest.raises(ValueError, match="line 3"):
        load_signal_csv(p)


def test_f32_round_trip(tmp_path):
    sig = synth_ecg(SynthParams(noise_sigma=0.05), 4.0, 50.0, RngStream(13))
    p = tmp_path / "sig.nrla"
    save_signal_f32(sig, p)
    back = load_signal_f32(p)
    assert np.array_equal(back.samples, sig.samples.astype(np.float32).astype(np.float64))
    assert back.sample_rate_hz == np.float32(sig.sample_rate_hz)


def test_f32_bad_magic(tmp_path):
    p = tmp_path / "junk.nrla"
    p.write_bytes(b"XXXX" + b"\x00" * 12)
    with pytest.raises(ValueError, match="magic at offset 0"):
        load_signal_f32(p)


def test_f32_ragged_payload(tmp_path):
    p = tmp_path / "ragged.nrla"
    p.write_bytes(b"NRLA" + np.float32(100.0).tobytes() + b"\x00" * 9)
    with pytest.raises(ValueError, match="whole float32"):
        load_signal_f32(p)


def test_f32_nan_sample_offset(tmp_path):
    p = tmp_path / "nan.nrla"
    payload = np.array([1.0, np.nan, 2.0], dtype="<f4").tobytes()
    p.write_bytes(b"NRLA" + np.float32(100.0).tobytes() + payload)
    with pytest.raises(ValueError, match="offset 12"):
        load_signal_f32(p)
