#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "ega/eegb.hpp"
#include "ega/errors.hpp"
#include "ega/signal.hpp"

using namespace ega::signal;

namespace {

std::vector<double> tone(double f, double fs, std::size_t n, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * f * i / fs + phase);
  return x;
}

double rms(std::span<const double> x, std::size_t skip = 0) {
  double s = 0.0;
  for (std::size_t i = skip; i < x.size() - skip; ++i) s += x[i] * x[i];
  return std::sqrt(s / static_cast<double>(x.size() - 2 * skip));
}

double db(double ratio) { return 20.0 * std::log10(ratio); }

// Naive DFT magnitude at bin k.
double dft_mag(std::span<const double> x, std::size_t k) {
  std::complex<double> acc = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * k * i / n);
  return std::abs(acc);
}

std::size_t peak_bin(std::span<const double> x) {
  std::size_t best = 1;
  double best_mag = 0.0;
  for (std::size_t k = 1; k < x.size() / 2; ++k) {
    const double m = dft_mag(x, k);
    if (m > best_mag) best_mag = m, best = k;
  }
  return best;
}

Recording single(std::vector<double> x, double fs) {
  Recording r;
  r.channel_names = {"Cz"};
  r.sample_rate_hz = fs;
  r.n_samples = x.size();
  r.samples = std::move(x);
  return r;
}

Recording canonical(std::size_t n, double fs, std::vector<std::string> extra = {}) {
  Recording r;
  r.channel_names = canonical_channel_names();
  r.channel_names.insert(r.channel_names.end(), extra.begin(), extra.end());
  r.sample_rate_hz = fs;
  r.n_samples = n;
  r.samples.resize(r.channel_names.size() * n);
  for (std::size_t i = 0; i < r.samples.size(); ++i) r.samples[i] = static_cast<double>(i % 97) - 48.0;
  return r;
}

}  // namespace

TEST(Resample, EqualRatesAreBitwiseCopy) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d;
  std::vector<double> x(1000);
  for (auto& v : x) v = d(rng);
  const auto out = resample(single(x, 256.0), 256.0);
  ASSERT_EQ(out.samples.size(), x.size());
  EXPECT_EQ(std::memcmp(out.samples.data(), x.data(), x.size() * sizeof(double)), 0);
}

TEST(Resample, LengthArithmetic) {
  const auto out = resample(single(std::vector<double>(5000, 1.0), 500.0), 256.0);
  EXPECT_EQ(out.n_samples, 2560u);
  EXPECT_EQ(out.sample_rate_hz, 256.0);
}

TEST(Resample, TonePeakAndAmplitudePreserved) {
  const auto y = resample_channel(tone(10.0, 500.0, 5000), 500.0, 256.0);
  ASSERT_EQ(y.size(), 2560u);
  // 10 s of signal: bin spacing 0.1 Hz, 10 Hz sits on bin 100.
  EXPECT_EQ(peak_bin(y), 100u);
  EXPECT_NEAR(rms(y, 100) * std::sqrt(2.0), 1.0, 0.01);
}

TEST(Resample, RandomRatesKeepTonesInCommonPassband) {
  std::mt19937_64 rng(7);
  const double rates[] = {128.0, 200.0, 250.0, 256.0, 300.0, 500.0, 512.0, 1000.0};
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<int> pick(0, 7);
    double src = rates[pick(rng)], dst = rates[pick(rng)];
    if (src == dst) dst = src == 256.0 ? 500.0 : 256.0;
    const double nyq = 0.5 * std::min(src, dst);
    // Integer-Hz tone in the lower 70% of the common band, 4 s of signal.
    std::uniform_int_distribution<int> fpick(1, static_cast<int>(0.7 * nyq));
    const double f = fpick(rng);
    const auto y = resample_channel(tone(f, src, static_cast<std::size_t>(4 * src)), src, dst);
    const std::size_t expect_bin = static_cast<std::size_t>(f * 4);
    const auto got = static_cast<double>(peak_bin(y));
    EXPECT_LE(std::abs(got - static_cast<double>(expect_bin)), 1.0) << src << "->" << dst << " f=" << f;
  }
}

TEST(Resample, EmptyRecordingIsError) {
  Recording r;
  r.channel_names = {"Cz"};
  r.sample_rate_hz = 256.0;
  EXPECT_THROW(resample(r, 128.0), std::invalid_argument);
}

TEST(Notch, AttenuatesMainsTone) {
  const auto y = filtfilt(design_notch(50.0, 30.0, 256.0), tone(50.0, 256.0, 256 * 20));
  const auto x = tone(50.0, 256.0, 256 * 20);
  EXPECT_LE(rms(y) / rms(x), 0.0316);
}

TEST(Notch, PassesTenHertz) {
  const auto x = tone(10.0, 256.0, 256 * 20);
  const auto y = notch_filter(single(x, 256.0)).samples;
  EXPECT_LE(std::abs(db(rms(y) / rms(x))), 1.0);
}

TEST(Notch, ZeroInZeroOut) {
  const auto y = notch_filter(single(std::vector<double>(2048, 0.0), 256.0)).samples;
  for (double v : y) EXPECT_EQ(v, 0.0);
}

TEST(Notch, FrequencyAtOrAboveNyquistIsError) {
  EXPECT_THROW(design_notch(128.0, 30.0, 256.0), ega::ConfigError);
  EXPECT_THROW(notch_filter(single(std::vector<double>(64, 1.0), 90.0)), ega::ConfigError);
}

TEST(Notch, FrequencyResponseAtCenterIsDeep) {
  EXPECT_LT(std::abs(frequency_response(design_notch(50.0, 30.0, 256.0), 50.0, 256.0)), 1e-9);
}

TEST(Bandpass, PassesTenHertz) {
  const auto x = tone(10.0, 256.0, 256 * 30);
  const auto y = bandpass_filter(single(x, 256.0)).samples;
  EXPECT_LE(std::abs(db(rms(y) / rms(x))), 1.0);
}

TEST(Bandpass, AttenuatesOutOfBandTone) {
  const auto x = tone(120.0, 256.0, 256 * 30);
  const auto y = bandpass_filter(single(x, 256.0)).samples;
  EXPECT_LE(db(rms(y) / rms(x)), -20.0);
}

TEST(Bandpass, ZeroInZeroOut) {
  const auto y = bandpass_filter(single(std::vector<double>(4096, 0.0), 256.0)).samples;
  for (double v : y) EXPECT_EQ(v, 0.0);
}

TEST(Bandpass, InvalidBandIsError) {
  EXPECT_THROW(design_butter_bandpass(10.0, 5.0, 4, 256.0), ega::ConfigError);
  EXPECT_THROW(design_butter_bandpass(0.0, 50.0, 4, 256.0), ega::ConfigError);
  EXPECT_THROW(design_butter_bandpass(1.0, 128.0, 4, 256.0), ega::ConfigError);
}

TEST(Bandpass, ButterworthShape) {
  const auto sos = design_butter_bandpass(0.1, 100.0, 4, 256.0);
  EXPECT_EQ(sos.size(), 4u);
  EXPECT_NEAR(std::abs(frequency_response(sos, 10.0, 256.0)), 1.0, 1e-3);
  // Band edges sit at -3 dB for a Butterworth design.
  EXPECT_NEAR(db(std::abs(frequency_response(sos, 100.0, 256.0))), -3.01, 0.05);
  EXPECT_NEAR(db(std::abs(frequency_response(sos, 0.1, 256.0))), -3.01, 0.05);
}

TEST(Filters, ZeroPhaseOnInBandTone) {
  const auto x = tone(10.0, 256.0, 256 * 10, 1.0, 0.3);
  for (const auto& sos : {design_notch(50.0, 30.0, 256.0), design_butter_bandpass(0.1, 100.0, 4, 256.0)}) {
    const auto y = filtfilt(sos, x);
    int best_lag = 0;
    double best = -1e300;
    for (int lag = -12; lag <= 12; ++lag) {
      double s = 0.0;
      for (std::size_t i = 300; i + 300 < x.size(); ++i) s += x[i] * y[static_cast<std::size_t>(static_cast<int>(i) + lag)];
      if (s > best) best = s, best_lag = lag;
    }
    EXPECT_EQ(best_lag, 0);
  }
}

TEST(Select, DropsExtrasAndReorders) {
  auto rec = canonical(16, 256.0, {"A1", "A2"});
  std::swap(rec.channel_names[0], rec.channel_names[20]);  // A2 first, Fp1 last
  const auto out = select_channels(rec);
  ASSERT_EQ(out.n_channels(), 19u);
  EXPECT_EQ(out.channel_names, canonical_channel_names());
  // Fp1 data came from the last row of the input.
  EXPECT_EQ(std::vector<double>(out.channel(0).begin(), out.channel(0).end()),
            std::vector<double>(rec.channel(20).begin(), rec.channel(20).end()));
}

TEST(Select, CanonicalInputUnchangedAndIdempotent) {
  const auto rec = canonical(32, 256.0);
  const auto once = select_channels(rec);
  EXPECT_EQ(once.samples, rec.samples);
  EXPECT_EQ(once.channel_names, rec.channel_names);
  const auto twice = select_channels(once);
  EXPECT_EQ(twice.samples, once.samples);
}

TEST(Select, CaseInsensitive) {
  auto rec = canonical(8, 256.0);
  for (auto& n : rec.channel_names)
    for (auto& ch : n) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  const auto out = select_channels(rec);
  EXPECT_EQ(out.channel_names, canonical_channel_names());
}

TEST(Select, MissingChannelNamed) {
  auto rec = canonical(8, 256.0);
  rec.channel_names[14] = "X1";  // Pz
  try {
    select_channels(rec);
    FAIL() << "expected an error";
  } catch (const ega::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("Pz"), std::string::npos) << e.what();
  }
}

TEST(Segment, FiveMinutesGivesFiveWindows) {
  const auto segs = segment(canonical(300 * 256, 256.0));
  ASSERT_EQ(segs.size(), 5u);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    EXPECT_EQ(segs[i].length, 15360u);
    EXPECT_EQ(segs[i].n_channels, 19u);
    EXPECT_EQ(segs[i].offset, i * 15360u);
  }
}

TEST(Segment, ShortTailRule) {
  const auto kept = segment(canonical(59 * 256, 256.0));
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].length, 59u * 256u);
  EXPECT_TRUE(segment(canonical(20 * 256, 256.0)).empty());
}

TEST(Segment, Conservation) {
  for (std::size_t n : {1u, 100u, 7680u, 15359u, 15360u, 40000u, 76800u, 80000u}) {
    const auto rec = canonical(n, 256.0);
    const auto segs = segment(rec);
    std::size_t used = 0;
    for (const auto& s : segs) {
      EXPECT_EQ(s.offset, used);
      used += s.length;
      for (std::size_t c = 0; c < 19; ++c)
        EXPECT_EQ(std::memcmp(s.channel(c).data(), rec.channel(c).data() + s.offset, s.length * sizeof(double)), 0);
    }
    const std::size_t tail = n - used;
    EXPECT_LT(tail, 15360u);
    if (tail > 0) {
      EXPECT_LT(static_cast<double>(tail), 0.5 * 15360.0);
    }
  }
}

TEST(Preprocess, FullChainShapes) {
  auto rec = canonical(500 * 130, 500.0, {"A1"});
  rec.label = 1;
  rec.subject_id = "s01";
  const auto segs = preprocess(rec);
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0].length, 15360u);
  EXPECT_EQ(segs[0].label, 1);
  EXPECT_EQ(segs[0].subject_id, "s01");
}

TEST(Eegb, RoundTrip) {
  auto rec = canonical(100, 256.0);
  rec.label = 1;
  rec.subject_id = "sub-7";
  const auto path = std::filesystem::temp_directory_path() / "ega_test_roundtrip.eegb";
  ega::io::write_eegb(path, rec);
  const auto back = ega::io::read_eegb(path);
  EXPECT_EQ(back.channel_names, rec.channel_names);
  EXPECT_EQ(back.sample_rate_hz, 256.0);
  EXPECT_EQ(back.n_samples, 100u);
  EXPECT_EQ(back.label, 1);
  EXPECT_EQ(back.subject_id, "sub-7");
  EXPECT_EQ(back.samples, rec.samples);  // integers survive float32
  std::filesystem::remove(path);
}

TEST(Eegb, RejectsBadMagicAndTruncation) {
  const auto path = std::filesystem::temp_directory_path() / "ega_test_bad.eegb";
  {
    std::ofstream f(path, std::ios::binary);
    f << "EEGX\x02\0\0\0{}";
  }
  EXPECT_THROW(ega::io::read_eegb(path), ega::FormatError);
  ega::io::write_eegb(path, canonical(10, 256.0));
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_THROW(ega::io::read_eegb(path), ega::FormatError);
  std::filesystem::remove(path);
}

TEST(Csv, ImportInfersRate) {
  const auto path = std::filesystem::temp_directory_path() / "ega_test_fixture.csv";
  {
    std::ofstream f(path);
    f << "time,Fp1,Fp2\n0.0,1,2\n0.004,3,4\n0.008,5,6\n";
  }
  const auto rec = ega::io::read_csv(path);
  EXPECT_EQ(rec.channel_names, (std::vector<std::string>{"Fp1", "Fp2"}));
  EXPECT_NEAR(rec.sample_rate_hz, 250.0, 1e-9);
  EXPECT_EQ(rec.samples, (std::vector<double>{1, 3, 5, 2, 4, 6}));
  std::filesystem::remove(path);
}

TEST(Filters, EdgeModesAgreeInInterior) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d;
  std::vector<double> x(256 * 40);
  for (auto& v : x) v = d(rng);
  const auto sos = design_notch(50.0, 30.0, 256.0);
  const auto a = filtfilt(sos, x, EdgeMethod::predict);
  const auto b = filtfilt(sos, x, EdgeMethod::reflect);
  for (std::size_t i = 2000; i + 2000 < x.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}
