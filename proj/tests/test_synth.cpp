#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "selemb/errors.hpp"
#include "selemb/loaders.hpp"
#include "selemb/synth.hpp"

using namespace selemb;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("selemb-synth-" + std::to_string(std::random_device{}() % 1000000));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

synth::FaultSpec fault_90hz() { return {1, 90.0, 1200.0, 1.0, 300.0}; }

// mean one-sided magnitude spectrum over all segments of one stream
std::vector<double> averaged_spectrum(const signal::SourceStream& stream, size_t length) {
  const auto segments = signal::segment_stream(stream, length);
  std::vector<double> mean(length / 2, 0.0);
  for (const auto& seg : segments) {
    const auto spec = signal::fft_magnitude(seg);
    for (size_t i = 0; i < mean.size(); ++i) mean[i] += spec.bins[i];
  }
  for (auto& v : mean) v /= static_cast<double>(segments.size());
  return mean;
}

size_t argmax(const std::vector<double>& v) {
  size_t best = 0;
  for (size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("degenerate sensors observe identical streams") {
  const std::vector<synth::SensorModel> sensors = {{"a", 1.0, 0.0, 0.0}, {"b", 1.0, 0.0, 0.0}};
  const synth::DomainSpec domain{"D0", 1.0, {}, 1.0, 0};
  const auto rec = synth::generate_recording(fault_90hz(), sensors, domain, 0.5, 10240.0, 7);
  REQUIRE(rec.streams.size() == 2);
  CHECK(rec.streams[0].samples == rec.streams[1].samples);
}

TEST_CASE("zero impulse amplitude leaves pure noise") {
  synth::FaultSpec silent = fault_90hz();
  silent.impulse_amplitude = 0.0;
  const std::vector<synth::SensorModel> sensors = {{"a", 1.0, 0.0, 0.1}, {"b", 1.0, 0.0, 0.1}};
  const synth::DomainSpec domain{"D0", 1.0, {}, 1.0, 0};
  const auto rec =
      synth::generate_recording(silent, sensors, domain, 0.5, 10240.0, 8, /*floor=*/0.0);
  // no deterministic structure: the two independent noise streams differ and
  // the sample mean sits near zero
  CHECK(rec.streams[0].samples != rec.streams[1].samples);
  double mean = 0.0;
  for (double v : rec.streams[0].samples) mean += v;
  mean /= static_cast<double>(rec.streams[0].samples.size());
  CHECK(std::abs(mean) < 0.01);
}

TEST_CASE("90 Hz impulse train at 10240 Hz peaks at multiples of 9 bins") {
  const std::vector<synth::SensorModel> sensors = {{"a", 1.0, 0.0, 0.02}, {"b", 1.0, 0.4, 0.02}};
  const synth::DomainSpec domain{"D0", 1.0, {}, 1.0, 0};
  // 0.5 s at 10240 Hz = 25 segments of 1024 >= 20
  const auto rec = synth::generate_recording(fault_90hz(), sensors, domain, 2.5, 10240.0, 9);
  CHECK(signal::segment_count(rec.streams[0], 1024) >= 20);
  for (const auto& stream : rec.streams) {
    const auto mean = averaged_spectrum(stream, 1024);
    // bins[k-1] = |X_k|: the harmonic at 90*h Hz lands at k = 9h
    const size_t top = argmax(mean) + 1;
    CHECK(top % 9 == 0);
    // every strong local peak is a multiple of 9
    const double top_value = mean[top - 1];
    for (size_t k = 2; k + 1 <= mean.size(); ++k) {
      const double v = mean[k - 1];
      if (v > 0.35 * top_value && v > mean[k - 2] && v > mean[k]) {
        CHECK(k % 9 == 0);
      }
    }
  }
}

TEST_CASE("cross-sensor top-1 peak bin is identical at low noise") {
  const std::vector<synth::SensorModel> sensors = {
      {"a", 1.0, 0.0, 0.01}, {"b", 0.7, 0.5, 0.01}, {"c", 1.3, 0.2, 0.01}};
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    const synth::DomainSpec domain{"D0", 1.0, {}, 1.0, seed};
    const auto rec = synth::generate_recording(fault_90hz(), sensors, domain, 2.0, 10240.0, seed);
    std::vector<size_t> tops;
    for (const auto& stream : rec.streams) {
      tops.push_back(argmax(averaged_spectrum(stream, 1024)));
    }
    CHECK(tops[0] == tops[1]);
    CHECK(tops[0] == tops[2]);
  }
}

TEST_CASE("domain amplitude scaling moves magnitudes linearly, bins stay put") {
  const std::vector<synth::SensorModel> sensors = {{"a", 1.0, 0.1, 0.0}, {"b", 1.0, 0.3, 0.0}};
  const synth::DomainSpec base{"D0", 1.0, {}, 1.0, 0};
  const synth::DomainSpec loud{"D1", 2.5, {}, 1.0, 0};
  const auto rec_a =
      synth::generate_recording(fault_90hz(), sensors, base, 0.5, 10240.0, 11, 0.0);
  const auto rec_b =
      synth::generate_recording(fault_90hz(), sensors, loud, 0.5, 10240.0, 11, 0.0);
  for (size_t s = 0; s < 2; ++s) {
    const auto ma = averaged_spectrum(rec_a.streams[s], 1024);
    const auto mb = averaged_spectrum(rec_b.streams[s], 1024);
    CHECK(argmax(ma) == argmax(mb));
    const size_t peak = argmax(ma);
    CHECK(mb[peak] == doctest::Approx(2.5 * ma[peak]).epsilon(1e-9));
  }
}

TEST_CASE("generation is pure given specs and seed") {
  const auto opts = synth::default_benchmark_options();
  const auto a = synth::generate_recording(opts.classes[2], opts.sensors, opts.domains[1], 0.4,
                                           opts.rate_hz, 42);
  const auto b = synth::generate_recording(opts.classes[2], opts.sensors, opts.domains[1], 0.4,
                                           opts.rate_hz, 42);
  for (size_t s = 0; s < a.streams.size(); ++s) {
    CHECK(a.streams[s].samples == b.streams[s].samples);
  }
  const auto c = synth::generate_recording(opts.classes[2], opts.sensors, opts.domains[1], 0.4,
                                           opts.rate_hz, 43);
  CHECK(a.streams[0].samples != c.streams[0].samples);
}

TEST_CASE("duration below two segments is a precondition error") {
  const std::vector<synth::SensorModel> sensors = {{"a", 1.0, 0.0, 0.0}, {"b", 1.0, 0.0, 0.0}};
  const synth::DomainSpec domain{"D0", 1.0, {}, 1.0, 0};
  CHECK_THROWS_AS(
      synth::generate_recording(fault_90hz(), sensors, domain, 0.1, 10240.0, 1), Error);
}

TEST_CASE("generate_benchmark writes the full file grid and a loadable manifest") {
  TempDir dir;
  auto opts = synth::default_benchmark_options();
  opts.duration_s = 0.4;
  opts.files_per_class = 2;
  const auto manifest = synth::generate_benchmark(opts, dir.path);
  CHECK(manifest.class_count() == 4);
  CHECK(manifest.files.size() == 4 * 3 * 2);  // classes x domains x files
  size_t csv_count = 0;
  for (const auto& entry : fs::directory_iterator(dir.path)) {
    if (entry.path().extension() == ".csv") ++csv_count;
  }
  CHECK(csv_count == 24);

  // the CSVs load back as valid simultaneous recordings
  const auto recs = ingest::read_all(manifest);
  CHECK(recs.size() == 24);
  for (const auto& rec : recs) {
    CHECK(rec.streams.size() == 2);
    CHECK(rec.length() == static_cast<size_t>(0.4 * 10240.0));
  }
}

TEST_CASE("same seed produces byte-identical benchmark files") {
  TempDir a, b;
  auto opts = synth::default_benchmark_options();
  opts.duration_s = 0.3;
  synth::generate_benchmark(opts, a.path);
  synth::generate_benchmark(opts, b.path);
  size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a.path)) {
    const auto other = b.path / entry.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(slurp(entry.path()) == slurp(other));
    ++compared;
  }
  CHECK(compared == 13);  // 12 CSVs + manifest
}

TEST_CASE("single-domain benchmark is rejected") {
  TempDir dir;
  auto opts = synth::default_benchmark_options();
  opts.domains.resize(1);
  CHECK_THROWS_AS(synth::generate_benchmark(opts, dir.path), Error);
}

TEST_CASE("options json round-trips") {
  const auto opts = synth::default_benchmark_options();
  const auto text = synth::benchmark_options_to_json(opts);
  const auto back = synth::benchmark_options_from_json(text);
  CHECK(back.classes.size() == opts.classes.size());
  CHECK(back.sensors.size() == opts.sensors.size());
  CHECK(back.domains.size() == opts.domains.size());
  CHECK(back.domains[2].noise_scale == opts.domains[2].noise_scale);
  CHECK(back.sensors[1].lowpass_coefficient == opts.sensors[1].lowpass_coefficient);
  CHECK(back.classes[3].resonance == opts.classes[3].resonance);

  const auto tweaked = synth::benchmark_options_from_json(R"({"duration_s": 1.5, "seed": 99})");
  CHECK(tweaked.duration_s == 1.5);
  CHECK(tweaked.seed == 99);
  CHECK(tweaked.classes.size() == 4);  // defaults preserved
}
