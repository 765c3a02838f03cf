#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "selemb/ingest.hpp"

namespace selemb::synth {

// One fault class: a periodic impulse train exciting a decaying resonance.
struct FaultSpec {
  int class_id = 0;
  double impulse_rate = 0.0;       // Hz, characteristic fault frequency
  double resonance = 0.0;          // Hz, carrier excited by each impulse
  double impulse_amplitude = 1.0;  // unitless
  double decay = 300.0;            // 1/s envelope decay
};

// How one sensor observes the shared latent signal.
struct SensorModel {
  std::string source_id;
  double gain = 1.0;
  double lowpass_coefficient = 0.0;  // one-pole smoothing, in [0, 1)
  double noise_sigma = 0.0;          // additive Gaussian, unitless
};

// Per-instance shift: amplitude scaling (optionally per class) and a noise
// multiplier.
struct DomainSpec {
  std::string domain_id;
  double amplitude_scale = 1.0;
  std::vector<double> class_amplitude_scale;  // index class_id-1; empty = all 1
  double noise_scale = 1.0;
  uint64_t seed = 0;

  double scale_for_class(int class_id) const {
    const size_t i = static_cast<size_t>(class_id - 1);
    const double per_class =
        i < class_amplitude_scale.size() ? class_amplitude_scale[i] : 1.0;
    return amplitude_scale * per_class;
  }
};

// Renders one shared latent signal (impulse train at the fault rate, carrier
// at the resonance, plus a class-independent broadband floor), then lets each
// sensor observe gain * lowpass(latent) + independent Gaussian noise. Fully
// determined by the seed.
ingest::Recording generate_recording(const FaultSpec& fault,
                                     const std::vector<SensorModel>& sensors,
                                     const DomainSpec& domain, double duration_s, double rate_hz,
                                     uint64_t seed, double broadband_floor_sigma = 0.02);

struct BenchmarkOptions {
  std::string dataset_name = "selemb-synthetic";
  std::vector<FaultSpec> classes;
  std::vector<SensorModel> sensors;
  std::vector<DomainSpec> domains;
  size_t files_per_class = 1;  // per (class, domain)
  double duration_s = 10.0;
  double rate_hz = 10240.0;
  double broadband_floor_sigma = 0.02;
  uint64_t seed = 1;
};

// The desk-scale defaults: 4 resonance-band classes over a shared impulse
// train, a full-band sensor plus a gain-compensated lowpassed one, and 3
// domains where training sits below the held-out domain's 1.5x amplitude
// and 2x noise.
BenchmarkOptions default_benchmark_options();

// Writes one CSV per (class, domain, file) plus a manifest wiring the
// metadata, then returns the loaded manifest. Deterministic per seed.
ingest::Manifest generate_benchmark(const BenchmarkOptions& options,
                                    const std::filesystem::path& out_dir);

// JSON round-trip for BenchmarkOptions; schema in docs/FORMATS.md.
BenchmarkOptions benchmark_options_from_json(const std::string& json_text);
std::string benchmark_options_to_json(const BenchmarkOptions& options);

}  // namespace selemb::synth
