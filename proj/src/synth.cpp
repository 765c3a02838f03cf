#include "selemb/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "selemb/errors.hpp"
#include "selemb/rng.hpp"

namespace selemb::synth {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void validate(const FaultSpec& fault, double rate_hz) {
  if (!(fault.impulse_rate > 0.0) || fault.impulse_rate >= rate_hz / 2.0) {
    raise(ErrorCode::invalid_argument, "class " + std::to_string(fault.class_id) +
                                           ": impulse rate must lie in (0, rate/2)");
  }
  if (!(fault.resonance > 0.0) || fault.resonance >= rate_hz / 2.0) {
    raise(ErrorCode::invalid_argument, "class " + std::to_string(fault.class_id) +
                                           ": resonance must lie in (0, rate/2)");
  }
  if (fault.impulse_amplitude < 0.0) {
    raise(ErrorCode::invalid_argument, "impulse amplitude must be >= 0");
  }
  if (!(fault.decay > 0.0)) {
    raise(ErrorCode::invalid_argument, "decay must be positive");
  }
}

void validate(const SensorModel& sensor) {
  if (!(sensor.gain > 0.0)) {
    raise(ErrorCode::invalid_argument, "sensor '" + sensor.source_id + "': gain must be positive");
  }
  if (sensor.lowpass_coefficient < 0.0 || sensor.lowpass_coefficient >= 1.0) {
    raise(ErrorCode::invalid_argument,
          "sensor '" + sensor.source_id + "': lowpass coefficient must lie in [0, 1)");
  }
  if (sensor.noise_sigma < 0.0) {
    raise(ErrorCode::invalid_argument, "sensor '" + sensor.source_id + "': noise sigma must be >= 0");
  }
}

// Impulse train sampled from continuous time: impulse k fires at t = k/rate_hz
// of the fault, each contributing amp * exp(-decay dt) * sin(2 pi f dt).
void render_latent(std::vector<double>& latent, const FaultSpec& fault, double amplitude,
                   double rate_hz, Rng& floor_rng, double floor_sigma) {
  const size_t n = latent.size();
  const double dt = 1.0 / rate_hz;
  if (amplitude > 0.0) {
    // contributions below this envelope are dropped
    const double support_s = std::log(1e8) / fault.decay;
    const size_t support_samples = static_cast<size_t>(support_s * rate_hz) + 1;
    const double period_s = 1.0 / fault.impulse_rate;
    const size_t impulses = static_cast<size_t>(static_cast<double>(n) * dt / period_s) + 1;
    for (size_t k = 0; k < impulses; ++k) {
      const double onset = static_cast<double>(k) * period_s;
      const size_t first = static_cast<size_t>(std::ceil(onset * rate_hz));
      const size_t last = std::min(n, first + support_samples);
      for (size_t i = first; i < last; ++i) {
        const double rel = static_cast<double>(i) * dt - onset;
        latent[i] += amplitude * std::exp(-fault.decay * rel) * std::sin(kTwoPi * fault.resonance * rel);
      }
    }
  }
  if (floor_sigma > 0.0) {
    for (size_t i = 0; i < n; ++i) latent[i] += floor_sigma * floor_rng.next_gaussian();
  }
}

std::vector<double> observe(const std::vector<double>& latent, const SensorModel& sensor,
                            double noise_scale, Rng& noise_rng) {
  std::vector<double> out(latent.size());
  const double a = sensor.lowpass_coefficient;
  const double sigma = sensor.noise_sigma * noise_scale;
  double y = 0.0;
  for (size_t i = 0; i < latent.size(); ++i) {
    y = a == 0.0 ? latent[i] : (1.0 - a) * latent[i] + a * y;
    out[i] = sensor.gain * y;
    if (sigma > 0.0) out[i] += sigma * noise_rng.next_gaussian();
  }
  return out;
}

}  // namespace

ingest::Recording generate_recording(const FaultSpec& fault,
                                     const std::vector<SensorModel>& sensors,
                                     const DomainSpec& domain, double duration_s, double rate_hz,
                                     uint64_t seed, double broadband_floor_sigma) {
  if (!(rate_hz > 0.0) || !(duration_s > 0.0)) {
    raise(ErrorCode::invalid_argument, "duration and rate must be positive");
  }
  validate(fault, rate_hz);
  if (sensors.empty()) {
    raise(ErrorCode::invalid_argument, "at least one sensor required");
  }
  for (const auto& s : sensors) validate(s);
  const size_t n = static_cast<size_t>(duration_s * rate_hz);
  if (n < 2 * signal::kDefaultSegmentLength) {
    raise(ErrorCode::invalid_argument,
          "duration * rate must cover at least two segments, got " + std::to_string(n) + " samples");
  }

  std::vector<double> latent(n, 0.0);
  Rng floor_rng(derive_seed(seed, "latent-floor"));
  render_latent(latent, fault, fault.impulse_amplitude * domain.scale_for_class(fault.class_id),
                rate_hz, floor_rng, broadband_floor_sigma);

  ingest::Recording rec;
  rec.class_id = fault.class_id;
  rec.domain_id = domain.domain_id;
  rec.streams.resize(sensors.size());
  for (size_t s = 0; s < sensors.size(); ++s) {
    Rng noise_rng(derive_seed(seed, "sensor-noise", s));
    auto& stream = rec.streams[s];
    stream.samples = observe(latent, sensors[s], domain.noise_scale, noise_rng);
    stream.rate = rate_hz;
    stream.source_id = sensors[s].source_id;
    stream.class_id = fault.class_id;
    stream.domain_id = domain.domain_id;
  }
  return rec;
}

BenchmarkOptions default_benchmark_options() {
  BenchmarkOptions opt;
  // Four mid-band resonances at matched amplitude; every class rides the
  // same 60 Hz impulse train so the resonance position is the class cue.
  opt.classes = {
      {1, 60.0, 900.0, 0.5, 300.0},
      {2, 60.0, 1300.0, 0.5, 300.0},
      {3, 60.0, 1700.0, 0.5, 300.0},
      {4, 60.0, 2100.0, 0.5, 300.0},
  };
  // s0 hears the full band; s1 is lowpassed with its gain raised so the two
  // views sit at comparable SNR but different spectral tilt and level.
  opt.sensors = {
      {"s0", 1.0, 0.0, 0.25},
      {"s1", 2.2, 0.7, 0.25},
  };
  // Training domains sit below the held-out domain on both axes, so models
  // must extrapolate to D2's louder, noisier instance.
  opt.domains = {
      {"D0", 0.85, {}, 0.9, 11},
      {"D1", 1.0, {}, 1.2, 12},
      {"D2", 1.5, {}, 2.0, 13},
  };
  return opt;
}

ingest::Manifest generate_benchmark(const BenchmarkOptions& options, const fs::path& out_dir) {
  if (options.classes.size() < 2) {
    raise(ErrorCode::invalid_argument, "benchmark needs at least 2 classes");
  }
  if (options.sensors.size() < 2) {
    raise(ErrorCode::invalid_argument, "benchmark needs at least 2 sensors");
  }
  if (options.domains.size() < 2) {
    raise(ErrorCode::invalid_argument,
          "benchmark needs at least 2 domains (cross-domain evaluation impossible otherwise)");
  }
  if (options.files_per_class < 1) {
    raise(ErrorCode::invalid_argument, "files per class must be >= 1");
  }
  for (size_t i = 0; i < options.classes.size(); ++i) {
    if (options.classes[i].class_id != static_cast<int>(i) + 1) {
      raise(ErrorCode::invalid_argument, "class ids must be consecutive from 1");
    }
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) {
    raise(ErrorCode::io, "output directory '" + out_dir.string() + "' cannot be created");
  }

  ordered_json manifest;
  manifest["dataset_name"] = options.dataset_name;
  manifest["rate"] = options.rate_hz;
  manifest["classes"] = json::array();
  for (const auto& c : options.classes) {
    manifest["classes"].push_back({{"id", c.class_id}, {"label", "class" + std::to_string(c.class_id)}});
  }
  manifest["files"] = json::array();

  char buffer[32];
  for (size_t d = 0; d < options.domains.size(); ++d) {
    const auto& domain = options.domains[d];
    for (const auto& fault : options.classes) {
      for (size_t f = 0; f < options.files_per_class; ++f) {
        const uint64_t file_seed =
            derive_seed(mix_seed(options.seed, domain.seed), "file",
                        (d << 20) ^ (static_cast<uint64_t>(fault.class_id) << 10) ^ f);
        const auto rec = generate_recording(fault, options.sensors, domain, options.duration_s,
                                            options.rate_hz, file_seed,
                                            options.broadband_floor_sigma);

        const std::string name = domain.domain_id + "_c" + std::to_string(fault.class_id) + "_f" +
                                 std::to_string(f) + ".csv";
        const fs::path csv_path = out_dir / name;
        std::ofstream csv(csv_path, std::ios::trunc);
        if (!csv) {
          raise(ErrorCode::io, "cannot write '" + csv_path.string() + "'");
        }
        for (size_t s = 0; s < rec.streams.size(); ++s) {
          if (s) csv << ',';
          csv << rec.streams[s].source_id;
        }
        csv << '\n';
        const size_t n = rec.length();
        for (size_t i = 0; i < n; ++i) {
          for (size_t s = 0; s < rec.streams.size(); ++s) {
            if (s) csv << ',';
            std::snprintf(buffer, sizeof(buffer), "%.17g", rec.streams[s].samples[i]);
            csv << buffer;
          }
          csv << '\n';
        }
        if (!csv) {
          raise(ErrorCode::io, "write failed for '" + csv_path.string() + "'");
        }

        ordered_json file_entry;
        file_entry["path"] = name;
        file_entry["class"] = fault.class_id;
        file_entry["domain"] = domain.domain_id;
        file_entry["sources"] = json::array();
        for (const auto& sensor : options.sensors) {
          file_entry["sources"].push_back(
              {{"column", sensor.source_id}, {"source", sensor.source_id}});
        }
        manifest["files"].push_back(file_entry);
      }
    }
  }

  const fs::path manifest_path = out_dir / "manifest.json";
  std::ofstream mf(manifest_path, std::ios::trunc);
  if (!mf) {
    raise(ErrorCode::io, "cannot write '" + manifest_path.string() + "'");
  }
  mf << manifest.dump(2) << '\n';
  mf.close();
  return ingest::load_manifest(manifest_path);
}

// ---- options json ----------------------------------------------------------

BenchmarkOptions benchmark_options_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    raise(ErrorCode::parse, std::string("benchmark options: ") + e.what());
  }
  BenchmarkOptions opt = default_benchmark_options();
  try {
    if (doc.contains("dataset_name")) opt.dataset_name = doc["dataset_name"].get<std::string>();
    if (doc.contains("files_per_class")) opt.files_per_class = doc["files_per_class"].get<size_t>();
    if (doc.contains("duration_s")) opt.duration_s = doc["duration_s"].get<double>();
    if (doc.contains("rate_hz")) opt.rate_hz = doc["rate_hz"].get<double>();
    if (doc.contains("seed")) opt.seed = doc["seed"].get<uint64_t>();
    if (doc.contains("broadband_floor_sigma")) {
      opt.broadband_floor_sigma = doc["broadband_floor_sigma"].get<double>();
    }
    if (doc.contains("classes")) {
      opt.classes.clear();
      for (const auto& c : doc["classes"]) {
        FaultSpec f;
        f.class_id = c.at("id").get<int>();
        f.impulse_rate = c.at("impulse_rate").get<double>();
        f.resonance = c.at("resonance").get<double>();
        if (c.contains("amplitude")) f.impulse_amplitude = c["amplitude"].get<double>();
        if (c.contains("decay")) f.decay = c["decay"].get<double>();
        opt.classes.push_back(f);
      }
    }
    if (doc.contains("sensors")) {
      opt.sensors.clear();
      for (const auto& s : doc["sensors"]) {
        SensorModel m;
        m.source_id = s.at("id").get<std::string>();
        if (s.contains("gain")) m.gain = s["gain"].get<double>();
        if (s.contains("lowpass")) m.lowpass_coefficient = s["lowpass"].get<double>();
        if (s.contains("noise_sigma")) m.noise_sigma = s["noise_sigma"].get<double>();
        opt.sensors.push_back(m);
      }
    }
    if (doc.contains("domains")) {
      opt.domains.clear();
      for (const auto& d : doc["domains"]) {
        DomainSpec ds;
        ds.domain_id = d.at("id").get<std::string>();
        if (d.contains("amplitude_scale")) ds.amplitude_scale = d["amplitude_scale"].get<double>();
        if (d.contains("class_amplitude_scale")) {
          ds.class_amplitude_scale = d["class_amplitude_scale"].get<std::vector<double>>();
        }
        if (d.contains("noise_scale")) ds.noise_scale = d["noise_scale"].get<double>();
        if (d.contains("seed")) ds.seed = d["seed"].get<uint64_t>();
        opt.domains.push_back(ds);
      }
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::parse, std::string("benchmark options: ") + e.what());
  }
  return opt;
}

std::string benchmark_options_to_json(const BenchmarkOptions& opt) {
  ordered_json doc;
  doc["dataset_name"] = opt.dataset_name;
  doc["files_per_class"] = opt.files_per_class;
  doc["duration_s"] = opt.duration_s;
  doc["rate_hz"] = opt.rate_hz;
  doc["broadband_floor_sigma"] = opt.broadband_floor_sigma;
  doc["seed"] = opt.seed;
  doc["classes"] = json::array();
  for (const auto& c : opt.classes) {
    doc["classes"].push_back({{"id", c.class_id},
                              {"impulse_rate", c.impulse_rate},
                              {"resonance", c.resonance},
                              {"amplitude", c.impulse_amplitude},
                              {"decay", c.decay}});
  }
  doc["sensors"] = json::array();
  for (const auto& s : opt.sensors) {
    doc["sensors"].push_back({{"id", s.source_id},
                              {"gain", s.gain},
                              {"lowpass", s.lowpass_coefficient},
                              {"noise_sigma", s.noise_sigma}});
  }
  doc["domains"] = json::array();
  for (const auto& d : opt.domains) {
    ordered_json dd;
    dd["id"] = d.domain_id;
    dd["amplitude_scale"] = d.amplitude_scale;
    if (!d.class_amplitude_scale.empty()) dd["class_amplitude_scale"] = d.class_amplitude_scale;
    dd["noise_scale"] = d.noise_scale;
    dd["seed"] = d.seed;
    doc["domains"].push_back(dd);
  }
  return doc.dump(2);
}

}  // namespace selemb::synth
