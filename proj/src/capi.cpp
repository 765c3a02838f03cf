#include "selemb.h"

#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "selemb/bench.hpp"
#include "selemb/errors.hpp"
#include "selemb/ingest.hpp"
#include "selemb/synth.hpp"

struct se_manifest {
  selemb::ingest::Manifest value;
};

struct se_report {
  selemb::bench::RunReport value;
};

namespace {

thread_local std::string g_last_error;

se_status status_of(selemb::ErrorCode code) {
  using selemb::ErrorCode;
  switch (code) {
    case ErrorCode::invalid_argument: return SE_ERR_INVALID_ARGUMENT;
    case ErrorCode::parse: return SE_ERR_PARSE;
    case ErrorCode::io: return SE_ERR_IO;
    case ErrorCode::validation: return SE_ERR_VALIDATION;
    case ErrorCode::no_full_window: return SE_ERR_NO_FULL_WINDOW;
    case ErrorCode::leakage: return SE_ERR_LEAKAGE;
    case ErrorCode::divergence: return SE_ERR_DIVERGENCE;
    case ErrorCode::internal: return SE_ERR_INTERNAL;
  }
  return SE_ERR_INTERNAL;
}

// Runs fn inside the exception-to-status translation every entry point uses.
template <typename Fn>
se_status guarded(Fn&& fn) {
  try {
    fn();
    return SE_OK;
  } catch (const selemb::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SE_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SE_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SE_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

se_status require(bool condition, const char* message) {
  if (condition) return SE_OK;
  g_last_error = message;
  return SE_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* se_version(void) { return "0.1.0"; }

const char* se_status_name(se_status status) {
  switch (status) {
    case SE_OK: return "ok";
    case SE_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case SE_ERR_PARSE: return "parse";
    case SE_ERR_IO: return "io";
    case SE_ERR_VALIDATION: return "validation";
    case SE_ERR_NO_FULL_WINDOW: return "no_full_window";
    case SE_ERR_LEAKAGE: return "leakage";
    case SE_ERR_DIVERGENCE: return "divergence";
    case SE_ERR_INTERNAL: return "internal";
  }
  return "internal";
}

const char* se_last_error(void) { return g_last_error.c_str(); }

void se_string_free(char* s) { delete[] s; }

se_status se_manifest_open(const char* path, se_manifest** out) {
  if (se_status s = require(path && out, "se_manifest_open: null argument")) return s;
  *out = nullptr;
  return guarded([&] {
    auto handle = std::make_unique<se_manifest>();
    handle->value = selemb::ingest::load_manifest(path);
    *out = handle.release();
  });
}

void se_manifest_close(se_manifest* manifest) { delete manifest; }

int se_manifest_class_count(const se_manifest* manifest) {
  return manifest ? manifest->value.class_count() : -1;
}

int se_manifest_file_count(const se_manifest* manifest) {
  return manifest ? static_cast<int>(manifest->value.files.size()) : -1;
}

const char* se_manifest_dataset_name(const se_manifest* manifest) {
  return manifest ? manifest->value.dataset_name.c_str() : nullptr;
}

se_status se_synth_default_options(char** json_out) {
  if (se_status s = require(json_out != nullptr, "se_synth_default_options: null argument")) {
    return s;
  }
  return guarded([&] {
    *json_out = dup_string(
        selemb::synth::benchmark_options_to_json(selemb::synth::default_benchmark_options()));
  });
}

se_status se_synth_benchmark(const char* options_json, const char* out_dir,
                             char** manifest_path_out) {
  if (se_status s = require(out_dir != nullptr, "se_synth_benchmark: null out_dir")) return s;
  if (manifest_path_out) *manifest_path_out = nullptr;
  return guarded([&] {
    const std::string options_text = options_json ? options_json : "{}";
    const auto options = selemb::synth::benchmark_options_from_json(options_text);
    const auto manifest = selemb::synth::generate_benchmark(options, out_dir);
    if (manifest_path_out) {
      *manifest_path_out = dup_string((manifest.base_dir / "manifest.json").string());
    }
  });
}

se_status se_experiment_default_config(char** json_out) {
  if (se_status s = require(json_out != nullptr, "se_experiment_default_config: null argument")) {
    return s;
  }
  return guarded([&] {
    *json_out = dup_string(selemb::bench::config_to_json(selemb::bench::default_config()));
  });
}

se_status se_experiment_run(const char* config_json, se_report** out) {
  if (se_status s = require(config_json && out, "se_experiment_run: null argument")) return s;
  *out = nullptr;
  return guarded([&] {
    const auto config = selemb::bench::config_from_json(config_json);
    auto handle = std::make_unique<se_report>();
    handle->value = selemb::bench::run_experiment(config);
    *out = handle.release();
  });
}

void se_report_close(se_report* report) { delete report; }

se_status se_report_emit(const se_report* report, const char* path, const char* format) {
  if (se_status s = require(report && path && format, "se_report_emit: null argument")) return s;
  return guarded([&] {
    selemb::bench::emit_report(report->value, selemb::bench::report_format_from_string(format),
                               path);
  });
}

se_status se_report_render(const se_report* report, const char* format, char** out) {
  if (se_status s = require(report && format && out, "se_report_render: null argument")) return s;
  *out = nullptr;
  return guarded([&] {
    *out = dup_string(selemb::bench::render_report(
        report->value, selemb::bench::report_format_from_string(format)));
  });
}

se_status se_plotdata_write(const char* const* report_paths, size_t count, const char* out_path) {
  if (se_status s = require(report_paths && out_path && count > 0,
                            "se_plotdata_write: need at least one report path")) {
    return s;
  }
  return guarded([&] {
    std::vector<selemb::bench::RunReport> reports;
    for (size_t i = 0; i < count; ++i) {
      std::ifstream in(report_paths[i]);
      if (!in) {
        selemb::raise(selemb::ErrorCode::io,
                      std::string("report '") + report_paths[i] + "' cannot be opened");
      }
      std::ostringstream text;
      text << in.rdbuf();
      reports.push_back(selemb::bench::report_from_json(text.str()));
    }
    selemb::bench::emit_plot_data(reports, out_path);
  });
}

}  // extern "C"
