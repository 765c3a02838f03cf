#include "selemb/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "selemb/errors.hpp"
#include "selemb/rng.hpp"

namespace selemb::bench {

namespace fs = std::filesystem;
using loaders::Dataset;
using nlohmann::json;
using nlohmann::ordered_json;

double StrategyResult::accuracy_mean() const {
  if (run_accuracies.empty()) return 0.0;
  return std::accumulate(run_accuracies.begin(), run_accuracies.end(), 0.0) /
         static_cast<double>(run_accuracies.size());
}

double StrategyResult::accuracy_std() const {
  if (run_accuracies.empty()) return 0.0;
  const double mean = accuracy_mean();
  double ss = 0.0;
  for (double a : run_accuracies) ss += (a - mean) * (a - mean);
  return std::sqrt(ss / static_cast<double>(run_accuracies.size()));
}

double StrategyResult::train_time_mean_s() const {
  if (run_train_times_s.empty()) return 0.0;
  return std::accumulate(run_train_times_s.begin(), run_train_times_s.end(), 0.0) /
         static_cast<double>(run_train_times_s.size());
}

void ExperimentConfig::validate() const {
  if (manifest_path.empty()) {
    raise(ErrorCode::invalid_argument, "experiment config: manifest path is empty");
  }
  if (strategies.empty()) {
    raise(ErrorCode::invalid_argument, "experiment config: at least one strategy required");
  }
  for (const auto& s : strategies) {
    if (s.kind != "single" && s.kind != "parallel" && s.kind != "selective") {
      raise(ErrorCode::invalid_argument, "experiment config: unknown strategy '" + s.kind + "'");
    }
  }
  if (split.kind != "holdout" && split.kind != "kfold" && split.kind != "domain") {
    raise(ErrorCode::invalid_argument, "experiment config: unknown split kind '" + split.kind + "'");
  }
  if (!(val_carve_fraction > 0.0 && val_carve_fraction < 0.5)) {
    raise(ErrorCode::invalid_argument, "experiment config: val carve fraction must lie in (0, 0.5)");
  }
  if (segment_length < 2) {
    raise(ErrorCode::invalid_argument, "experiment config: segment length must be >= 2");
  }
  train.validate();
}

namespace {

struct SplitSets {
  Dataset train, val, test;
};

std::vector<std::string> manifest_sources(const std::vector<ingest::Recording>& recordings) {
  if (recordings.empty()) {
    raise(ErrorCode::validation, "manifest yielded no recordings");
  }
  return recordings.front().source_ids();
}

std::vector<StrategySpec> expand_strategies(const std::vector<StrategySpec>& strategies,
                                            const std::vector<ingest::Recording>& recordings) {
  std::vector<StrategySpec> out;
  for (const auto& s : strategies) {
    if (s.kind == "single" && !s.source.has_value()) {
      for (const auto& id : manifest_sources(recordings)) {
        StrategySpec expanded = s;
        expanded.source = id;
        out.push_back(expanded);
      }
    } else {
      out.push_back(s);
    }
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

Dataset build_for(const StrategySpec& spec, const std::vector<ingest::Recording>& recordings,
                  int n_c, const loaders::BuildOptions& options) {
  if (spec.kind == "single") {
    return loaders::build_single(recordings, *spec.source, n_c, options);
  }
  if (spec.kind == "parallel") {
    return loaders::build_parallel(recordings, n_c, options);
  }
  return loaders::build_selective(recordings, spec.mode, n_c, options);
}

size_t expected_examples(const std::vector<ingest::Recording>& recordings, size_t length) {
  size_t total = 0;
  for (const auto& rec : recordings) {
    size_t per_source = SIZE_MAX;
    for (const auto& s : rec.streams) {
      per_source = std::min(per_source, signal::segment_count(s, length));
    }
    total += rec.streams.empty() ? 0 : per_source;
  }
  return total;
}

// The count identity behind the data-reduction claim: every strategy yields
// exactly one example per simultaneous segment index, and parallel pays for
// it with m-fold feature volume.
void verify_count_identity(const StrategySpec& spec, const Dataset& ds,
                           const std::vector<ingest::Recording>& recordings, size_t length) {
  const size_t expected = expected_examples(recordings, length);
  if (ds.size() != expected) {
    raise(ErrorCode::internal, "count identity violated: strategy " + ds.strategy + " built " +
                                   std::to_string(ds.size()) + " examples, expected " +
                                   std::to_string(expected));
  }
  const size_t m = recordings.front().streams.size();
  const size_t expected_channels = spec.kind == "parallel" ? m : 1;
  if (ds.size() > 0 && ds.channels != expected_channels) {
    raise(ErrorCode::internal, "strategy " + ds.strategy + " produced " +
                                   std::to_string(ds.channels) + " channels, expected " +
                                   std::to_string(expected_channels));
  }
}

std::string describe_split(const SplitSpec& split) {
  std::ostringstream out;
  if (split.kind == "holdout") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "holdout(%.2f/%.2f/%.2f)", split.fractions.train,
                  split.fractions.val, split.fractions.test);
    out << buf;
  } else if (split.kind == "kfold") {
    out << "kfold(" << split.k << ")";
  } else {
    out << "domain(train=" << join(split.domains.train_domains, '+')
        << ", val=" << join(split.domains.val_domains, '+')
        << ", test=" << join(split.domains.test_domains, '+') << ")";
  }
  return out.str();
}

// Seeded example-level carve of a validation set out of a built training
// dataset; used when a domain split assigns no validation domains.
void carve_validation(Dataset& train, Dataset& val, double fraction, uint64_t seed) {
  const size_t n = train.size();
  size_t n_val = static_cast<size_t>(std::floor(fraction * static_cast<double>(n)));
  n_val = std::max<size_t>(n_val, 1);
  if (n_val >= n) {
    raise(ErrorCode::validation, "training set too small to carve a validation subset");
  }
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  Rng rng(derive_seed(seed, "valcarve"));
  rng.shuffle(idx);

  Dataset new_train, new_val;
  new_train.n_c = new_val.n_c = train.n_c;
  new_train.strategy = new_val.strategy = train.strategy;
  new_train.channels = new_val.channels = train.channels;
  new_train.width = new_val.width = train.width;
  for (size_t i = 0; i < n; ++i) {
    (i < n_val ? new_val : new_train).examples.push_back(std::move(train.examples[idx[i]]));
  }
  train = std::move(new_train);
  val = std::move(new_val);
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto manifest = ingest::load_manifest(config.manifest_path);
  const auto recordings = ingest::read_all(manifest, config.use_cache);
  const auto strategies = expand_strategies(config.strategies, recordings);
  const loaders::BuildOptions options{config.segment_length, config.standardize};
  const int n_c = manifest.class_count();

  RunReport report;
  report.dataset_name = manifest.dataset_name;
  report.seed = config.train.seed;
  report.repeats = config.train.repeats;
  report.split_description = describe_split(config.split);

  // Recording-level domain partition is shared by all strategies.
  loaders::RecordingSplit domain_split;
  const bool carved_val = config.split.kind == "domain" && config.split.domains.val_domains.empty();
  if (config.split.kind == "domain") {
    domain_split = loaders::split_by_domain(recordings, config.split.domains);
  }

  for (const auto& spec : strategies) {
    StrategyResult row;
    row.strategy = spec.kind;
    if (spec.kind == "single") row.variant = *spec.source;
    else if (spec.kind == "parallel") row.variant = join(manifest_sources(recordings), '+');
    else row.variant = loaders::to_string(spec.mode);

    // ---- build datasets under the split plan
    const auto build_started = std::chrono::steady_clock::now();
    std::vector<SplitSets> run_sets;  // one entry, or k for kfold
    loaders::DomainRule rule = loaders::DomainRule::none;
    if (config.split.kind == "domain") {
      SplitSets sets;
      sets.train = build_for(spec, domain_split.train, n_c, options);
      verify_count_identity(spec, sets.train, domain_split.train, config.segment_length);
      sets.test = build_for(spec, domain_split.test, n_c, options);
      verify_count_identity(spec, sets.test, domain_split.test, config.segment_length);
      if (carved_val) {
        carve_validation(sets.train, sets.val, config.val_carve_fraction, config.train.seed);
        rule = loaders::DomainRule::test_disjoint;
      } else {
        sets.val = build_for(spec, domain_split.val, n_c, options);
        verify_count_identity(spec, sets.val, domain_split.val, config.segment_length);
        rule = loaders::DomainRule::all_disjoint;
      }
      run_sets.push_back(std::move(sets));
    } else {
      Dataset full = build_for(spec, recordings, n_c, options);
      verify_count_identity(spec, full, recordings, config.segment_length);
      if (config.split.kind == "holdout") {
        auto split = loaders::split_holdout(full, config.split.fractions, config.train.seed);
        run_sets.push_back({std::move(split.train), std::move(split.val), std::move(split.test)});
      } else {
        // k-fold: fold f is run f; the fold serves as both validation and
        // evaluation split.
        auto folds = loaders::split_kfold(full, config.split.k, config.train.seed);
        for (auto& fold : folds) {
          run_sets.push_back({std::move(fold.train), fold.val, std::move(fold.val)});
        }
      }
    }
    row.build_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                     build_started)
                           .count();

    for (const auto& sets : run_sets) {
      // Under k-fold the fold doubles as validation and evaluation split, so
      // the check runs against train and the fold once.
      Dataset empty;
      empty.n_c = sets.train.n_c;
      empty.strategy = sets.train.strategy;
      const bool fold_mode = config.split.kind == "kfold";
      const auto leakage = loaders::check_leakage(sets.train, sets.val,
                                                  fold_mode ? empty : sets.test, rule);
      if (!leakage.passed()) {
        raise(ErrorCode::leakage, "leakage check failed for " + sets.train.strategy + ": " +
                                      leakage.violations.front().detail + " (" +
                                      std::to_string(leakage.violations.size()) + " violations)");
      }
    }

    row.train_examples = run_sets.front().train.size();
    row.val_examples = run_sets.front().val.size();
    row.test_examples = run_sets.front().test.size();
    row.channels = run_sets.front().train.channels;
    row.feature_width = run_sets.front().train.width;

    // ---- repeat runs, seeds seed + run
    const size_t run_count = config.split.kind == "kfold" ? run_sets.size() : config.train.repeats;
    std::vector<double> accuracies(run_count, -1.0);
    std::vector<double> times(run_count, 0.0);
    std::vector<char> diverged(run_count, 0);

    auto run_one = [&](size_t r) {
      const auto& sets = run_sets[config.split.kind == "kfold" ? r : 0];
      nn::TrainConfig tc = config.train;
      tc.seed = config.train.seed + r;
      nn::CnnConfig model_cfg;
      model_cfg.in_channels = sets.train.channels;
      model_cfg.n_c = n_c;
      try {
        nn::Cnn model(model_cfg, tc.seed);
        const auto metrics = nn::train(model, sets.train, sets.val, tc);
        accuracies[r] = nn::evaluate(model, sets.test).accuracy;
        times[r] = metrics.train_time_s;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::divergence) throw;
        diverged[r] = 1;
      }
    };

    if (config.parallel_runs && run_count > 1) {
      row.timings_reliable = false;
      const size_t workers = std::min<size_t>(std::max(1u, std::thread::hardware_concurrency()),
                                              run_count);
      std::vector<std::thread> pool;
      std::atomic<size_t> next{0};
      for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (size_t r = next.fetch_add(1); r < run_count; r = next.fetch_add(1)) run_one(r);
        });
      }
      for (auto& t : pool) t.join();
    } else {
      for (size_t r = 0; r < run_count; ++r) run_one(r);
    }

    for (size_t r = 0; r < run_count; ++r) {
      if (diverged[r]) {
        row.diverged_runs.push_back(r);
      } else {
        row.run_accuracies.push_back(accuracies[r]);
        row.run_train_times_s.push_back(times[r]);
      }
    }
    report.rows.push_back(std::move(row));
  }

  // Paired-comparison invariant: identical example membership across
  // strategies at the recording level.
  for (size_t i = 1; i < report.rows.size(); ++i) {
    if (report.rows[i].train_examples != report.rows[0].train_examples ||
        report.rows[i].test_examples != report.rows[0].test_examples) {
      raise(ErrorCode::internal, "paired-split invariant violated between strategies");
    }
  }
  return report;
}

// ---- rendering ---------------------------------------------------------

ReportFormat report_format_from_string(const std::string& name) {
  if (name == "text") return ReportFormat::text;
  if (name == "csv") return ReportFormat::csv;
  if (name == "jsonl") return ReportFormat::jsonl;
  if (name == "json") return ReportFormat::json;
  raise(ErrorCode::invalid_argument, "unknown report format '" + name + "'");
}

namespace {

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

ordered_json row_to_json(const StrategyResult& row) {
  ordered_json o;
  o["strategy"] = row.strategy;
  o["variant"] = row.variant;
  o["runs"] = row.runs();
  o["acc_mean_pct"] = row.accuracy_mean() * 100.0;
  o["acc_std_pct"] = row.accuracy_std() * 100.0;
  o["build_time_s"] = row.build_time_s;
  o["train_time_s"] = row.train_time_mean_s();
  ordered_json accs = json::array();
  for (double a : row.run_accuracies) accs.push_back(a * 100.0);
  o["accuracies_pct"] = accs;
  ordered_json times = json::array();
  for (double t : row.run_train_times_s) times.push_back(t);
  o["train_times_s"] = times;
  o["diverged_runs"] = row.diverged_runs;
  o["train_examples"] = row.train_examples;
  o["val_examples"] = row.val_examples;
  o["test_examples"] = row.test_examples;
  o["channels"] = row.channels;
  o["feature_width"] = row.feature_width;
  o["timings_reliable"] = row.timings_reliable;
  return o;
}

StrategyResult row_from_json(const json& o) {
  StrategyResult row;
  row.strategy = o.at("strategy").get<std::string>();
  row.variant = o.at("variant").get<std::string>();
  for (const auto& a : o.at("accuracies_pct")) row.run_accuracies.push_back(a.get<double>() / 100.0);
  if (o.contains("train_times_s")) {
    for (const auto& t : o["train_times_s"]) row.run_train_times_s.push_back(t.get<double>());
  }
  if (o.contains("diverged_runs")) {
    for (const auto& d : o["diverged_runs"]) row.diverged_runs.push_back(d.get<size_t>());
  }
  row.build_time_s = o.value("build_time_s", 0.0);
  row.train_examples = o.value("train_examples", size_t{0});
  row.val_examples = o.value("val_examples", size_t{0});
  row.test_examples = o.value("test_examples", size_t{0});
  row.channels = o.value("channels", size_t{1});
  row.feature_width = o.value("feature_width", size_t{0});
  row.timings_reliable = o.value("timings_reliable", true);
  return row;
}

}  // namespace

std::string render_report(const RunReport& report, ReportFormat format) {
  static const char* kColumns[] = {"strategy", "variant",      "runs",        "acc_mean_pct",
                                   "acc_std_pct", "build_time_s", "train_time_s"};
  if (format == ReportFormat::csv || format == ReportFormat::text) {
    std::vector<std::vector<std::string>> cells;
    cells.emplace_back(std::begin(kColumns), std::end(kColumns));
    for (const auto& row : report.rows) {
      cells.push_back({row.strategy, row.variant, std::to_string(row.runs()),
                       fixed(row.accuracy_mean() * 100.0, 2), fixed(row.accuracy_std() * 100.0, 2),
                       fixed(row.build_time_s, 1), fixed(row.train_time_mean_s(), 1)});
    }
    std::ostringstream out;
    if (format == ReportFormat::csv) {
      for (const auto& line : cells) out << join(line, ',') << '\n';
    } else {
      out << "dataset: " << report.dataset_name << "  model: " << report.model
          << "  seed: " << report.seed << "  split: " << report.split_description << '\n';
      std::vector<size_t> widths(std::size(kColumns), 0);
      for (const auto& line : cells) {
        for (size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], line[c].size());
      }
      for (const auto& line : cells) {
        for (size_t c = 0; c < line.size(); ++c) {
          if (c) out << "  ";
          // names left-aligned, numbers right-aligned
          if (c < 2) out << line[c] << std::string(widths[c] - line[c].size(), ' ');
          else out << std::string(widths[c] - line[c].size(), ' ') << line[c];
        }
        out << '\n';
      }
    }
    return out.str();
  }
  if (format == ReportFormat::jsonl) {
    std::ostringstream out;
    for (const auto& row : report.rows) out << row_to_json(row).dump() << '\n';
    return out.str();
  }
  ordered_json doc;
  doc["dataset"] = report.dataset_name;
  doc["model"] = report.model;
  doc["seed"] = report.seed;
  doc["repeats"] = report.repeats;
  doc["split"] = report.split_description;
  doc["rows"] = json::array();
  for (const auto& row : report.rows) doc["rows"].push_back(row_to_json(row));
  return doc.dump(2) + "\n";
}

void emit_report(const RunReport& report, ReportFormat format, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    raise(ErrorCode::io, "report '" + path.string() + "' cannot be opened for writing");
  }
  out << render_report(report, format);
  if (!out) {
    raise(ErrorCode::io, "report '" + path.string() + "': write failed");
  }
}

RunReport report_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    raise(ErrorCode::parse, std::string("report: ") + e.what());
  }
  RunReport report;
  try {
    report.dataset_name = doc.at("dataset").get<std::string>();
    report.model = doc.value("model", std::string("cnn"));
    report.seed = doc.value("seed", uint64_t{0});
    report.repeats = doc.value("repeats", size_t{0});
    report.split_description = doc.value("split", std::string());
    for (const auto& row : doc.at("rows")) report.rows.push_back(row_from_json(row));
  } catch (const json::exception& e) {
    raise(ErrorCode::parse, std::string("report: ") + e.what());
  }
  return report;
}

void emit_plot_data(const std::vector<RunReport>& reports, const fs::path& path) {
  if (reports.empty()) {
    raise(ErrorCode::invalid_argument, "plot data needs at least one report");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    raise(ErrorCode::io, "plot data '" + path.string() + "' cannot be opened for writing");
  }
  out << "dataset,model,strategy,variant,run,acc_pct\n";
  char buf[64];
  for (const auto& report : reports) {
    for (const auto& row : report.rows) {
      for (size_t r = 0; r < row.run_accuracies.size(); ++r) {
        std::snprintf(buf, sizeof(buf), "%.10g", row.run_accuracies[r] * 100.0);
        out << report.dataset_name << ',' << report.model << ',' << row.strategy << ','
            << row.variant << ',' << r << ',' << buf << '\n';
      }
    }
  }
  if (!out) {
    raise(ErrorCode::io, "plot data '" + path.string() + "': write failed");
  }
}

// ---- config json ---------------------------------------------------------

ExperimentConfig default_config() {
  ExperimentConfig config;
  config.strategies = {
      {"single", std::nullopt, loaders::SelectiveMode::by_segment},
      {"parallel", std::nullopt, loaders::SelectiveMode::by_segment},
      {"selective", std::nullopt, loaders::SelectiveMode::by_segment},
  };
  return config;
}

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return key == k; }) == allowed.end()) {
      raise(ErrorCode::parse, where + ": unknown key '" + key + "'");
    }
  }
}

}  // namespace

ExperimentConfig config_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    raise(ErrorCode::parse, std::string("experiment config: ") + e.what());
  }
  ExperimentConfig config = default_config();
  try {
    reject_unknown_keys(doc,
                        {"manifest", "strategies", "split", "segment_length", "standardize",
                         "val_carve_fraction", "train", "use_cache", "parallel_runs", "out_dir"},
                        "experiment config");
    if (doc.contains("manifest")) config.manifest_path = doc["manifest"].get<std::string>();
    if (doc.contains("segment_length")) config.segment_length = doc["segment_length"].get<size_t>();
    if (doc.contains("standardize")) {
      config.standardize = signal::standardize_mode_from_string(doc["standardize"].get<std::string>());
    }
    if (doc.contains("val_carve_fraction")) {
      config.val_carve_fraction = doc["val_carve_fraction"].get<double>();
    }
    if (doc.contains("use_cache")) config.use_cache = doc["use_cache"].get<bool>();
    if (doc.contains("parallel_runs")) config.parallel_runs = doc["parallel_runs"].get<bool>();
    if (doc.contains("strategies")) {
      config.strategies.clear();
      for (const auto& s : doc["strategies"]) {
        reject_unknown_keys(s, {"kind", "source", "mode"}, "strategy");
        StrategySpec spec;
        spec.kind = s.at("kind").get<std::string>();
        if (s.contains("source")) spec.source = s["source"].get<std::string>();
        if (s.contains("mode")) {
          spec.mode = loaders::selective_mode_from_string(s["mode"].get<std::string>());
        }
        config.strategies.push_back(spec);
      }
    }
    if (doc.contains("split")) {
      const auto& s = doc["split"];
      reject_unknown_keys(s, {"kind", "train", "val", "test", "k"}, "split");
      config.split.kind = s.at("kind").get<std::string>();
      if (config.split.kind == "holdout") {
        if (s.contains("train")) config.split.fractions.train = s["train"].get<double>();
        if (s.contains("val")) config.split.fractions.val = s["val"].get<double>();
        if (s.contains("test")) config.split.fractions.test = s["test"].get<double>();
      } else if (config.split.kind == "kfold") {
        if (s.contains("k")) config.split.k = s["k"].get<size_t>();
      } else if (config.split.kind == "domain") {
        if (s.contains("train")) {
          config.split.domains.train_domains = s["train"].get<std::vector<std::string>>();
        }
        if (s.contains("val")) {
          config.split.domains.val_domains = s["val"].get<std::vector<std::string>>();
        }
        if (s.contains("test")) {
          config.split.domains.test_domains = s["test"].get<std::vector<std::string>>();
        }
      }
    }
    if (doc.contains("train")) {
      const auto& t = doc["train"];
      reject_unknown_keys(
          t, {"lr", "beta1", "beta2", "epsilon", "batch_size", "epochs", "seed", "repeats"},
          "train config");
      if (t.contains("lr")) config.train.lr = t["lr"].get<double>();
      if (t.contains("beta1")) config.train.beta1 = t["beta1"].get<double>();
      if (t.contains("beta2")) config.train.beta2 = t["beta2"].get<double>();
      if (t.contains("epsilon")) config.train.epsilon = t["epsilon"].get<double>();
      if (t.contains("batch_size")) config.train.batch_size = t["batch_size"].get<size_t>();
      if (t.contains("epochs")) config.train.epochs = t["epochs"].get<size_t>();
      if (t.contains("seed")) config.train.seed = t["seed"].get<uint64_t>();
      if (t.contains("repeats")) config.train.repeats = t["repeats"].get<size_t>();
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::parse, std::string("experiment config: ") + e.what());
  }
  return config;
}

std::string config_to_json(const ExperimentConfig& config) {
  ordered_json doc;
  doc["manifest"] = config.manifest_path;
  doc["strategies"] = json::array();
  for (const auto& s : config.strategies) {
    ordered_json spec;
    spec["kind"] = s.kind;
    if (s.source) spec["source"] = *s.source;
    if (s.kind == "selective") spec["mode"] = loaders::to_string(s.mode);
    doc["strategies"].push_back(spec);
  }
  ordered_json split;
  split["kind"] = config.split.kind;
  if (config.split.kind == "holdout") {
    split["train"] = config.split.fractions.train;
    split["val"] = config.split.fractions.val;
    split["test"] = config.split.fractions.test;
  } else if (config.split.kind == "kfold") {
    split["k"] = config.split.k;
  } else {
    split["train"] = config.split.domains.train_domains;
    split["val"] = config.split.domains.val_domains;
    split["test"] = config.split.domains.test_domains;
  }
  doc["split"] = split;
  doc["segment_length"] = config.segment_length;
  doc["standardize"] = signal::to_string(config.standardize);
  doc["val_carve_fraction"] = config.val_carve_fraction;
  ordered_json train;
  train["lr"] = config.train.lr;
  train["beta1"] = config.train.beta1;
  train["beta2"] = config.train.beta2;
  train["epsilon"] = config.train.epsilon;
  train["batch_size"] = config.train.batch_size;
  train["epochs"] = config.train.epochs;
  train["seed"] = config.train.seed;
  train["repeats"] = config.train.repeats;
  doc["train"] = train;
  doc["use_cache"] = config.use_cache;
  doc["parallel_runs"] = config.parallel_runs;
  return doc.dump(2);
}

}  // namespace selemb::bench
