#include "selemb/loaders.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "selemb/errors.hpp"
#include "selemb/rng.hpp"

namespace selemb::loaders {

using ingest::Recording;
using signal::Spectrum;

namespace {

std::string join_sources(const std::vector<std::string>& ids) {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += '+';
    out += ids[i];
  }
  return out;
}

// Segment count shared by all sources of a validated recording.
size_t recording_segments(const Recording& rec, size_t length) {
  size_t count = SIZE_MAX;
  for (const auto& s : rec.streams) {
    count = std::min(count, signal::segment_count(s, length));
  }
  return rec.streams.empty() ? 0 : count;
}

Spectrum make_spectrum(const signal::SourceStream& stream, size_t seg_index,
                       const BuildOptions& opt) {
  const auto segment = signal::extract_segment(stream, opt.segment_length, seg_index);
  return signal::standardize(signal::fft_magnitude(segment), opt.standardize);
}

Example example_from_spectrum(Spectrum&& spec) {
  Example ex;
  ex.width = spec.bins.size();
  ex.channels = 1;
  ex.class_id = spec.class_id;
  ex.prov = {spec.file_id, spec.source_id, spec.index, spec.domain_id};
  ex.features = std::move(spec.bins);
  return ex;
}

void require_segments(const Recording& rec, size_t length) {
  for (const auto& s : rec.streams) {
    if (signal::segment_count(s, length) == 0) {
      raise(ErrorCode::no_full_window,
            "no full window: recording " + rec.file_id + " is shorter than one segment of " +
                std::to_string(length) + " samples");
    }
  }
}

// All recordings must expose the same ordered source set of size >= min_sources.
std::vector<std::string> require_consistent_sources(const std::vector<Recording>& recordings,
                                                    size_t min_sources) {
  if (recordings.empty()) {
    raise(ErrorCode::invalid_argument, "no recordings given");
  }
  const auto ids = recordings.front().source_ids();
  if (ids.size() < min_sources) {
    raise(ErrorCode::validation, "strategy needs at least " + std::to_string(min_sources) +
                                     " sources, recording " + recordings.front().file_id + " has " +
                                     std::to_string(ids.size()));
  }
  for (const auto& rec : recordings) {
    if (rec.source_ids() != ids) {
      raise(ErrorCode::validation, "recording " + rec.file_id +
                                       " exposes sources {" + join_sources(rec.source_ids()) +
                                       "}, expected {" + join_sources(ids) + "}");
    }
  }
  return ids;
}

void finalize_dataset(Dataset& ds, int n_c, const std::string& strategy) {
  ds.n_c = n_c;
  ds.strategy = strategy;
  if (!ds.examples.empty()) {
    ds.channels = ds.examples.front().channels;
    ds.width = ds.examples.front().width;
  }
  std::vector<bool> seen(static_cast<size_t>(n_c) + 1, false);
  for (const auto& ex : ds.examples) {
    if (ex.class_id < 1 || ex.class_id > n_c) {
      raise(ErrorCode::validation, "example carries class " + std::to_string(ex.class_id) +
                                       " outside 1.." + std::to_string(n_c));
    }
    seen[static_cast<size_t>(ex.class_id)] = true;
  }
  for (int j = 1; j <= n_c; ++j) {
    if (!seen[static_cast<size_t>(j)]) {
      raise(ErrorCode::validation,
            "class " + std::to_string(j) + " has no examples under strategy " + strategy);
    }
  }
}

Dataset take_indices(const Dataset& src, const std::vector<size_t>& indices) {
  Dataset out;
  out.n_c = src.n_c;
  out.strategy = src.strategy;
  out.channels = src.channels;
  out.width = src.width;
  out.examples.reserve(indices.size());
  for (size_t i : indices) out.examples.push_back(src.examples[i]);
  return out;
}

}  // namespace

SelectiveMode selective_mode_from_string(const std::string& name) {
  if (name == "segment" || name == "by_segment") return SelectiveMode::by_segment;
  if (name == "class" || name == "by_class") return SelectiveMode::by_class;
  raise(ErrorCode::invalid_argument, "unknown selective mode '" + name + "'");
}

std::string to_string(SelectiveMode mode) {
  return mode == SelectiveMode::by_segment ? "segment" : "class";
}

std::vector<std::vector<Spectrum>> preprocess(const Recording& recording,
                                              const BuildOptions& options) {
  ingest::validate_recording(recording);
  require_segments(recording, options.segment_length);
  std::vector<std::vector<Spectrum>> out;
  out.reserve(recording.streams.size());
  for (const auto& stream : recording.streams) {
    const size_t count = signal::segment_count(stream, options.segment_length);
    std::vector<Spectrum> spectra;
    spectra.reserve(count);
    for (size_t i = 0; i < count; ++i) {
      spectra.push_back(make_spectrum(stream, i, options));
    }
    out.push_back(std::move(spectra));
  }
  return out;
}

Dataset build_single(const std::vector<Recording>& recordings, const std::string& source_id,
                     int n_c, const BuildOptions& options) {
  if (recordings.empty()) {
    raise(ErrorCode::invalid_argument, "no recordings given");
  }
  Dataset ds;
  for (const auto& rec : recordings) {
    const auto* stream = rec.find_source(source_id);
    if (!stream) {
      raise(ErrorCode::validation,
            "recording " + rec.file_id + " has no source '" + source_id + "'");
    }
    require_segments(rec, options.segment_length);
    const size_t count = signal::segment_count(*stream, options.segment_length);
    for (size_t i = 0; i < count; ++i) {
      ds.examples.push_back(example_from_spectrum(make_spectrum(*stream, i, options)));
    }
  }
  finalize_dataset(ds, n_c, "single:" + source_id);
  return ds;
}

Dataset build_parallel(const std::vector<Recording>& recordings, int n_c,
                       const BuildOptions& options) {
  const auto ids = require_consistent_sources(recordings, 2);
  const std::string source_set = join_sources(ids);
  Dataset ds;
  for (const auto& rec : recordings) {
    require_segments(rec, options.segment_length);
    const size_t count = recording_segments(rec, options.segment_length);
    for (size_t i = 0; i < count; ++i) {
      Example ex;
      ex.channels = rec.streams.size();
      ex.class_id = rec.class_id;
      ex.prov = {rec.file_id, source_set, i, rec.domain_id};
      for (const auto& stream : rec.streams) {
        auto spec = make_spectrum(stream, i, options);
        if (ex.width == 0) ex.width = spec.bins.size();
        ex.features.insert(ex.features.end(), spec.bins.begin(), spec.bins.end());
      }
      ds.examples.push_back(std::move(ex));
    }
  }
  finalize_dataset(ds, n_c, "parallel");
  return ds;
}

Dataset build_selective(const std::vector<Recording>& recordings, SelectiveMode mode, int n_c,
                        const BuildOptions& options, BuildStats* stats) {
  const auto ids = require_consistent_sources(recordings, 2);
  const size_t m = ids.size();
  if (stats) *stats = BuildStats{};
  Dataset ds;
  for (const auto& rec : recordings) {
    require_segments(rec, options.segment_length);
    const size_t count = recording_segments(rec, options.segment_length);
    if (stats) {
      for (const auto& s : rec.streams) {
        if (signal::segment_count(s, options.segment_length) != count) {
          stats->clamped = true;
        }
      }
      stats->min_segments = stats->min_segments == 0 ? count : std::min(stats->min_segments, count);
    }
    for (size_t i = 0; i < count; ++i) {
      const size_t src_index = mode == SelectiveMode::by_segment
                                   ? i % m
                                   : static_cast<size_t>(rec.class_id - 1) % m;
      ds.examples.push_back(
          example_from_spectrum(make_spectrum(rec.streams[src_index], i, options)));
    }
  }
  finalize_dataset(ds, n_c, "selective:" + to_string(mode));
  return ds;
}

namespace {

// Largest-remainder apportionment of n items over the given fractions.
std::vector<size_t> apportion(size_t n, const std::vector<double>& fractions) {
  std::vector<size_t> sizes(fractions.size());
  std::vector<std::pair<double, size_t>> remainders;  // (-remainder, index) for stable sort
  size_t assigned = 0;
  for (size_t i = 0; i < fractions.size(); ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    sizes[i] = static_cast<size_t>(std::floor(exact));
    assigned += sizes[i];
    remainders.emplace_back(-(exact - std::floor(exact)), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (size_t r = 0; assigned < n; ++r, ++assigned) {
    sizes[remainders[r % remainders.size()].second] += 1;
  }
  return sizes;
}

std::vector<size_t> shuffled_indices(size_t n, uint64_t seed) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(idx);
  return idx;
}

}  // namespace

HoldoutSplit split_holdout(const Dataset& dataset, const HoldoutFractions& fractions,
                           uint64_t seed) {
  const double sum = fractions.train + fractions.val + fractions.test;
  if (!(fractions.train > 0.0 && fractions.val > 0.0 && fractions.test > 0.0)) {
    raise(ErrorCode::invalid_argument, "holdout fractions must be positive");
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    raise(ErrorCode::invalid_argument, "holdout fractions must sum to 1");
  }
  const size_t n = dataset.size();
  const auto sizes = apportion(n, {fractions.train, fractions.val, fractions.test});
  if (sizes[0] == 0 || sizes[1] == 0 || sizes[2] == 0) {
    raise(ErrorCode::validation, "holdout split would leave an empty split for " +
                                     std::to_string(n) + " examples");
  }
  const auto idx = shuffled_indices(n, seed);
  HoldoutSplit out;
  out.train = take_indices(dataset, {idx.begin(), idx.begin() + static_cast<ptrdiff_t>(sizes[0])});
  out.val = take_indices(dataset, {idx.begin() + static_cast<ptrdiff_t>(sizes[0]),
                                   idx.begin() + static_cast<ptrdiff_t>(sizes[0] + sizes[1])});
  out.test = take_indices(dataset, {idx.begin() + static_cast<ptrdiff_t>(sizes[0] + sizes[1]),
                                    idx.end()});
  return out;
}

std::vector<Fold> split_kfold(const Dataset& dataset, size_t k, uint64_t seed) {
  if (k < 2) {
    raise(ErrorCode::invalid_argument, "k-fold needs k >= 2");
  }
  const size_t n = dataset.size();
  if (n < k) {
    raise(ErrorCode::validation, "k-fold with k=" + std::to_string(k) + " needs at least " +
                                     std::to_string(k) + " examples, got " + std::to_string(n));
  }
  const auto idx = shuffled_indices(n, seed);
  // First (n mod k) folds take one extra example.
  std::vector<Fold> folds(k);
  size_t offset = 0;
  for (size_t f = 0; f < k; ++f) {
    const size_t size = n / k + (f < n % k ? 1 : 0);
    std::vector<size_t> val_idx(idx.begin() + static_cast<ptrdiff_t>(offset),
                                idx.begin() + static_cast<ptrdiff_t>(offset + size));
    std::vector<size_t> train_idx;
    train_idx.reserve(n - size);
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + static_cast<ptrdiff_t>(offset));
    train_idx.insert(train_idx.end(), idx.begin() + static_cast<ptrdiff_t>(offset + size),
                     idx.end());
    folds[f].val = take_indices(dataset, val_idx);
    folds[f].train = take_indices(dataset, train_idx);
    offset += size;
  }
  return folds;
}

RecordingSplit split_by_domain(const std::vector<Recording>& recordings,
                               const DomainSplitSpec& spec) {
  std::set<std::string> existing;
  for (const auto& rec : recordings) existing.insert(rec.domain_id);

  auto check_known = [&](const std::vector<std::string>& domains, const char* split) {
    for (const auto& d : domains) {
      if (!existing.count(d)) {
        raise(ErrorCode::validation,
              std::string("unknown domain '") + d + "' in " + split + " set");
      }
    }
  };
  check_known(spec.train_domains, "train");
  check_known(spec.val_domains, "val");
  check_known(spec.test_domains, "test");

  std::map<std::string, const char*> assignment;
  auto assign = [&](const std::vector<std::string>& domains, const char* split) {
    for (const auto& d : domains) {
      auto [it, inserted] = assignment.emplace(d, split);
      if (!inserted) {
        raise(ErrorCode::validation, "domain '" + d + "' assigned to both " +
                                         std::string(it->second) + " and " + split);
      }
    }
  };
  assign(spec.train_domains, "train");
  assign(spec.val_domains, "val");
  assign(spec.test_domains, "test");
  if (spec.train_domains.empty() || spec.test_domains.empty()) {
    raise(ErrorCode::invalid_argument, "domain split needs non-empty train and test domain sets");
  }

  RecordingSplit out;
  for (const auto& rec : recordings) {
    auto it = assignment.find(rec.domain_id);
    if (it == assignment.end()) continue;  // unassigned domains are simply unused
    if (it->second == std::string("train")) out.train.push_back(rec);
    else if (it->second == std::string("val")) out.val.push_back(rec);
    else out.test.push_back(rec);
  }
  if (out.train.empty() || out.test.empty()) {
    raise(ErrorCode::validation, "domain split produced an empty train or test set");
  }
  return out;
}

namespace {

struct TripleKey {
  std::string file_id;
  size_t segment = 0;
  std::string source;
  bool operator<(const TripleKey& o) const {
    return std::tie(file_id, segment, source) < std::tie(o.file_id, o.segment, o.source);
  }
};

}  // namespace

LeakageReport check_leakage(const Dataset& train, const Dataset& val, const Dataset& test,
                            DomainRule domain_rule) {
  LeakageReport report;
  const std::vector<std::pair<const Dataset*, const char*>> splits = {
      {&train, "train"}, {&val, "val"}, {&test, "test"}};

  std::map<TripleKey, const char*> seen;
  std::map<std::string, std::set<std::string>> domains_by_split;
  for (const auto& [ds, name] : splits) {
    for (const auto& ex : ds->examples) {
      TripleKey key{ex.prov.file_id, ex.prov.segment_index, ex.prov.source};
      auto [it, inserted] = seen.emplace(key, name);
      if (!inserted && it->second != name) {
        std::ostringstream msg;
        msg << "(" << key.file_id << ", segment " << key.segment << ", " << key.source
            << ") appears in both " << it->second << " and " << name;
        report.violations.push_back({"duplicate_example", msg.str()});
      }
      domains_by_split[name].insert(ex.prov.domain_id);
    }
  }

  auto domain_overlap = [&](const char* a, const char* b) {
    for (const auto& d : domains_by_split[a]) {
      if (domains_by_split[b].count(d)) {
        report.violations.push_back(
            {"domain_overlap", "domain '" + d + "' spans " + a + " and " + b});
      }
    }
  };
  if (domain_rule == DomainRule::all_disjoint) {
    domain_overlap("train", "val");
    domain_overlap("train", "test");
    domain_overlap("val", "test");
  } else if (domain_rule == DomainRule::test_disjoint) {
    domain_overlap("train", "test");
    domain_overlap("val", "test");
  }
  return report;
}

}  // namespace selemb::loaders
