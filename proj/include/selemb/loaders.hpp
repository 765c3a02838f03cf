#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "selemb/ingest.hpp"
#include "selemb/signal_core.hpp"

namespace selemb::loaders {

// Where an example's features came from. `source` is the source id for
// 1-channel strategies and the '+'-joined ordered source set for parallel.
struct Provenance {
  std::string file_id;
  std::string source;
  size_t segment_index = 0;
  std::string domain_id;
};

// One preprocessed feature matrix of shape (channels, width), row-major.
struct Example {
  std::vector<double> features;
  size_t channels = 1;
  size_t width = 0;
  int class_id = 0;
  Provenance prov;
};

struct Dataset {
  std::vector<Example> examples;
  int n_c = 0;
  std::string strategy;  // e.g. "single:acc", "parallel", "selective:segment"
  size_t channels = 1;
  size_t width = 0;

  size_t size() const { return examples.size(); }
  size_t feature_volume() const { return examples.size() * channels * width; }
};

enum class SelectiveMode { by_segment, by_class };

SelectiveMode selective_mode_from_string(const std::string& name);
std::string to_string(SelectiveMode mode);

struct BuildOptions {
  size_t segment_length = signal::kDefaultSegmentLength;
  signal::StandardizeMode standardize = signal::StandardizeMode::none;
};

// Reported by build_selective when per-source segment counts had to be
// clamped to the minimum (cannot happen for validated Recordings).
struct BuildStats {
  bool clamped = false;
  size_t min_segments = 0;
};

// Segments, transforms and standardizes every source of one recording,
// preserving segment order. All sources yield equal counts.
std::vector<std::vector<signal::Spectrum>> preprocess(const ingest::Recording& recording,
                                                      const BuildOptions& options);

// Every segment of one chosen source, one 1-channel example per segment.
// Order: recording (manifest file) order, then segment index.
Dataset build_single(const std::vector<ingest::Recording>& recordings, const std::string& source_id,
                     int n_c, const BuildOptions& options);

// Simultaneous segments of all m sources stacked as m channels.
Dataset build_parallel(const std::vector<ingest::Recording>& recordings, int n_c,
                       const BuildOptions& options);

// Selective embedding: 1-channel examples alternating across sources.
//  by_segment: segment i of a recording comes from source (i mod m).
//  by_class:   class j draws every segment from source (j-1) mod m.
// Either way a recording contributes exactly its per-source segment count,
// i.e. 1/m of all available segments.
Dataset build_selective(const std::vector<ingest::Recording>& recordings, SelectiveMode mode,
                        int n_c, const BuildOptions& options, BuildStats* stats = nullptr);

struct HoldoutFractions {
  double train = 0.7;
  double val = 0.2;
  double test = 0.1;
};

struct HoldoutSplit {
  Dataset train, val, test;
};

// Seeded shuffle (SplitMix64 Fisher-Yates, see docs/FORMATS.md), then
// largest-remainder partition. Every split must end up non-empty.
HoldoutSplit split_holdout(const Dataset& dataset, const HoldoutFractions& fractions, uint64_t seed);

struct Fold {
  Dataset train, val;
};

// k near-equal folds over a seeded shuffle; fold i validates on chunk i.
std::vector<Fold> split_kfold(const Dataset& dataset, size_t k, uint64_t seed);

struct DomainSplitSpec {
  std::vector<std::string> train_domains;
  std::vector<std::string> val_domains;  // may be empty; callers then carve val elsewhere
  std::vector<std::string> test_domains;
};

struct RecordingSplit {
  std::vector<ingest::Recording> train, val, test;
};

// Splits at the recording level so no file contributes to two splits.
// Domain sets must be pairwise disjoint and cover only existing domains.
RecordingSplit split_by_domain(const std::vector<ingest::Recording>& recordings,
                               const DomainSplitSpec& spec);

enum class DomainRule {
  none,           // only the (file, segment, source) triple rule
  test_disjoint,  // additionally: no domain shared between train/val and test
  all_disjoint,   // additionally: no domain shared between any two splits
};

struct LeakageViolation {
  std::string kind;  // "duplicate_example" or "domain_overlap"
  std::string detail;
};

struct LeakageReport {
  std::vector<LeakageViolation> violations;
  bool passed() const { return violations.empty(); }
};

// Passes iff no (file_id, segment index, source) triple appears in two
// splits, plus the requested domain-disjointness rule.
LeakageReport check_leakage(const Dataset& train, const Dataset& val, const Dataset& test,
                            DomainRule domain_rule = DomainRule::none);

}  // namespace selemb::loaders
