#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "selemb/signal_core.hpp"

namespace selemb::ingest {

// One declared data file: a delimited text file whose named columns map to
// source ids.
struct FileEntry {
  std::string path;  // relative to the manifest directory
  int class_id = 0;
  std::string domain_id;
  std::vector<std::pair<std::string, std::string>> source_columns;  // column -> source_id
};

struct ClassEntry {
  int id = 0;
  std::string label;
};

struct Manifest {
  std::string dataset_name;
  double rate = 0.0;  // Hz
  std::vector<ClassEntry> classes;  // ids consecutive from 1
  std::vector<FileEntry> files;
  std::filesystem::path base_dir;  // directory of the manifest file

  int class_count() const { return static_cast<int>(classes.size()); }
  std::filesystem::path resolve(const std::string& relative) const { return base_dir / relative; }
};

// Simultaneously-sampled streams from one file: equal lengths, equal rate,
// distinct source ids.
struct Recording {
  std::vector<signal::SourceStream> streams;  // manifest column order
  int class_id = 0;
  std::string domain_id;
  std::string file_id;

  size_t length() const { return streams.empty() ? 0 : streams.front().samples.size(); }
  std::vector<std::string> source_ids() const;
  const signal::SourceStream* find_source(const std::string& source_id) const;
};

// Parses and fully validates a manifest. Errors carry the offending
// location: missing file, malformed field, non-contiguous class ids,
// dangling data-file reference.
Manifest load_manifest(const std::filesystem::path& path);

// Reads the declared columns of one delimited text file. Errors: missing
// column, unequal effective lengths, non-numeric cell (data row and column
// reported, 1-based).
Recording read_recording(const Manifest& manifest, const FileEntry& entry);

// All files in manifest order.
std::vector<Recording> read_all(const Manifest& manifest, bool use_cache = false);

// Binary sample cache, a pure optimization over the CSV: little-endian
// float64 samples behind a fixed header. Layout in docs/FORMATS.md.
std::filesystem::path cache_path_for(const std::filesystem::path& csv_path);
void write_cache(const Recording& recording, const std::filesystem::path& path);
Recording read_cache(const std::filesystem::path& path);

// Cache-aware read: loads the cache when it exists and is newer than the
// CSV, otherwise parses the CSV and writes the cache.
Recording read_recording_cached(const Manifest& manifest, const FileEntry& entry);

void validate_recording(const Recording& recording);

}  // namespace selemb::ingest
