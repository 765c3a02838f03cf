#include "selemb/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "selemb/errors.hpp"

namespace selemb::ingest {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kCacheMagic[8] = {'S', 'E', 'L', 'M', 'B', 'S', 'C', '1'};
constexpr uint32_t kCacheVersion = 1;

std::string where(const fs::path& path) { return "'" + path.string() + "'"; }

const json& require_field(const json& obj, const char* key, const std::string& location) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    raise(ErrorCode::parse, location + ": missing field '" + key + "'");
  }
  return *it;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim surrounding whitespace
    size_t b = cell.find_first_not_of(" \t\r");
    size_t e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

void write_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

double read_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

std::string read_string(std::istream& in) {
  const uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}

}  // namespace

std::vector<std::string> Recording::source_ids() const {
  std::vector<std::string> ids;
  ids.reserve(streams.size());
  for (const auto& s : streams) ids.push_back(s.source_id);
  return ids;
}

const signal::SourceStream* Recording::find_source(const std::string& source_id) const {
  for (const auto& s : streams) {
    if (s.source_id == source_id) return &s;
  }
  return nullptr;
}

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    raise(ErrorCode::io, "manifest " + where(path) + " cannot be opened");
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    raise(ErrorCode::parse, "manifest " + where(path) + ": " + e.what());
  }

  const std::string loc = "manifest " + where(path);
  Manifest m;
  m.base_dir = path.has_parent_path() ? path.parent_path() : fs::path(".");

  try {
    m.dataset_name = require_field(doc, "dataset_name", loc).get<std::string>();
    m.rate = require_field(doc, "rate", loc).get<double>();
    if (!(m.rate > 0.0)) {
      raise(ErrorCode::validation, loc + ": rate must be positive");
    }

    for (const auto& c : require_field(doc, "classes", loc)) {
      ClassEntry entry;
      entry.id = require_field(c, "id", loc + " classes").get<int>();
      entry.label = require_field(c, "label", loc + " classes").get<std::string>();
      m.classes.push_back(entry);
    }
    if (m.classes.empty()) {
      raise(ErrorCode::validation, loc + ": at least one class required");
    }
    std::sort(m.classes.begin(), m.classes.end(),
              [](const ClassEntry& a, const ClassEntry& b) { return a.id < b.id; });
    for (size_t i = 0; i < m.classes.size(); ++i) {
      const int expected = static_cast<int>(i) + 1;
      if (m.classes[i].id != expected) {
        raise(ErrorCode::validation,
              loc + ": class ids must be consecutive from 1; expected class " +
                  std::to_string(expected) + ", found " + std::to_string(m.classes[i].id));
      }
    }

    for (const auto& f : require_field(doc, "files", loc)) {
      FileEntry entry;
      entry.path = require_field(f, "path", loc + " files").get<std::string>();
      const std::string floc = loc + " file '" + entry.path + "'";
      entry.class_id = require_field(f, "class", floc).get<int>();
      entry.domain_id = require_field(f, "domain", floc).get<std::string>();
      if (entry.domain_id.empty()) {
        raise(ErrorCode::validation, floc + ": domain must be non-empty");
      }
      if (entry.class_id < 1 || entry.class_id > m.class_count()) {
        raise(ErrorCode::validation, floc + ": class " + std::to_string(entry.class_id) +
                                         " not declared in classes");
      }
      for (const auto& s : require_field(f, "sources", floc)) {
        const std::string column = require_field(s, "column", floc).get<std::string>();
        const std::string source = require_field(s, "source", floc).get<std::string>();
        entry.source_columns.emplace_back(column, source);
      }
      if (entry.source_columns.empty()) {
        raise(ErrorCode::validation, floc + ": at least one source column required");
      }
      if (!fs::exists(m.resolve(entry.path))) {
        raise(ErrorCode::validation, floc + ": referenced data file does not exist");
      }
      m.files.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::parse, loc + ": " + e.what());
  }
  return m;
}

void validate_recording(const Recording& recording) {
  if (recording.streams.empty()) {
    raise(ErrorCode::validation, "recording " + recording.file_id + " has no streams");
  }
  const size_t len = recording.streams.front().samples.size();
  const double rate = recording.streams.front().rate;
  std::set<std::string> ids;
  for (const auto& s : recording.streams) {
    signal::validate_stream(s);
    if (s.samples.size() != len) {
      raise(ErrorCode::validation,
            "recording " + recording.file_id + ": stream '" + s.source_id + "' has " +
                std::to_string(s.samples.size()) + " samples, expected " + std::to_string(len) +
                " (simultaneous sampling violated)");
    }
    if (s.rate != rate) {
      raise(ErrorCode::validation, "recording " + recording.file_id + ": stream rates differ");
    }
    if (!ids.insert(s.source_id).second) {
      raise(ErrorCode::validation,
            "recording " + recording.file_id + ": duplicate source id '" + s.source_id + "'");
    }
  }
}

Recording read_recording(const Manifest& manifest, const FileEntry& entry) {
  const fs::path path = manifest.resolve(entry.path);
  std::ifstream in(path);
  if (!in) {
    raise(ErrorCode::io, "data file " + where(path) + " cannot be opened");
  }

  std::string header_line;
  if (!std::getline(in, header_line)) {
    raise(ErrorCode::parse, "data file " + where(path) + " is empty");
  }
  const auto header = split_csv_line(header_line);

  // Map each declared column to its position in the header.
  std::vector<size_t> column_pos;
  for (const auto& [column, source] : entry.source_columns) {
    auto it = std::find(header.begin(), header.end(), column);
    if (it == header.end()) {
      raise(ErrorCode::parse,
            "data file " + where(path) + ": declared column '" + column + "' not in header");
    }
    column_pos.push_back(static_cast<size_t>(it - header.begin()));
  }

  Recording rec;
  rec.class_id = entry.class_id;
  rec.domain_id = entry.domain_id;
  rec.file_id = entry.path;
  rec.streams.resize(entry.source_columns.size());
  for (size_t i = 0; i < entry.source_columns.size(); ++i) {
    auto& s = rec.streams[i];
    s.rate = manifest.rate;
    s.source_id = entry.source_columns[i].second;
    s.class_id = entry.class_id;
    s.domain_id = entry.domain_id;
    s.file_id = entry.path;
  }

  std::string line;
  size_t data_row = 0;
  std::vector<std::string> pending_blank;  // trailing blank lines are trimmed
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r,") == std::string::npos) {
      pending_blank.push_back(line);
      continue;
    }
    if (!pending_blank.empty()) {
      raise(ErrorCode::parse, "data file " + where(path) + ": blank line inside data at row " +
                                  std::to_string(data_row + 1));
    }
    ++data_row;
    const auto cells = split_csv_line(line);
    for (size_t i = 0; i < column_pos.size(); ++i) {
      const auto& column = entry.source_columns[i].first;
      if (column_pos[i] >= cells.size()) {
        raise(ErrorCode::parse, "data file " + where(path) + ": row " + std::to_string(data_row) +
                                    " has no value for column '" + column + "'");
      }
      const std::string& cell = cells[column_pos[i]];
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v)) {
        raise(ErrorCode::parse, "data file " + where(path) + ": non-numeric value '" + cell +
                                    "' at row " + std::to_string(data_row) + ", column '" + column + "'");
      }
      rec.streams[i].samples.push_back(v);
    }
  }
  if (data_row == 0) {
    raise(ErrorCode::parse, "data file " + where(path) + " has no data rows");
  }
  validate_recording(rec);
  return rec;
}

fs::path cache_path_for(const fs::path& csv_path) {
  fs::path p = csv_path;
  p += ".smpcache";
  return p;
}

void write_cache(const Recording& recording, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    raise(ErrorCode::io, "cache " + where(path) + " cannot be opened for writing");
  }
  out.write(kCacheMagic, sizeof(kCacheMagic));
  write_u32(out, kCacheVersion);
  write_u32(out, static_cast<uint32_t>(recording.streams.size()));
  write_u32(out, static_cast<uint32_t>(recording.class_id));
  write_string(out, recording.domain_id);
  write_string(out, recording.file_id);
  for (const auto& s : recording.streams) {
    write_string(out, s.source_id);
    write_f64(out, s.rate);
    write_u64(out, s.samples.size());
    out.write(reinterpret_cast<const char*>(s.samples.data()),
              static_cast<std::streamsize>(s.samples.size() * sizeof(double)));
  }
  if (!out) {
    raise(ErrorCode::io, "cache " + where(path) + ": write failed");
  }
}

Recording read_cache(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    raise(ErrorCode::io, "cache " + where(path) + " cannot be opened");
  }
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0) {
    raise(ErrorCode::parse, "cache " + where(path) + ": bad magic");
  }
  if (read_u32(in) != kCacheVersion) {
    raise(ErrorCode::parse, "cache " + where(path) + ": unsupported version");
  }
  Recording rec;
  const uint32_t stream_count = read_u32(in);
  rec.class_id = static_cast<int>(read_u32(in));
  rec.domain_id = read_string(in);
  rec.file_id = read_string(in);
  rec.streams.resize(stream_count);
  for (auto& s : rec.streams) {
    s.source_id = read_string(in);
    s.rate = read_f64(in);
    const uint64_t n = read_u64(in);
    s.samples.resize(n);
    in.read(reinterpret_cast<char*>(s.samples.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    s.class_id = rec.class_id;
    s.domain_id = rec.domain_id;
    s.file_id = rec.file_id;
  }
  if (!in) {
    raise(ErrorCode::parse, "cache " + where(path) + ": truncated");
  }
  validate_recording(rec);
  return rec;
}

Recording read_recording_cached(const Manifest& manifest, const FileEntry& entry) {
  const fs::path csv = manifest.resolve(entry.path);
  const fs::path cache = cache_path_for(csv);
  std::error_code ec;
  if (fs::exists(cache, ec) && fs::last_write_time(cache, ec) >= fs::last_write_time(csv, ec)) {
    try {
      Recording rec = read_cache(cache);
      if (rec.source_ids() == [&] {
            std::vector<std::string> ids;
            for (const auto& [col, src] : entry.source_columns) ids.push_back(src);
            return ids;
          }()) {
        return rec;
      }
    } catch (const Error&) {
      // stale or corrupt cache: fall through and regenerate
    }
  }
  Recording rec = read_recording(manifest, entry);
  write_cache(rec, cache);
  return rec;
}

std::vector<Recording> read_all(const Manifest& manifest, bool use_cache) {
  std::vector<Recording> out;
  out.reserve(manifest.files.size());
  for (const auto& entry : manifest.files) {
    out.push_back(use_cache ? read_recording_cached(manifest, entry)
                            : read_recording(manifest, entry));
  }
  return out;
}

}  // namespace selemb::ingest
