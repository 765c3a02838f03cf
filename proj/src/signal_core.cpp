#include "selemb/signal_core.hpp"

#include <algorithm>
#include <cmath>

#include "selemb/errors.hpp"

namespace selemb::signal {

namespace {

bool is_power_of_two(size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

void copy_metadata(const Segment& from, Spectrum& to) {
  to.source_id = from.source_id;
  to.class_id = from.class_id;
  to.domain_id = from.domain_id;
  to.file_id = from.file_id;
  to.index = from.index;
}

}  // namespace

void validate_stream(const SourceStream& stream) {
  if (stream.samples.empty()) {
    raise(ErrorCode::validation, "stream '" + stream.source_id + "' of " + stream.file_id + " is empty");
  }
  if (!(stream.rate > 0.0)) {
    raise(ErrorCode::validation, "stream '" + stream.source_id + "' has non-positive rate");
  }
  for (double v : stream.samples) {
    if (!std::isfinite(v)) {
      raise(ErrorCode::validation, "stream '" + stream.source_id + "' of " + stream.file_id + " contains non-finite samples");
    }
  }
}

size_t segment_count(const SourceStream& stream, size_t length) {
  return length == 0 ? 0 : stream.samples.size() / length;
}

Segment extract_segment(const SourceStream& stream, size_t length, size_t index) {
  if (length < 2) {
    raise(ErrorCode::invalid_argument, "segment length must be >= 2");
  }
  if ((index + 1) * length > stream.samples.size()) {
    raise(ErrorCode::invalid_argument, "segment index out of range");
  }
  Segment seg;
  seg.values.assign(stream.samples.begin() + static_cast<ptrdiff_t>(index * length),
                    stream.samples.begin() + static_cast<ptrdiff_t>((index + 1) * length));
  seg.source_id = stream.source_id;
  seg.class_id = stream.class_id;
  seg.domain_id = stream.domain_id;
  seg.file_id = stream.file_id;
  seg.index = index;
  return seg;
}

std::vector<Segment> segment_stream(const SourceStream& stream, size_t length) {
  if (length < 2) {
    raise(ErrorCode::invalid_argument, "segment length must be >= 2");
  }
  const size_t count = segment_count(stream, length);
  if (count == 0) {
    raise(ErrorCode::no_full_window,
          "no full window: stream '" + stream.source_id + "' of " + stream.file_id + " has " +
              std::to_string(stream.samples.size()) + " samples, need " + std::to_string(length));
  }
  std::vector<Segment> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    out.push_back(extract_segment(stream, length, i));
  }
  return out;
}

void fft_inplace(std::vector<std::complex<double>>& x) {
  const size_t n = x.size();
  if (!is_power_of_two(n)) {
    raise(ErrorCode::invalid_argument, "FFT length must be a power of two, got " + std::to_string(n));
  }
  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = x[i + k];
        const std::complex<double> v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

std::vector<std::complex<double>> fft_full(const std::vector<double>& x) {
  std::vector<std::complex<double>> c(x.begin(), x.end());
  fft_inplace(c);
  return c;
}

Spectrum fft_magnitude(const Segment& segment) {
  const size_t n = segment.values.size();
  if (!is_power_of_two(n)) {
    raise(ErrorCode::invalid_argument,
          "segment length must be a power of two for FFT, got " + std::to_string(n));
  }
  const auto full = fft_full(segment.values);
  Spectrum spec;
  spec.bins.resize(n / 2);
  for (size_t k = 1; k <= n / 2; ++k) {
    spec.bins[k - 1] = std::abs(full[k]);
  }
  copy_metadata(segment, spec);
  return spec;
}

Spectrum standardize(const Spectrum& spectrum, StandardizeMode mode) {
  if (mode == StandardizeMode::none) return spectrum;
  Spectrum out = spectrum;
  const size_t n = out.bins.size();
  if (n == 0) return out;
  double mean = 0.0;
  for (double b : out.bins) mean += b;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double b : out.bins) var += (b - mean) * (b - mean);
  var /= static_cast<double>(n);
  const double sd = std::max(std::sqrt(var), 1e-12);
  for (double& b : out.bins) b = (b - mean) / sd;
  return out;
}

StandardizeMode standardize_mode_from_string(const std::string& name) {
  if (name == "none") return StandardizeMode::none;
  if (name == "zscore" || name == "per_segment_zscore") return StandardizeMode::per_segment_zscore;
  raise(ErrorCode::invalid_argument, "unknown standardize mode '" + name + "'");
}

std::string to_string(StandardizeMode mode) {
  return mode == StandardizeMode::none ? "none" : "zscore";
}

}  // namespace selemb::signal
