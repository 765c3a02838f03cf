#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

namespace selemb::signal {

// One sensor channel of a simultaneously-sampled recording.
struct SourceStream {
  std::vector<double> samples;
  double rate = 0.0;  // Hz
  std::string source_id;
  int class_id = 0;
  std::string domain_id;
  std::string file_id;
};

// Fixed-length non-overlapping window of one stream. Window `index` covers
// parent samples [index*L, (index+1)*L).
struct Segment {
  std::vector<double> values;
  std::string source_id;
  int class_id = 0;
  std::string domain_id;
  std::string file_id;
  size_t index = 0;
};

// One-sided magnitude spectrum of a segment: bins[k-1] = |X_k| for
// k = 1..L/2. The DC bin is dropped, so a 1024-sample segment yields
// 512 features.
struct Spectrum {
  std::vector<double> bins;
  std::string source_id;
  int class_id = 0;
  std::string domain_id;
  std::string file_id;
  size_t index = 0;
};

enum class StandardizeMode { none, per_segment_zscore };

constexpr size_t kDefaultSegmentLength = 1024;

// Throws Error(validation) on invariant violations (empty, non-finite, bad rate).
void validate_stream(const SourceStream& stream);

size_t segment_count(const SourceStream& stream, size_t length);

// Window `index` of the stream; metadata propagated from the parent.
Segment extract_segment(const SourceStream& stream, size_t length, size_t index);

// All full windows in index order; trailing remainder samples are discarded.
// Throws Error(no_full_window) when the stream holds fewer than `length`
// samples, Error(invalid_argument) when length < 2.
std::vector<Segment> segment_stream(const SourceStream& stream, size_t length);

// In-place radix-2 FFT; x.size() must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& x);

// Full two-sided DFT of a real signal. Used internally by fft_magnitude and
// exposed so callers can check energy identities on the complete transform.
std::vector<std::complex<double>> fft_full(const std::vector<double>& x);

// Magnitudes of bins 1..L/2 (unscaled). Segment length must be a power of two.
Spectrum fft_magnitude(const Segment& segment);

// `none` is the identity; `per_segment_zscore` subtracts the bin mean and
// divides by the population std, floored at 1e-12.
Spectrum standardize(const Spectrum& spectrum, StandardizeMode mode);

StandardizeMode standardize_mode_from_string(const std::string& name);
std::string to_string(StandardizeMode mode);

}  // namespace selemb::signal
