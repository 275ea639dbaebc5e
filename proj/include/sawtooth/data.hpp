#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sawtooth/gaussian.hpp"
#include "sawtooth/time_series.hpp"

namespace sawtooth {

/// Shape-equal series with parallel integer labels.
struct LabeledDataset {
  std::vector<TimeSeries> samples;
  std::vector<int> labels;
  std::map<int, std::string> class_names;

  std::size_t size() const noexcept { return samples.size(); }
  /// Throws std::invalid_argument when an invariant is broken: parallel
  /// lengths, equal shapes, named labels, and at least one sample per class.
  void validate() const;
  /// Samples carrying `label`, in dataset order.
  std::vector<TimeSeries> samples_of(int label) const;
  std::map<int, std::size_t> class_counts() const;
};

/// n i.i.d. draws from N(mu, C), labelled 0 / "gaussian".
LabeledDataset gen_gaussian(const GaussianDataSpec& spec, std::size_t n, std::uint64_t seed);

struct CyclicOptions {
  std::size_t n_classes = 4;
  std::size_t channels = 3;
  std::size_t length = 64;
  std::size_t per_class = 20;
  double noise_level = 0.1;
  std::uint64_t seed = 0;
};

/// Frequency bins of component m (0 or 1) for class c on channel ch.
/// Classes occupy disjoint bins on every channel.
int cyclic_bin(std::size_t class_id, std::size_t channel, int component);

/// Class c, channel ch is a fixed two-tone mixture at cyclic_bin(c, ch, 0/1)
/// with class-specific phases, plus white noise of standard deviation
/// noise_level. Needs length > 2 * cyclic_bin(n_classes - 1, channels - 1, 1).
LabeledDataset gen_cyclic_classes(const CyclicOptions& options);

struct ImbalancedOptions {
  double minority_fraction = 0.1;
  std::size_t total = 100;
  std::size_t channels = 3;
  std::size_t length = 64;
  double noise_level = 0.1;
  std::uint64_t seed = 0;
};

/// Two cyclic classes: 0 = "minority" with round(fraction * total) samples,
/// 1 = "majority" with the rest.
LabeledDataset gen_imbalanced(const ImbalancedOptions& options);

class CsvError : public std::runtime_error {
 public:
  CsvError(std::size_t line, const std::string& message, const std::string& source = {});
  std::size_t line() const noexcept { return line_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::size_t line_;
  std::string message_;
};

// Dataset CSV layout (see docs/formats.md):
//   #sawtooth-dataset v1
//   #classes 0:name,1:name,...
//   sample,channel,label,t0,t1,...,t{L-1}
//   one row per (sample, channel); channels of a sample are consecutive rows
void write_csv(std::ostream& out, const LabeledDataset& dataset);
LabeledDataset read_csv(std::istream& in);

void save_csv(const LabeledDataset& dataset, const std::filesystem::path& path);
LabeledDataset load_csv(const std::filesystem::path& path);

}  // namespace sawtooth
