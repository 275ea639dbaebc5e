#include "sawtooth/data.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>

#include "sawtooth/seeds.hpp"
#include "sawtooth/text_io.hpp"

namespace sawtooth {

namespace {

constexpr std::string_view kDatasetTag = "#sawtooth-dataset v1";
constexpr std::string_view kClassesPrefix = "#classes ";

std::vector<double> cyclic_signal(std::size_t class_id, std::size_t channel, std::size_t length) {
  std::vector<double> signal(length, 0.0);
  const double amplitudes[2] = {1.0, 0.8 - 0.2 * static_cast<double>(channel % 3)};
  for (int m = 0; m < 2; ++m) {
    const double freq = cyclic_bin(class_id, channel, m);
    const double phase = 0.7 * static_cast<double>(class_id) + 1.3 * static_cast<double>(channel) + 0.5 * m;
    for (std::size_t i = 0; i < length; ++i) {
      signal[i] += amplitudes[m] *
                   std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) /
                                static_cast<double>(length) + phase);
    }
  }
  return signal;
}

TimeSeries noisy_cyclic_sample(std::size_t class_id, std::size_t channels, std::size_t length,
                               double noise_level, Rng& rng) {
  TimeSeries x(channels, length);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t ch = 0; ch < channels; ++ch) {
    const auto signal = cyclic_signal(class_id, ch, length);
    for (std::size_t i = 0; i < length; ++i) {
      x(ch, i) = signal[i] + (noise_level > 0.0 ? noise_level * normal(rng) : 0.0);
    }
  }
  return x;
}

void check_cyclic_shape(std::size_t n_classes, std::size_t channels, std::size_t length,
                        double noise_level) {
  if (channels == 0 || length == 0) throw std::invalid_argument("cyclic data: degenerate dimensions");
  const auto top = static_cast<std::size_t>(cyclic_bin(n_classes - 1, channels - 1, 1));
  if (length <= 2 * top) {
    throw std::invalid_argument("cyclic data: length " + std::to_string(length) +
                                " too short for " + std::to_string(n_classes) +
                                " classes (needs > " + std::to_string(2 * top) + ")");
  }
  if (!(noise_level >= 0.0) || !std::isfinite(noise_level)) {
    throw std::invalid_argument("cyclic data: noise_level must be finite and >= 0");
  }
}

[[noreturn]] void fail(std::size_t line, const std::string& message) { throw CsvError(line, message); }

}  // namespace

void LabeledDataset::validate() const {
  if (samples.size() != labels.size()) {
    throw std::invalid_argument("dataset: " + std::to_string(samples.size()) + " samples but " +
                                std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!samples[i].same_shape(samples[0])) {
      throw std::invalid_argument("dataset: sample " + std::to_string(i) + " has a different shape");
    }
  }
  for (int label : labels) {
    if (!class_names.contains(label)) {
      throw std::invalid_argument("dataset: label " + std::to_string(label) + " has no class name");
    }
  }
  const auto counts = class_counts();
  for (const auto& [id, name] : class_names) {
    if (!counts.contains(id)) {
      throw std::invalid_argument("dataset: declared class " + std::to_string(id) + " (" + name +
                                  ") has no samples");
    }
  }
}

std::vector<TimeSeries> LabeledDataset::samples_of(int label) const {
  std::vector<TimeSeries> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (labels[i] == label) out.push_back(samples[i]);
  }
  return out;
}

std::map<int, std::size_t> LabeledDataset::class_counts() const {
  std::map<int, std::size_t> counts;
  for (int label : labels) ++counts[label];
  return counts;
}

LabeledDataset gen_gaussian(const GaussianDataSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("gen_gaussian: n must be >= 1");
  LabeledDataset ds;
  Rng rng(seed);
  ds.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ds.samples.push_back(spec.draw(rng));
  ds.labels.assign(n, 0);
  ds.class_names = {{0, "gaussian"}};
  return ds;
}

int cyclic_bin(std::size_t class_id, std::size_t /*channel*/, int component) {
  return 1 + 2 * static_cast<int>(class_id) + component;
}

LabeledDataset gen_cyclic_classes(const CyclicOptions& options) {
  if (options.n_classes < 2) throw std::invalid_argument("gen_cyclic_classes: need at least 2 classes");
  if (options.per_class == 0) throw std::invalid_argument("gen_cyclic_classes: per_class must be >= 1");
  check_cyclic_shape(options.n_classes, options.channels, options.length, options.noise_level);
  LabeledDataset ds;
  Rng rng(options.seed);
  for (std::size_t c = 0; c < options.n_classes; ++c) {
    ds.class_names[static_cast<int>(c)] = "class" + std::to_string(c);
    for (std::size_t i = 0; i < options.per_class; ++i) {
      ds.samples.push_back(
          noisy_cyclic_sample(c, options.channels, options.length, options.noise_level, rng));
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  return ds;
}

LabeledDataset gen_imbalanced(const ImbalancedOptions& options) {
  if (!(options.minority_fraction > 0.0 && options.minority_fraction < 0.5)) {
    throw std::invalid_argument("gen_imbalanced: minority_fraction must lie in (0, 0.5)");
  }
  const auto minority =
      static_cast<std::size_t>(std::llround(options.minority_fraction * static_cast<double>(options.total)));
  if (minority == 0 || minority >= options.total) {
    throw std::invalid_argument("gen_imbalanced: total " + std::to_string(options.total) +
                                " leaves an empty class at fraction " +
                                format_double(options.minority_fraction));
  }
  check_cyclic_shape(2, options.channels, options.length, options.noise_level);
  LabeledDataset ds;
  ds.class_names = {{0, "minority"}, {1, "majority"}};
  Rng rng(options.seed);
  const std::size_t counts[2] = {minority, options.total - minority};
  for (int c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) {
      ds.samples.push_back(noisy_cyclic_sample(static_cast<std::size_t>(c), options.channels,
                                               options.length, options.noise_level, rng));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

CsvError::CsvError(std::size_t line, const std::string& message, const std::string& source)
    : std::runtime_error((source.empty() ? "line " : source + ":") + std::to_string(line) + ": " +
                         message),
      line_(line),
      message_(message) {}

void write_csv(std::ostream& out, const LabeledDataset& dataset) {
  dataset.validate();
  if (dataset.samples.empty()) throw std::invalid_argument("write_csv: empty dataset");
  for (const auto& [id, name] : dataset.class_names) {
    if (name.empty() || name.find_first_of(",:\n\r") != std::string::npos) {
      throw std::invalid_argument("write_csv: class name '" + name + "' must be non-empty without ',' or ':'");
    }
  }
  out << kDatasetTag << "\n" << kClassesPrefix;
  bool first = true;
  for (const auto& [id, name] : dataset.class_names) {
    out << (first ? "" : ",") << id << ':' << name;
    first = false;
  }
  out << "\nsample,channel,label";
  const std::size_t length = dataset.samples.front().length();
  for (std::size_t i = 0; i < length; ++i) out << ",t" << i;
  out << "\n";
  for (std::size_t s = 0; s < dataset.samples.size(); ++s) {
    const auto& x = dataset.samples[s];
    for (std::size_t ch = 0; ch < x.channels(); ++ch) {
      out << s << ',' << ch << ',' << dataset.labels[s];
      for (double v : x.channel(ch)) out << ',' << format_double(v);
      out << "\n";
    }
  }
}

LabeledDataset read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line()) fail(1, "empty file");
  if (trim(line) != kDatasetTag) fail(line_no, "expected format tag '" + std::string(kDatasetTag) + "'");

  LabeledDataset ds;
  if (!next_line() || !line.starts_with(kClassesPrefix)) fail(line_no, "expected '#classes' line");
  for (auto entry : split(std::string_view(line).substr(kClassesPrefix.size()), ',')) {
    const auto colon = entry.find(':');
    if (colon == std::string_view::npos) fail(line_no, "class entry '" + std::string(entry) + "' lacks ':'");
    const auto id = parse_int(entry.substr(0, colon));
    const auto name = trim(entry.substr(colon + 1));
    if (!id || name.empty()) fail(line_no, "bad class entry '" + std::string(entry) + "'");
    if (!ds.class_names.emplace(static_cast<int>(*id), std::string(name)).second) {
      fail(line_no, "duplicate class id " + std::to_string(*id));
    }
  }

  if (!next_line()) fail(line_no + 1, "missing header row");
  const auto header = split(line, ',');
  if (header.size() < 4 || trim(header[0]) != "sample" || trim(header[1]) != "channel" ||
      trim(header[2]) != "label") {
    fail(line_no, "header must start with sample,channel,label and name at least one time column");
  }
  const std::size_t length = header.size() - 3;

  struct Pending {
    long long sample;
    int label;
    std::vector<double> values;
    std::size_t channels;
    std::size_t first_line;
  };
  std::optional<Pending> pending;
  std::optional<std::size_t> channels;

  auto flush = [&] {
    if (!pending) return;
    if (!channels) channels = pending->channels;
    if (pending->channels != *channels) {
      fail(pending->first_line, "sample " + std::to_string(pending->sample) + " has " +
                        std::to_string(pending->channels) + " channels, expected " +
                        std::to_string(*channels));
    }
    ds.samples.emplace_back(*channels, length, std::move(pending->values));
    ds.labels.push_back(pending->label);
    pending.reset();
  };

  while (next_line()) {
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) {
      fail(line_no, "expected " + std::to_string(header.size()) + " columns, found " +
                        std::to_string(cells.size()));
    }
    const auto sample = parse_int(cells[0]);
    const auto channel = parse_int(cells[1]);
    const auto label = parse_int(cells[2]);
    if (!sample || !channel || !label || *sample < 0 || *channel < 0) {
      fail(line_no, "sample, channel and label must be non-negative integers");
    }
    if (!ds.class_names.contains(static_cast<int>(*label))) {
      fail(line_no, "unknown label " + std::to_string(*label));
    }
    if (!pending || pending->sample != *sample) {
      if (pending && *sample != pending->sample + 1) {
        fail(line_no, "sample ids must be consecutive (got " + std::to_string(*sample) + " after " +
                          std::to_string(pending->sample) + ")");
      }
      if (!pending && static_cast<std::size_t>(*sample) != ds.samples.size()) {
        fail(line_no, "sample ids must start at 0 and be consecutive");
      }
      flush();
      if (*channel != 0) fail(line_no, "sample " + std::to_string(*sample) + " must start at channel 0");
      pending = Pending{*sample, static_cast<int>(*label), {}, 0, line_no};
    } else {
      if (static_cast<std::size_t>(*channel) != pending->channels) {
        fail(line_no, "channels of sample " + std::to_string(*sample) + " must be consecutive");
      }
      if (static_cast<int>(*label) != pending->label) {
        fail(line_no, "label changes within sample " + std::to_string(*sample));
      }
    }
    for (std::size_t i = 3; i < cells.size(); ++i) {
      const auto v = parse_double(cells[i]);
      if (!v || !std::isfinite(*v)) {
        fail(line_no, "column " + std::to_string(i + 1) + ": not a finite number: '" +
                          std::string(trim(cells[i])) + "'");
      }
      pending->values.push_back(*v);
    }
    ++pending->channels;
  }
  flush();

  if (ds.samples.empty()) fail(line_no, "no data rows");
  try {
    ds.validate();
  } catch (const std::invalid_argument& e) {
    fail(line_no, e.what());
  }
  return ds;
}

void save_csv(const LabeledDataset& dataset, const std::filesystem::path& path) {
  write_file_atomically(path, [&](std::ostream& out) { write_csv(out, dataset); });
}

LabeledDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_csv(in);
  } catch (const CsvError& e) {
    throw CsvError(e.line(), e.message(), path.string());
  }
}

}  // namespace sawtooth
