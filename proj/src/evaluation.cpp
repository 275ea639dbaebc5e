#include "sawtooth/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include "sawtooth/text_io.hpp"

namespace sawtooth {

namespace {

std::vector<double> channel_spectrum(std::span<const double> x) {
  const std::size_t n = x.size();
  const std::size_t bins = n / 2 + 1;
  std::vector<double> power(bins, 0.0);
  for (std::size_t f = 0; f < bins; ++f) {
    double re = 0.0;
    double im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      // (f * i) mod n keeps the angle argument small and exact for long series.
      const double angle = 2.0 * std::numbers::pi * static_cast<double>((f * i) % n) /
                           static_cast<double>(n);
      re += x[i] * std::cos(angle);
      im -= x[i] * std::sin(angle);
    }
    power[f] = re * re + im * im;
  }
  double total = 0.0;
  for (double p : power) total += p;
  if (total > 0.0) {
    for (double& p : power) p /= total;
  } else {
    std::fill(power.begin(), power.end(), 1.0 / static_cast<double>(bins));
  }
  return power;
}

std::vector<double> flat_features(const TimeSeries& x) {
  std::vector<double> out;
  for (const auto& channel : periodogram(x)) out.insert(out.end(), channel.begin(), channel.end());
  return out;
}

}  // namespace

Spectrum periodogram(const TimeSeries& x) {
  if (x.length() < 2) throw std::invalid_argument("periodogram: length must be >= 2");
  if (!x.all_finite()) throw std::invalid_argument("periodogram: non-finite input");
  Spectrum out;
  out.reserve(x.channels());
  for (std::size_t c = 0; c < x.channels(); ++c) out.push_back(channel_spectrum(x.channel(c)));
  return out;
}

double spectral_similarity(const Spectrum& a, const Spectrum& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("spectral_similarity: shape mismatch");
  double total = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    if (a[c].size() != b[c].size()) throw std::invalid_argument("spectral_similarity: shape mismatch");
    double bc = 0.0;
    for (std::size_t f = 0; f < a[c].size(); ++f) bc += std::sqrt(a[c][f] * b[c][f]);
    total += bc;
  }
  return std::clamp(total / static_cast<double>(a.size()), 0.0, 1.0);
}

double psd_similarity(const TimeSeries& a, const TimeSeries& b) {
  require_same_shape(a, b, "psd_similarity");
  return spectral_similarity(periodogram(a), periodogram(b));
}

Match nearest_real_match(const TimeSeries& generated, std::span<const TimeSeries> real_set) {
  return SpectralIndex(real_set).nearest(generated);
}

SpectralIndex::SpectralIndex(std::span<const TimeSeries> real_set) {
  if (real_set.empty()) throw std::invalid_argument("nearest_real_match: empty real set");
  channels_ = real_set.front().channels();
  length_ = real_set.front().length();
  spectra_.reserve(real_set.size());
  for (const auto& x : real_set) {
    require_same_shape(x, real_set.front(), "SpectralIndex");
    spectra_.push_back(periodogram(x));
  }
}

Match SpectralIndex::nearest(const TimeSeries& generated) const {
  if (generated.channels() != channels_ || generated.length() != length_) {
    throw std::invalid_argument("nearest_real_match: shape mismatch with the real set");
  }
  const auto spectrum = periodogram(generated);
  Match best{0, -1.0};
  for (std::size_t i = 0; i < spectra_.size(); ++i) {
    const double s = spectral_similarity(spectrum, spectra_[i]);
    if (s > best.score) best = {i, s};
  }
  return best;
}

StepCurve per_step_curve(const Trajectory& trajectory, std::span<const TimeSeries> real_set) {
  StepCurve curve;
  if (trajectory.steps.empty()) return curve;
  if (trajectory.states.size() != trajectory.steps.size() + 1) {
    throw std::invalid_argument("per_step_curve: trajectory has no recorded intermediate states");
  }
  const SpectralIndex index(real_set);
  curve.reserve(trajectory.steps.size());
  for (std::size_t j = 0; j < trajectory.steps.size(); ++j) {
    const auto match = index.nearest(trajectory.states[j + 1]);
    curve.push_back({j + 1, trajectory.steps[j].iteration, match.score, match.index});
  }
  return curve;
}

void write_step_curve(std::ostream& out, const StepCurve& curve) {
  out << "#sawtooth-stepcurve v1\n"
      << "step,iteration,score,match_id\n";
  for (const auto& p : curve) {
    out << p.step << ',' << p.iteration << ',' << format_double(p.score) << ',' << p.match_id << '\n';
  }
}

NearestCentroidClassifier::NearestCentroidClassifier(const LabeledDataset& train) {
  train.validate();
  if (train.samples.empty()) throw std::invalid_argument("classifier: empty training set");
  channels_ = train.samples.front().channels();
  length_ = train.samples.front().length();
  std::map<int, std::pair<std::vector<double>, std::size_t>> sums;
  for (std::size_t i = 0; i < train.samples.size(); ++i) {
    const auto features = flat_features(train.samples[i]);
    auto& [sum, count] = sums[train.labels[i]];
    if (sum.empty()) sum.assign(features.size(), 0.0);
    for (std::size_t k = 0; k < features.size(); ++k) sum[k] += features[k];
    ++count;
  }
  for (auto& [label, entry] : sums) {
    auto& [sum, count] = entry;
    for (double& v : sum) v /= static_cast<double>(count);
    labels_.push_back(label);
    centroids_.push_back(std::move(sum));
  }
}

int NearestCentroidClassifier::predict(const TimeSeries& x) const {
  if (x.channels() != channels_ || x.length() != length_) {
    throw std::invalid_argument("classifier: input shape differs from the training data");
  }
  const auto features = flat_features(x);
  std::size_t best = 0;
  double best_dist = INFINITY;
  for (std::size_t c = 0; c < centroids_.size(); ++c) {
    double d = 0.0;
    for (std::size_t k = 0; k < features.size(); ++k) {
      const double diff = features[k] - centroids_[c][k];
      d += diff * diff;
    }
    if (d < best_dist) {
      best_dist = d;
      best = c;
    }
  }
  return labels_[best];
}

ClassificationMetrics metrics_from_confusion(std::vector<int> labels,
                                             std::vector<std::vector<std::size_t>> confusion) {
  const std::size_t k = labels.size();
  if (k == 0 || confusion.size() != k) throw std::invalid_argument("metrics: confusion shape mismatch");
  for (const auto& row : confusion) {
    if (row.size() != k) throw std::invalid_argument("metrics: confusion shape mismatch");
  }
  ClassificationMetrics m;
  m.labels = std::move(labels);
  m.confusion = std::move(confusion);
  m.precision.assign(k, 0.0);
  m.recall.assign(k, 0.0);
  m.f1.assign(k, 0.0);

  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t present = 0;
  double f1_sum = 0.0;
  double log_recall_sum = 0.0;
  bool zero_recall = false;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t actual = 0;
    std::size_t predicted = 0;
    for (std::size_t j = 0; j < k; ++j) {
      actual += m.confusion[c][j];
      predicted += m.confusion[j][c];
    }
    const auto tp = m.confusion[c][c];
    total += actual;
    correct += tp;
    if (predicted > 0) m.precision[c] = static_cast<double>(tp) / static_cast<double>(predicted);
    if (actual > 0) m.recall[c] = static_cast<double>(tp) / static_cast<double>(actual);
    if (tp > 0) m.f1[c] = 2.0 * m.precision[c] * m.recall[c] / (m.precision[c] + m.recall[c]);
    if (actual > 0) {
      ++present;
      f1_sum += m.f1[c];
      if (m.recall[c] == 0.0) {
        zero_recall = true;
      } else {
        log_recall_sum += std::log(m.recall[c]);
      }
    }
  }
  if (total == 0 || present == 0) throw std::invalid_argument("metrics: empty confusion matrix");
  m.macro_f1 = f1_sum / static_cast<double>(present);
  m.gmean = zero_recall ? 0.0 : std::exp(log_recall_sum / static_cast<double>(present));
  m.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  return m;
}

ClassificationMetrics tstr_evaluate(const LabeledDataset& synthetic_train,
                                    const LabeledDataset& real_test) {
  synthetic_train.validate();
  real_test.validate();
  if (real_test.samples.empty()) throw std::invalid_argument("tstr: empty test set");
  if (synthetic_train.class_counts().size() < 2) {
    throw std::invalid_argument("tstr: training set needs at least 2 classes");
  }
  const NearestCentroidClassifier classifier(synthetic_train);
  const auto& labels = classifier.labels();
  auto position = [&](int label) -> std::size_t {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) {
      throw std::invalid_argument("tstr: test label " + std::to_string(label) +
                                  " is absent from the training set");
    }
    return static_cast<std::size_t>(it - labels.begin());
  };
  std::vector<std::vector<std::size_t>> confusion(labels.size(),
                                                  std::vector<std::size_t>(labels.size(), 0));
  for (std::size_t i = 0; i < real_test.samples.size(); ++i) {
    const auto truth = position(real_test.labels[i]);
    const auto predicted = position(classifier.predict(real_test.samples[i]));
    ++confusion[truth][predicted];
  }
  return metrics_from_confusion(labels, std::move(confusion));
}

double tstr_evaluate(const LabeledDataset& synthetic_train, const LabeledDataset& real_test,
                     TstrMetric metric) {
  const auto m = tstr_evaluate(synthetic_train, real_test);
  return metric == TstrMetric::macro_f1 ? m.macro_f1 : m.gmean;
}

void write_tstr_summary(std::ostream& out, const ClassificationMetrics& metrics) {
  out << "[tstr]\n"
      << "macro_f1 = " << format_double(metrics.macro_f1) << "\n"
      << "gmean = " << format_double(metrics.gmean) << "\n"
      << "accuracy = " << format_double(metrics.accuracy) << "\n";
  for (std::size_t c = 0; c < metrics.labels.size(); ++c) {
    out << "f1." << metrics.labels[c] << " = " << format_double(metrics.f1[c]) << "\n";
  }
  for (std::size_t c = 0; c < metrics.labels.size(); ++c) {
    out << "recall." << metrics.labels[c] << " = " << format_double(metrics.recall[c]) << "\n";
  }
}

}  // namespace sawtooth
