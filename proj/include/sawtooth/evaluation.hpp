#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "sawtooth/data.hpp"
#include "sawtooth/sampler.hpp"
#include "sawtooth/time_series.hpp"

namespace sawtooth {

/// Per-channel spectra over bins 0..floor(L/2), each normalized to unit sum.
/// An all-zero channel maps to the uniform spectrum.
using Spectrum = std::vector<std::vector<double>>;

Spectrum periodogram(const TimeSeries& x);

/// Mean over channels of the Bhattacharyya coefficient sum_f sqrt(p_f q_f),
/// clamped to [0, 1].
double spectral_similarity(const Spectrum& a, const Spectrum& b);

/// PSD-agreement score in [0, 1]; 1 for identical spectra.
double psd_similarity(const TimeSeries& a, const TimeSeries& b);

struct Match {
  std::size_t index;
  double score;
};

/// Highest-scoring real sequence; ties go to the lowest index.
Match nearest_real_match(const TimeSeries& generated, std::span<const TimeSeries> real_set);

/// Precomputed spectra of a fixed reference set.
class SpectralIndex {
 public:
  explicit SpectralIndex(std::span<const TimeSeries> real_set);
  Match nearest(const TimeSeries& generated) const;
  std::size_t size() const noexcept { return spectra_.size(); }

 private:
  std::vector<Spectrum> spectra_;
  std::size_t channels_;
  std::size_t length_;
};

struct StepCurvePoint {
  std::size_t step;  // 1-based global transition index
  int iteration;
  double score;
  std::size_t match_id;
};

using StepCurve = std::vector<StepCurvePoint>;

/// Scores the state after every transition of `trajectory` against its
/// nearest real sequence.
StepCurve per_step_curve(const Trajectory& trajectory, std::span<const TimeSeries> real_set);

// StepCurve CSV:
//   #sawtooth-stepcurve v1
//   step,iteration,score,match_id
void write_step_curve(std::ostream& out, const StepCurve& curve);

/// Nearest-centroid classifier over concatenated normalized channel spectra.
class NearestCentroidClassifier {
 public:
  explicit NearestCentroidClassifier(const LabeledDataset& train);
  int predict(const TimeSeries& x) const;
  const std::vector<int>& labels() const noexcept { return labels_; }

 private:
  std::vector<int> labels_;
  std::vector<std::vector<double>> centroids_;
  std::size_t channels_;
  std::size_t length_;
};

struct ClassificationMetrics {
  std::vector<int> labels;                       // classes scored, ascending
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted], indexed like labels
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  double macro_f1 = 0.0;
  double gmean = 0.0;
  double accuracy = 0.0;
};

/// Metrics from a confusion matrix over `labels`. Per-class scores with a zero
/// denominator count as 0. Macro-F1 and the geometric mean run over classes
/// with at least one true sample.
ClassificationMetrics metrics_from_confusion(std::vector<int> labels,
                                             std::vector<std::vector<std::size_t>> confusion);

enum class TstrMetric { macro_f1, gmean };

/// Fits the nearest-centroid classifier on `synthetic_train` and scores it on
/// `real_test`.
ClassificationMetrics tstr_evaluate(const LabeledDataset& synthetic_train,
                                    const LabeledDataset& real_test);
double tstr_evaluate(const LabeledDataset& synthetic_train, const LabeledDataset& real_test,
                     TstrMetric metric);

/// Key-value summary block:
///   [tstr]
///   macro_f1 = ...
///   gmean = ...
///   accuracy = ...
///   f1.<label> = ...
///   recall.<label> = ...
void write_tstr_summary(std::ostream& out, const ClassificationMetrics& metrics);

}  // namespace sawtooth
