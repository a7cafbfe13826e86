#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cria/dsp.hpp"
#include "cria/rng.hpp"

namespace cria {

struct MetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::vector<int>> confusion_matrix(const std::vector<int>& preds,
                                               const std::vector<int>& labels, int num_classes);

// Mean per-class recall; classes with zero true samples are excluded.
double balanced_accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

// Rank statistic (ties counted half); labels binary, both classes required.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Precision-recall step integration over descending score thresholds.
double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels);

double cohens_kappa(const std::vector<int>& preds, const std::vector<int>& labels);

double weighted_f1(const std::vector<int>& preds, const std::vector<int>& labels);

struct MetricsReport {
    double bacc = 0.0, auroc = 0.0, pr_auc = 0.0, kappa = 0.0, f1_weighted = 0.0;
    std::vector<std::vector<int>> confusion;
};

// scores: B x K row-major; preds by argmax. AUROC / PR-AUC are binary
// for K=2 (class-1 score) and macro one-vs-rest otherwise.
MetricsReport compute_metrics(const std::vector<double>& scores, int num_classes,
                              const std::vector<int>& labels);

// ---- robustness noise ----
enum class NoiseKind { gaussian, impulse, dropout, sinusoidal_50hz };
enum class NoiseLevel { none, low, mid, high };

NoiseKind noise_kind_from_name(const std::string& name);
const char* noise_kind_name(NoiseKind k);
const char* noise_level_name(NoiseLevel l);

struct NoiseSpec {
    NoiseKind kind = NoiseKind::gaussian;
    NoiseLevel level = NoiseLevel::none;
    std::uint64_t seed = 0;
    double sample_rate = 200.0;  // used by the sinusoidal kind
};

// Numeric severity parameter for a kind/level pair (sigma, probability,
// or amplitude depending on kind).
double noise_level_value(NoiseKind kind, NoiseLevel level);

EegSlice inject_noise(const EegSlice& slice, const NoiseSpec& spec);

// ---- information-bottleneck masking oracle ----
// Plug-in mutual information (nats) of an |A| x |X| joint count table.
double mi_estimate_discrete(const std::vector<std::vector<std::int64_t>>& joint_counts);

struct MaskMiReport {
    int trials = 0;
    int passes = 0;
    double mean_mi_full = 0.0;
    double mean_mi_masked = 0.0;
};

// Monte Carlo check of I(A .* M; X) <= I(A; X) + 3 SE on a toy discrete
// channel with a Bernoulli mask.
MaskMiReport mask_mi_inequality_check(int n_trials, int n_samples, double mask_keep_prob,
                                      std::uint64_t seed);

}  // namespace cria
