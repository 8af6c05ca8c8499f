#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qaforge/metrics.hpp"
#include "qaforge/squad.hpp"

namespace qaforge {

inline constexpr double kProbabilityEpsilon = 1e-12;

struct LossValue {
    double value = 0.0;
    bool clamped = false;  // p_t was below kProbabilityEpsilon and got clamped
};

// -w_t log p_t. `weights` may be empty (all ones). Probabilities must sum to
// one within 1e-9.
LossValue cross_entropy(std::span<const double> class_probs, std::size_t true_class,
                        std::span<const double> weights = {});

struct FocalParams {
    double gamma = 2.0;
    std::vector<double> alpha;  // one weight in (0, 1] per class
};

// Per-class alpha proportional to inverse class frequency, scaled so the
// rarest class gets 1.
std::vector<double> inverse_frequency_alpha(std::span<const std::size_t> class_counts);

// -alpha_t (1 - p_t)^gamma log p_t
LossValue focal_loss(std::span<const double> class_probs, std::size_t true_class, const FocalParams& params);

// d focal / d p_k. Only the true-class entry is non-zero.
std::vector<double> focal_loss_gradient(std::span<const double> class_probs, std::size_t true_class,
                                        const FocalParams& params);

// span_loss + cls_weight * cls_loss
double combine_multitask(double span_loss, double cls_loss, double cls_weight = 1.0);

struct SmoteParams {
    std::size_t k = 5;
    std::uint64_t seed = 0;
    std::optional<double> fixed_lambda;  // test hook: use this interpolation factor for every sample
};

struct SmoteSample {
    std::vector<double> point;
    std::size_t base = 0;      // index of x_i in the minority set
    std::size_t neighbor = 0;  // index of the chosen neighbour
    double lambda = 0.0;
};

// Emits majority_count - minority.size() synthetic minority points (none if the
// minority is not smaller). Base points are visited round-robin; each sample
// interpolates towards one of the base's k nearest minority neighbours.
std::vector<SmoteSample> smote_oversample(const std::vector<std::vector<double>>& minority,
                                          std::size_t majority_count, const SmoteParams& params);

struct ThresholdTuneResult {
    double best_threshold = 0.0;
    double best_overall_f1 = 0.0;
    std::vector<std::pair<double, double>> sweep;  // (threshold, overall F1), ascending threshold
};

// Candidates are the distinct null scores plus one sentinel below the
// minimum and one above the maximum. Ties go to the smaller threshold.
ThresholdTuneResult tune_null_threshold(const SquadDataset& dataset, const PredictionMap& predictions,
                                        std::size_t jobs = 1);

std::string sweep_to_csv(const ThresholdTuneResult& r);
nlohmann::json to_json(const ThresholdTuneResult& r);

}  // namespace qaforge
