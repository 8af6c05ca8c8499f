#include "qaforge/train_math.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "qaforge/errors.hpp"
#include "qaforge/parallel.hpp"
#include "qaforge/rng.hpp"

namespace qaforge {

namespace {

void check_distribution(std::span<const double> probs, std::size_t true_class) {
    if (probs.empty()) throw PreconditionError("empty probability vector");
    if (true_class >= probs.size()) throw PreconditionError("true class out of range");
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw PreconditionError("probabilities must lie in [0, 1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw PreconditionError("probabilities must sum to 1");
}

double clamp_probability(double p, bool& clamped) {
    clamped = p < kProbabilityEpsilon;
    return clamped ? kProbabilityEpsilon : p;
}

double alpha_for(const FocalParams& params, std::size_t classes, std::size_t true_class) {
    if (!std::isfinite(params.gamma) || params.gamma < 0.0) throw PreconditionError("gamma must be finite and >= 0");
    if (params.alpha.empty()) return 1.0;
    if (params.alpha.size() != classes) throw PreconditionError("alpha must have one entry per class");
    const double a = params.alpha[true_class];
    if (!(a > 0.0 && a <= 1.0)) throw PreconditionError("alpha entries must lie in (0, 1]");
    return a;
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return d;
}

}  // namespace

LossValue cross_entropy(std::span<const double> class_probs, std::size_t true_class, std::span<const double> weights) {
    check_distribution(class_probs, true_class);
    if (!weights.empty() && weights.size() != class_probs.size()) {
        throw PreconditionError("weights must have one entry per class");
    }
    LossValue out;
    const double p = clamp_probability(class_probs[true_class], out.clamped);
    const double w = weights.empty() ? 1.0 : weights[true_class];
    out.value = -w * std::log(p);
    return out;
}

std::vector<double> inverse_frequency_alpha(std::span<const std::size_t> class_counts) {
    std::vector<double> alpha(class_counts.size(), 1.0);
    std::size_t rarest = SIZE_MAX;
    for (auto c : class_counts) {
        if (c == 0) throw PreconditionError("every class needs at least one example");
        rarest = std::min(rarest, c);
    }
    for (std::size_t i = 0; i < class_counts.size(); ++i) {
        alpha[i] = static_cast<double>(rarest) / static_cast<double>(class_counts[i]);
    }
    return alpha;
}

LossValue focal_loss(std::span<const double> class_probs, std::size_t true_class, const FocalParams& params) {
    check_distribution(class_probs, true_class);
    const double alpha = alpha_for(params, class_probs.size(), true_class);
    LossValue out;
    const double p = clamp_probability(class_probs[true_class], out.clamped);
    out.value = -alpha * std::pow(1.0 - p, params.gamma) * std::log(p);
    return out;
}

std::vector<double> focal_loss_gradient(std::span<const double> class_probs, std::size_t true_class,
                                        const FocalParams& params) {
    check_distribution(class_probs, true_class);
    const double alpha = alpha_for(params, class_probs.size(), true_class);
    bool clamped = false;
    const double p = clamp_probability(class_probs[true_class], clamped);
    const double g = params.gamma;
    std::vector<double> grad(class_probs.size(), 0.0);
    if (p == 1.0) {
        // (1-p)^g / p vanishes for g > 0; the log term's limit is zero as well.
        grad[true_class] = g == 0.0 ? -alpha : 0.0;
        return grad;
    }
    const double q = 1.0 - p;
    const double focusing = g == 0.0 ? 0.0 : g * std::pow(q, g - 1.0) * std::log(p);
    grad[true_class] = alpha * (focusing - std::pow(q, g) / p);
    return grad;
}

double combine_multitask(double span_loss, double cls_loss, double cls_weight) {
    if (!std::isfinite(span_loss) || !std::isfinite(cls_loss)) throw PreconditionError("losses must be finite");
    if (!(cls_weight >= 0.0)) throw PreconditionError("cls_weight must be >= 0");
    return span_loss + cls_weight * cls_loss;
}

std::vector<SmoteSample> smote_oversample(const std::vector<std::vector<double>>& minority,
                                          std::size_t majority_count, const SmoteParams& params) {
    const std::size_t m = minority.size();
    if (m < 2) throw PreconditionError("SMOTE needs at least two minority points");
    if (params.k < 1 || params.k >= m) {
        throw PreconditionError("SMOTE k must satisfy 1 <= k < minority size (" + std::to_string(m) + ")");
    }
    const std::size_t dim = minority.front().size();
    for (const auto& x : minority) {
        if (x.size() != dim) throw PreconditionError("SMOTE minority points differ in dimension");
    }
    if (params.fixed_lambda && !(*params.fixed_lambda >= 0.0 && *params.fixed_lambda <= 1.0)) {
        throw PreconditionError("fixed lambda must lie in [0, 1]");
    }

    // k nearest neighbours of each point; ties broken by index.
    std::vector<std::vector<std::size_t>> neighbours(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<std::pair<double, std::size_t>> d;
        d.reserve(m - 1);
        for (std::size_t j = 0; j < m; ++j) {
            if (j != i) d.emplace_back(squared_distance(minority[i], minority[j]), j);
        }
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(params.k), d.end());
        for (std::size_t n = 0; n < params.k; ++n) neighbours[i].push_back(d[n].second);
    }

    std::vector<SmoteSample> out;
    if (majority_count <= m) return out;
    const std::size_t needed = majority_count - m;
    out.reserve(needed);
    PortableRng rng(params.seed);
    for (std::size_t s = 0; s < needed; ++s) {
        const std::size_t base = s % m;
        const std::size_t nn = neighbours[base][static_cast<std::size_t>(rng.below(params.k))];
        const double lambda = params.fixed_lambda ? *params.fixed_lambda : rng.uniform01();
        SmoteSample sample{std::vector<double>(dim), base, nn, lambda};
        for (std::size_t d = 0; d < dim; ++d) {
            sample.point[d] = minority[base][d] + lambda * (minority[nn][d] - minority[base][d]);
        }
        out.push_back(std::move(sample));
    }
    return out;
}

ThresholdTuneResult tune_null_threshold(const SquadDataset& dataset, const PredictionMap& predictions,
                                        std::size_t jobs) {
    // Fails early, listing every missing id.
    score_items(dataset, predictions, std::nullopt);

    std::set<double> scores;
    dataset.for_each_qa([&](const Paragraph&, const QaItem& q) { scores.insert(predictions.find(q.id)->second.null_score); });
    std::vector<double> candidates;
    if (scores.empty()) {
        candidates.push_back(0.0);
    } else {
        candidates.push_back(*scores.begin() - 1.0);
        candidates.insert(candidates.end(), scores.begin(), scores.end());
        candidates.push_back(*scores.rbegin() + 1.0);
    }

    std::vector<double> f1(candidates.size());
    parallel_for(candidates.size(), jobs,
                 [&](std::size_t i) { f1[i] = evaluate_qa(dataset, predictions, candidates[i]).f1; });

    ThresholdTuneResult r;
    std::size_t best = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        r.sweep.emplace_back(candidates[i], f1[i]);
        if (f1[i] > f1[best]) best = i;
    }
    r.best_threshold = candidates[best];
    r.best_overall_f1 = f1[best];
    return r;
}

std::string sweep_to_csv(const ThresholdTuneResult& r) {
    std::ostringstream out;
    out.precision(17);
    out << "threshold,f1\n";
    for (const auto& [t, f] : r.sweep) out << t << ',' << f << '\n';
    return out.str();
}

nlohmann::json to_json(const ThresholdTuneResult& r) {
    nlohmann::json sweep = nlohmann::json::array();
    for (const auto& [t, f] : r.sweep) sweep.push_back({{"threshold", t}, {"f1", f}});
    return {{"best_threshold", r.best_threshold}, {"best_overall_f1", r.best_overall_f1}, {"sweep", sweep}};
}

}  // namespace qaforge
