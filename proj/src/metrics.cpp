#include "cria/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cria {

namespace {

int infer_classes(const std::vector<int>& preds, const std::vector<int>& labels) {
    int k = 0;
    for (int v : preds) k = std::max(k, v + 1);
    for (int v : labels) k = std::max(k, v + 1);
    if (k < 2) k = 2;
    return k;
}

void check_paired(const std::vector<int>& preds, const std::vector<int>& labels, const char* who) {
    if (preds.size() != labels.size() || preds.empty())
        throw MetricError(std::string(who) + ": need equal-length non-empty prediction/label vectors");
    for (int v : preds)
        if (v < 0) throw MetricError(std::string(who) + ": negative class index");
    for (int v : labels)
        if (v < 0) throw MetricError(std::string(who) + ": negative class index");
}

}  // namespace

std::vector<std::vector<int>> confusion_matrix(const std::vector<int>& preds,
                                               const std::vector<int>& labels, int num_classes) {
    check_paired(preds, labels, "confusion");
    std::vector<std::vector<int>> m(num_classes, std::vector<int>(num_classes, 0));
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] >= num_classes || labels[i] >= num_classes)
            throw MetricError("confusion: class index outside [0," + std::to_string(num_classes) + ")");
        m[labels[i]][preds[i]]++;
    }
    return m;
}

double balanced_accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
    const auto m = confusion_matrix(preds, labels, infer_classes(preds, labels));
    double sum = 0.0;
    int present = 0;
    for (std::size_t k = 0; k < m.size(); ++k) {
        const int support = std::accumulate(m[k].begin(), m[k].end(), 0);
        if (support == 0) continue;
        sum += static_cast<double>(m[k][k]) / support;
        ++present;
    }
    if (present == 0) throw MetricError("balanced accuracy: no labeled samples");
    return sum / present;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw MetricError("auroc: need equal-length non-empty score/label vectors");
    std::size_t n_pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw MetricError("auroc: labels must be binary");
        n_pos += static_cast<std::size_t>(y);
    }
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw MetricError("auroc: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks for tied scores, then the Mann-Whitney statistic
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t t = i; t < j; ++t)
            if (labels[order[t]] == 1) rank_sum_pos += midrank;
        i = j;
    }
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw MetricError("pr_auc: need equal-length non-empty score/label vectors");
    std::size_t n_pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw MetricError("pr_auc: labels must be binary");
        n_pos += static_cast<std::size_t>(y);
    }
    if (n_pos == 0 || n_pos == labels.size()) throw MetricError("pr_auc: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double area = 0.0, prev_recall = 0.0;
    std::size_t tp = 0, fp = 0, i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        for (std::size_t t = i; t < j; ++t) (labels[order[t]] == 1 ? tp : fp)++;
        const double recall = static_cast<double>(tp) / n_pos;
        const double precision = static_cast<double>(tp) / (tp + fp);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return area;
}

double cohens_kappa(const std::vector<int>& preds, const std::vector<int>& labels) {
    const auto m = confusion_matrix(preds, labels, infer_classes(preds, labels));
    const double n = static_cast<double>(preds.size());
    double po = 0.0, pe = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) {
        po += m[k][k];
        double row = 0.0, col = 0.0;
        for (std::size_t j = 0; j < m.size(); ++j) {
            row += m[k][j];
            col += m[j][k];
        }
        pe += (row / n) * (col / n);
    }
    po /= n;
    if (pe >= 1.0 - 1e-15) {
        if (po >= 1.0 - 1e-15) return 1.0;
        throw MetricError("kappa: chance agreement is 1, kappa undefined");
    }
    return (po - pe) / (1.0 - pe);
}

double weighted_f1(const std::vector<int>& preds, const std::vector<int>& labels) {
    const auto m = confusion_matrix(preds, labels, infer_classes(preds, labels));
    const double n = static_cast<double>(preds.size());
    double out = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) {
        double tp = m[k][k], support = 0.0, predicted = 0.0;
        for (std::size_t j = 0; j < m.size(); ++j) {
            support += m[k][j];
            predicted += m[j][k];
        }
        if (support == 0) continue;
        const double denom = support + predicted;  // F1 = 2tp / (support + predicted)
        const double f1 = denom > 0 ? 2.0 * tp / denom : 0.0;
        out += (support / n) * f1;
    }
    return out;
}

MetricsReport compute_metrics(const std::vector<double>& scores, int num_classes,
                              const std::vector<int>& labels) {
    if (num_classes < 2) throw MetricError("metrics: need at least two classes");
    if (labels.empty() || scores.size() != labels.size() * static_cast<std::size_t>(num_classes))
        throw MetricError("metrics: scores must be B x K matching the labels");
    const std::size_t b = labels.size();
    std::vector<int> preds(b);
    for (std::size_t i = 0; i < b; ++i) {
        const double* row = scores.data() + i * num_classes;
        preds[i] = static_cast<int>(std::max_element(row, row + num_classes) - row);
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw MetricError("metrics: label outside [0," + std::to_string(num_classes) + ")");
    }

    MetricsReport r;
    r.confusion = confusion_matrix(preds, labels, num_classes);
    r.bacc = balanced_accuracy(preds, labels);
    r.kappa = cohens_kappa(preds, labels);
    r.f1_weighted = weighted_f1(preds, labels);

    // binary: class-1 score; multi-class: macro one-vs-rest over present classes
    double auc_sum = 0.0, pr_sum = 0.0;
    int counted = 0;
    const int first_k = num_classes == 2 ? 1 : 0;
    const int last_k = num_classes == 2 ? 2 : num_classes;
    for (int k = first_k; k < last_k; ++k) {
        std::vector<double> s(b);
        std::vector<int> y(b);
        std::size_t pos = 0;
        for (std::size_t i = 0; i < b; ++i) {
            s[i] = scores[i * num_classes + k];
            y[i] = labels[i] == k ? 1 : 0;
            pos += static_cast<std::size_t>(y[i]);
        }
        if (pos == 0 || pos == b) continue;
        auc_sum += auroc(s, y);
        pr_sum += pr_auc(s, y);
        ++counted;
    }
    if (counted == 0) throw MetricError("metrics: labels contain a single class");
    r.auroc = auc_sum / counted;
    r.pr_auc = pr_sum / counted;
    return r;
}

// ------------------------------------------------------------- noise

NoiseKind noise_kind_from_name(const std::string& name) {
    if (name == "gaussian") return NoiseKind::gaussian;
    if (name == "impulse") return NoiseKind::impulse;
    if (name == "dropout") return NoiseKind::dropout;
    if (name == "sine" || name == "sinusoidal" || name == "sinusoidal_50hz") return NoiseKind::sinusoidal_50hz;
    throw MetricError("unknown noise kind '" + name + "'");
}

const char* noise_kind_name(NoiseKind k) {
    switch (k) {
        case NoiseKind::gaussian: return "gaussian";
        case NoiseKind::impulse: return "impulse";
        case NoiseKind::dropout: return "dropout";
        default: return "sinusoidal_50hz";
    }
}

const char* noise_level_name(NoiseLevel l) {
    switch (l) {
        case NoiseLevel::none: return "none";
        case NoiseLevel::low: return "low";
        case NoiseLevel::mid: return "mid";
        default: return "high";
    }
}

double noise_level_value(NoiseKind kind, NoiseLevel level) {
    const int i = static_cast<int>(level);  // none=0..high=3
    static const double gaussian_sigma[4] = {0.0, 0.1, 0.3, 0.5};
    static const double impulse_p[4] = {0.0, 0.001, 0.005, 0.01};
    static const double dropout_p[4] = {0.0, 0.05, 0.15, 0.3};
    static const double sine_amp[4] = {0.0, 0.1, 0.3, 0.5};
    switch (kind) {
        case NoiseKind::gaussian: return gaussian_sigma[i];
        case NoiseKind::impulse: return impulse_p[i];
        case NoiseKind::dropout: return dropout_p[i];
        default: return sine_amp[i];
    }
}

static double impulse_amplitude(NoiseLevel level) {
    static const double amp[4] = {0.0, 3.0, 5.0, 8.0};
    return amp[static_cast<int>(level)];
}

EegSlice inject_noise(const EegSlice& slice, const NoiseSpec& spec) {
    EegSlice out = slice;
    if (spec.level == NoiseLevel::none) return out;
    const double v = noise_level_value(spec.kind, spec.level);
    Rng rng(spec.seed);
    for (auto& channel : out.data) {
        for (std::size_t t = 0; t < channel.size(); ++t) {
            switch (spec.kind) {
                case NoiseKind::gaussian:
                    channel[t] += rng.normal(0.0, v);
                    break;
                case NoiseKind::impulse:
                    if (rng.bernoulli(v))
                        channel[t] = rng.bernoulli(0.5) ? impulse_amplitude(spec.level)
                                                        : -impulse_amplitude(spec.level);
                    break;
                case NoiseKind::dropout:
                    if (rng.bernoulli(v)) channel[t] = 0.0;
                    break;
                case NoiseKind::sinusoidal_50hz:
                    channel[t] += v * std::sin(2.0 * M_PI * 50.0 * static_cast<double>(t) / spec.sample_rate);
                    break;
            }
        }
    }
    return out;
}

// ------------------------------------------------- discrete MI oracle

double mi_estimate_discrete(const std::vector<std::vector<std::int64_t>>& joint_counts) {
    double total = 0.0;
    for (const auto& row : joint_counts)
        for (std::int64_t c : row) {
            if (c < 0) throw MetricError("mi: negative count");
            total += static_cast<double>(c);
        }
    if (joint_counts.empty() || total <= 0.0) throw MetricError("mi: empty joint table");

    const std::size_t na = joint_counts.size(), nx = joint_counts[0].size();
    std::vector<double> pa(na, 0.0), px(nx, 0.0);
    for (std::size_t a = 0; a < na; ++a) {
        if (joint_counts[a].size() != nx) throw MetricError("mi: ragged joint table");
        for (std::size_t x = 0; x < nx; ++x) {
            pa[a] += joint_counts[a][x] / total;
            px[x] += joint_counts[a][x] / total;
        }
    }
    double mi = 0.0;
    for (std::size_t a = 0; a < na; ++a)
        for (std::size_t x = 0; x < nx; ++x) {
            const double p = joint_counts[a][x] / total;
            if (p > 0.0) mi += p * std::log(p / (pa[a] * px[x]));
        }
    return std::max(mi, 0.0);
}

namespace {

// Delta-method standard error of the plug-in MI estimate.
double mi_standard_error(const std::vector<std::vector<std::int64_t>>& joint_counts) {
    double total = 0.0;
    for (const auto& row : joint_counts)
        for (std::int64_t c : row) total += static_cast<double>(c);
    const std::size_t na = joint_counts.size(), nx = joint_counts[0].size();
    std::vector<double> pa(na, 0.0), px(nx, 0.0);
    for (std::size_t a = 0; a < na; ++a)
        for (std::size_t x = 0; x < nx; ++x) {
            pa[a] += joint_counts[a][x] / total;
            px[x] += joint_counts[a][x] / total;
        }
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t a = 0; a < na; ++a)
        for (std::size_t x = 0; x < nx; ++x) {
            const double p = joint_counts[a][x] / total;
            if (p <= 0.0) continue;
            const double t = std::log(p / (pa[a] * px[x]));
            m1 += p * t;
            m2 += p * t * t;
        }
    return std::sqrt(std::max(m2 - m1 * m1, 0.0) / total);
}

}  // namespace

MaskMiReport mask_mi_inequality_check(int n_trials, int n_samples, double mask_keep_prob,
                                      std::uint64_t seed) {
    if (n_trials < 1 || n_samples < 1) throw MetricError("mask mi check: need positive trial/sample counts");
    if (mask_keep_prob < 0.0 || mask_keep_prob > 1.0)
        throw MetricError("mask mi check: keep probability outside [0,1]");
    MaskMiReport rep;
    rep.trials = n_trials;
    // X uniform over 4 states; A = X + 1 (so the masked value 0 is fresh);
    // A' = A when the Bernoulli mask keeps, else 0.
    constexpr int kx = 4;
    for (int trial = 0; trial < n_trials; ++trial) {
        Rng rng(seed + static_cast<std::uint64_t>(trial) * 0x9e3779b97f4a7c15ull);
        std::vector<std::vector<std::int64_t>> full(kx + 1, std::vector<std::int64_t>(kx, 0));
        std::vector<std::vector<std::int64_t>> masked(kx + 1, std::vector<std::int64_t>(kx, 0));
        for (int i = 0; i < n_samples; ++i) {
            const int x = static_cast<int>(rng.below(kx));
            const int a = x + 1;
            const int a_masked = rng.bernoulli(mask_keep_prob) ? a : 0;
            full[a][x]++;
            masked[a_masked][x]++;
        }
        const double mi_full = mi_estimate_discrete(full);
        const double mi_masked = mi_estimate_discrete(masked);
        const double eps = 3.0 * std::hypot(mi_standard_error(full), mi_standard_error(masked));
        rep.mean_mi_full += mi_full;
        rep.mean_mi_masked += mi_masked;
        if (mi_masked <= mi_full + eps) rep.passes++;
    }
    rep.mean_mi_full /= n_trials;
    rep.mean_mi_masked /= n_trials;
    return rep;
}

}  // namespace cria
