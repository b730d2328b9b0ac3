#pragma once

// Binary C-SVM with linear and RBF kernels, trained by sequential minimal
// optimization on the dual
//
//     max  W(a) = sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
//     s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0.
//
// Working pairs are chosen by maximal violation with second-order gain
// (Fan, Chen & Lin 2005), without shrinking. The kernel matrix is computed
// up front, which is fine for the few thousand samples this is meant for.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "specdiff/descriptor_io.hpp"
#include "specdiff/descriptors.hpp"
#include "specdiff/error.hpp"
#include "specdiff/matrix.hpp"
#include "specdiff/parallel.hpp"
#include "specdiff/random.hpp"

namespace specdiff {

enum class KernelType { linear, rbf };

inline const char* to_string(KernelType k) noexcept { return k == KernelType::linear ? "linear" : "rbf"; }

inline std::optional<KernelType> parse_kernel(std::string_view s) {
    if (s == "linear") return KernelType::linear;
    if (s == "rbf") return KernelType::rbf;
    return std::nullopt;
}

/// Dot product with four independent accumulators, evaluated in a fixed order.
inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    const std::size_t n = a.size();
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
    const std::size_t n = a.size();
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const double d0 = a[i] - b[i], d1 = a[i + 1] - b[i + 1];
        const double d2 = a[i + 2] - b[i + 2], d3 = a[i + 3] - b[i + 3];
        s0 += d0 * d0;
        s1 += d1 * d1;
        s2 += d2 * d2;
        s3 += d3 * d3;
    }
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s0 += d * d;
    }
    return (s0 + s1) + (s2 + s3);
}

inline double kernel_value(KernelType k, double gamma, std::span<const double> u, std::span<const double> v) noexcept {
    if (k == KernelType::linear) return dot(u, v);
    return std::exp(-gamma * squared_distance(u, v));
}

struct SvmConfig {
    KernelType kernel = KernelType::rbf;
    double C = 1.0;
    std::optional<double> gamma;  ///< nullopt = "scale": 1 / (dim * variance of training features)
    double kkt_tol = 1e-3;
    std::size_t max_passes = 0;   ///< 0 = 10 * n; the iteration cap is max_passes * n pair updates
    std::uint64_t seed = 0;
};

struct LabeledSet {
    Matrix features;
    std::vector<int> labels;  ///< +1 live, -1 spoof
    std::vector<std::string> subject_ids;

    std::size_t size() const noexcept { return labels.size(); }
};

inline int label_sign(Label l) noexcept { return l == Label::live ? +1 : -1; }

struct SvmModel {
    static constexpr int kFormatVersion = 1;

    KernelType kernel = KernelType::rbf;
    double C = 1.0;
    double gamma = 1.0;
    Matrix support_vectors;
    std::vector<double> dual_coefs;  ///< a_i * y_i
    double bias = 0.0;
    double threshold = 0.0;
    std::size_t feature_dim = 0;
    DescriptorKind descriptor_kind = DescriptorKind::specdiff;

    // Training diagnostics; not persisted.
    double dual_objective = 0.0;
    std::size_t iterations = 0;
    bool converged = true;
    std::vector<std::size_t> support_indices;  ///< training-set row of each support vector

    std::size_t sv_count() const noexcept { return dual_coefs.size(); }
};

/// "scale" gamma: 1 / (dim * population variance over every feature entry).
inline double scale_gamma(const Matrix& x) {
    const std::size_t n = x.rows() * x.cols();
    if (n == 0) return 1.0;
    double mean = 0.0;
    for (double v : x.data()) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : x.data()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    if (!(var > 0.0)) return 1.0 / static_cast<double>(x.cols());
    return 1.0 / (static_cast<double>(x.cols()) * var);
}

/// Pairwise linear Gram matrix of the rows of x (n x n, symmetric).
inline std::vector<double> gram_matrix(const Matrix& x, std::size_t threads = 1) {
    const std::size_t n = x.rows();
    std::vector<double> g(n * n);
    parallel_for(n, threads, [&](std::size_t i) {
        for (std::size_t j = 0; j <= i; ++j) g[i * n + j] = dot(x.row(i), x.row(j));
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) g[j * n + i] = g[i * n + j];
    return g;
}

/// Pairwise squared Euclidean distances of the rows of x.
inline std::vector<double> squared_distance_matrix(const Matrix& x, std::size_t threads = 1) {
    const std::size_t n = x.rows();
    std::vector<double> d(n * n, 0.0);
    parallel_for(n, threads, [&](std::size_t i) {
        for (std::size_t j = 0; j < i; ++j) d[i * n + j] = squared_distance(x.row(i), x.row(j));
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) d[j * n + i] = d[i * n + j];
    return d;
}

inline std::vector<double> kernel_matrix(const Matrix& x, KernelType k, double gamma, std::size_t threads = 1) {
    if (k == KernelType::linear) return gram_matrix(x, threads);
    auto d = squared_distance_matrix(x, threads);
    for (double& v : d) v = std::exp(-gamma * v);
    return d;
}

struct DualSolution {
    std::vector<double> alpha;
    double bias = 0.0;
    double objective = 0.0;  ///< W(alpha), the maximized dual value
    std::size_t iterations = 0;
    bool converged = false;
};

/// Solves the C-SVM dual for a precomputed n x n kernel matrix `kmat`.
/// `eps` bounds the maximal KKT violation m(a) - M(a). `seed` permutes the
/// scan order, which only decides between exactly tied candidates.
inline DualSolution solve_dual(std::span<const double> kmat, std::span<const int> labels, double C,
                               double eps, std::size_t max_iter, std::uint64_t seed) {
    const std::size_t n = labels.size();
    if (kmat.size() != n * n) throw ShapeError("kernel matrix size does not match label count");

    // Negating every label negates the solution's decision function exactly;
    // solving in the frame where the first label is +1 makes that symmetry bitwise.
    const double flip = (n > 0 && labels[0] < 0) ? -1.0 : 1.0;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = flip * static_cast<double>(labels[i]);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(seed);
    shuffle(order.begin(), order.end(), rng);

    auto Q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * kmat[i * n + j]; };
    std::vector<double> QD(n);
    for (std::size_t i = 0; i < n; ++i) QD[i] = kmat[i * n + i];

    std::vector<double> alpha(n, 0.0);
    std::vector<double> G(n, -1.0);  // gradient of 1/2 a'Qa - e'a
    constexpr double kTau = 1e-12;
    auto is_upper = [&](std::size_t t) { return alpha[t] >= C; };
    auto is_lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

    DualSolution sol;
    std::size_t iter = 0;
    for (; iter < max_iter; ++iter) {
        // i: maximal -y_t G_t over I_up.
        double gmax = -std::numeric_limits<double>::infinity();
        std::size_t i = n;
        for (std::size_t t : order) {
            if (y[t] > 0) {
                if (!is_upper(t) && -G[t] > gmax) {
                    gmax = -G[t];
                    i = t;
                }
            } else if (!is_lower(t) && G[t] > gmax) {
                gmax = G[t];
                i = t;
            }
        }
        // j: best second-order gain over I_low.
        double gmax2 = -std::numeric_limits<double>::infinity();
        double best = std::numeric_limits<double>::infinity();
        std::size_t j = n;
        for (std::size_t t : order) {
            if (y[t] > 0) {
                if (is_lower(t)) continue;
                gmax2 = std::max(gmax2, G[t]);
                if (i == n) continue;
                const double grad_diff = gmax + G[t];
                if (grad_diff > 0) {
                    double quad = QD[i] + QD[t] - 2.0 * y[i] * Q(i, t);
                    if (quad <= 0) quad = kTau;
                    const double obj = -(grad_diff * grad_diff) / quad;
                    if (obj < best) {
                        best = obj;
                        j = t;
                    }
                }
            } else {
                if (is_upper(t)) continue;
                gmax2 = std::max(gmax2, -G[t]);
                if (i == n) continue;
                const double grad_diff = gmax - G[t];
                if (grad_diff > 0) {
                    double quad = QD[i] + QD[t] + 2.0 * y[i] * Q(i, t);
                    if (quad <= 0) quad = kTau;
                    const double obj = -(grad_diff * grad_diff) / quad;
                    if (obj < best) {
                        best = obj;
                        j = t;
                    }
                }
            }
        }
        if (i == n || j == n || gmax + gmax2 < eps) {
            sol.converged = true;
            break;
        }

        const double old_ai = alpha[i];
        const double old_aj = alpha[j];
        const double qij = Q(i, j);
        if (y[i] != y[j]) {
            double quad = QD[i] + QD[j] + 2.0 * qij;
            if (quad <= 0) quad = kTau;
            const double delta = (-G[i] - G[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = -diff;
            }
            if (diff > 0) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = C - diff;
                }
            } else if (alpha[j] > C) {
                alpha[j] = C;
                alpha[i] = C + diff;
            }
        } else {
            double quad = QD[i] + QD[j] - 2.0 * qij;
            if (quad <= 0) quad = kTau;
            const double delta = (G[i] - G[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = sum - C;
                }
            } else if (alpha[j] < 0) {
                alpha[j] = 0;
                alpha[i] = sum;
            }
            if (sum > C) {
                if (alpha[j] > C) {
                    alpha[j] = C;
                    alpha[i] = sum - C;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = sum;
            }
        }
        const double dai = alpha[i] - old_ai;
        const double daj = alpha[j] - old_aj;
        for (std::size_t t = 0; t < n; ++t) G[t] += Q(i, t) * dai + Q(j, t) * daj;
    }
    sol.iterations = iter;

    // Bias: average over free vectors, else the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t nr_free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * G[t];
        if (is_upper(t)) {
            if (y[t] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (is_lower(t)) {
            if (y[t] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++nr_free;
            sum_free += yg;
        }
    }
    const double rho = nr_free > 0 ? sum_free / static_cast<double>(nr_free) : (ub + lb) / 2.0;

    double v = 0.0;
    for (std::size_t t = 0; t < n; ++t) v += alpha[t] * (G[t] - 1.0);
    sol.objective = -v / 2.0;
    sol.bias = -rho * flip;
    sol.alpha = std::move(alpha);
    return sol;
}

/// Largest KKT violation of (alpha, bias) measured on y_i f(x_i), where
/// f(x_i) = sum_j alpha_j y_j K_ij + bias. Zero means exactly optimal.
inline double kkt_violation(std::span<const double> kmat, std::span<const int> labels,
                            std::span<const double> alpha, double bias, double C) {
    const std::size_t n = labels.size();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double f = bias;
        for (std::size_t j = 0; j < n; ++j) f += alpha[j] * labels[j] * kmat[i * n + j];
        const double m = labels[i] * f;
        double v = 0.0;
        if (alpha[i] <= 0.0) v = std::max(0.0, 1.0 - m);
        else if (alpha[i] >= C) v = std::max(0.0, m - 1.0);
        else v = std::abs(m - 1.0);
        worst = std::max(worst, v);
    }
    return worst;
}

namespace detail {

inline void validate_training_set(const LabeledSet& data) {
    const std::size_t n = data.size();
    if (data.features.rows() != n) throw TrainingError("feature rows and label count differ");
    if (!data.subject_ids.empty() && data.subject_ids.size() != n)
        throw TrainingError("subject id count and label count differ");
    if (n < 2) throw TrainingError("need at least 2 training samples");
    bool pos = false, neg = false;
    for (int l : data.labels) {
        if (l == 1) pos = true;
        else if (l == -1) neg = true;
        else throw TrainingError("labels must be +1 or -1");
    }
    if (!pos || !neg) throw TrainingError("training data contains a single class");
    for (double v : data.features.data()) {
        if (!std::isfinite(v)) throw TrainingError("training features contain non-finite values");
    }
}

}  // namespace detail

inline std::size_t max_iterations(const SvmConfig& cfg, std::size_t n) {
    const std::size_t passes = cfg.max_passes ? cfg.max_passes : 10 * n;
    return std::max<std::size_t>(passes * n, 1000);
}

/// Trains on a kernel matrix already computed for `data.features` with the
/// kernel and gamma recorded in the returned model.
inline SvmModel train_svm_precomputed(const LabeledSet& data, std::span<const double> kmat, const SvmConfig& cfg,
                                      double gamma, DescriptorKind kind) {
    detail::validate_training_set(data);
    if (!(cfg.C > 0.0)) throw TrainingError("C must be positive");
    if (cfg.kernel == KernelType::rbf && !(gamma > 0.0)) throw TrainingError("gamma must be positive");
    const std::size_t n = data.size();
    const DualSolution sol = solve_dual(kmat, data.labels, cfg.C, cfg.kkt_tol, max_iterations(cfg, n), cfg.seed);

    SvmModel m;
    m.kernel = cfg.kernel;
    m.C = cfg.C;
    m.gamma = gamma;
    m.bias = sol.bias;
    m.feature_dim = data.features.cols();
    m.descriptor_kind = kind;
    m.dual_objective = sol.objective;
    m.iterations = sol.iterations;
    m.converged = sol.converged;
    for (std::size_t i = 0; i < n; ++i) {
        if (sol.alpha[i] > 0.0) {
            m.support_vectors.append_row(data.features.row(i));
            m.dual_coefs.push_back(sol.alpha[i] * data.labels[i]);
            m.support_indices.push_back(i);
        }
    }
    if (m.support_vectors.rows() == 0) m.support_vectors = Matrix(0, m.feature_dim);
    return m;
}

inline double resolve_gamma(const SvmConfig& cfg, const Matrix& features) {
    if (cfg.kernel == KernelType::linear) return cfg.gamma.value_or(0.0);
    return cfg.gamma ? *cfg.gamma : scale_gamma(features);
}

inline SvmModel train_svm(const LabeledSet& data, const SvmConfig& cfg,
                          DescriptorKind kind = DescriptorKind::specdiff, std::size_t threads = 1) {
    detail::validate_training_set(data);
    const double gamma = resolve_gamma(cfg, data.features);
    if (cfg.kernel == KernelType::rbf && !(gamma > 0.0)) throw TrainingError("gamma must be positive");
    const auto kmat = kernel_matrix(data.features, cfg.kernel, gamma, threads);
    return train_svm_precomputed(data, kmat, cfg, gamma, kind);
}

inline double decision_value(const SvmModel& m, std::span<const double> x) {
    if (x.size() != m.feature_dim)
        throw ModelMismatchError("feature vector has " + std::to_string(x.size()) + " values, model expects " +
                                 std::to_string(m.feature_dim));
    double f = 0.0;
    for (std::size_t i = 0; i < m.dual_coefs.size(); ++i)
        f += m.dual_coefs[i] * kernel_value(m.kernel, m.gamma, m.support_vectors.row(i), x);
    return f + m.bias;
}

/// Picks the cut minimizing (FAR + FRR) / 2, where a score >= threshold is
/// declared live. Candidates are the lowest score (accept everything) and
/// the midpoints between adjacent distinct scores; ties go to the smallest.
inline double select_threshold(std::span<const double> live_scores, std::span<const double> spoof_scores) {
    if (live_scores.empty() || spoof_scores.empty())
        throw MetricError("threshold selection needs both live and spoof scores");
    std::vector<double> all(live_scores.begin(), live_scores.end());
    all.insert(all.end(), spoof_scores.begin(), spoof_scores.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());

    std::vector<double> live(live_scores.begin(), live_scores.end());
    std::vector<double> spoof(spoof_scores.begin(), spoof_scores.end());
    std::sort(live.begin(), live.end());
    std::sort(spoof.begin(), spoof.end());
    auto error_at = [&](double t) {
        // FRR: live below t; FAR: spoof at or above t.
        const auto frr = static_cast<double>(std::lower_bound(live.begin(), live.end(), t) - live.begin());
        const auto far = static_cast<double>(spoof.end() - std::lower_bound(spoof.begin(), spoof.end(), t));
        return (far / static_cast<double>(spoof.size()) + frr / static_cast<double>(live.size())) / 2.0;
    };
    double best_t = all.front();
    double best_e = error_at(best_t);
    for (std::size_t k = 0; k + 1 < all.size(); ++k) {
        const double t = all[k] + (all[k + 1] - all[k]) / 2.0;
        const double e = error_at(t);
        if (e < best_e) {
            best_e = e;
            best_t = t;
        }
    }
    return best_t;
}

struct Verdict {
    Label label = Label::spoof;
    double score = 0.0;
    double threshold = 0.0;
};

inline Verdict classify(const SvmModel& m, const Descriptor& d) {
    if (d.kind != m.descriptor_kind)
        throw ModelMismatchError(std::string("model expects ") + to_string(m.descriptor_kind) +
                                 " descriptors, got " + to_string(d.kind));
    const double s = decision_value(m, d.values);
    return {s >= m.threshold ? Label::live : Label::spoof, s, m.threshold};
}

inline LabeledSet make_labeled_set(std::span<const DescriptorRecord> recs) {
    LabeledSet set;
    for (const auto& r : recs) {
        set.features.append_row(r.descriptor.values);
        set.labels.push_back(label_sign(r.label));
        set.subject_ids.push_back(r.subject_id);
    }
    return set;
}

}  // namespace specdiff
