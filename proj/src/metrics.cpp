#include "guidelab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace guidelab {

namespace {
constexpr double kCovRegularization = 1e-9;

Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            for (int j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

// M^(1/2) for symmetric positive semidefinite M; negative eigenvalues from
// roundoff are clamped to zero. Reports whether clamping was material.
Matrix symmetric_sqrt(const Matrix& m, bool* clamped) {
    Matrix vecs;
    Vec evals = symmetric_eigen(m, vecs);
    const int d = m.rows;
    for (double& v : evals) {
        if (v < -1e-9 && clamped) *clamped = true;
        v = v > 0.0 ? std::sqrt(v) : 0.0;
    }
    Matrix out(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k) s += vecs(i, k) * evals[static_cast<size_t>(k)] * vecs(j, k);
            out(i, j) = s;
        }
    return out;
}

double frechet_from_moments(const Vec& mu_a, const Matrix& cov_a, const Vec& mu_b, const Matrix& cov_b,
                            bool* regularized) {
    const int d = static_cast<int>(mu_a.size());
    Matrix ca = cov_a, cb = cov_b;
    // regularize once if either covariance is (numerically) degenerate
    auto degenerate = [&](const Matrix& c) {
        Matrix vecs;
        Vec ev = symmetric_eigen(c, vecs);
        for (double v : ev)
            if (v < 1e-12) return true;
        return false;
    };
    if (degenerate(ca) || degenerate(cb)) {
        if (regularized) *regularized = true;
        for (int i = 0; i < d; ++i) {
            ca(i, i) += kCovRegularization;
            cb(i, i) += kCovRegularization;
        }
    }
    // Tr((Sa Sb)^(1/2)) via the symmetrized product Sa^(1/2) Sb Sa^(1/2)
    bool clamped = false;
    const Matrix sqrt_a = symmetric_sqrt(ca, &clamped);
    Matrix inner = matmul(matmul(sqrt_a, cb), sqrt_a);
    // symmetrize against roundoff
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            const double v = 0.5 * (inner(i, j) + inner(j, i));
            inner(i, j) = v;
            inner(j, i) = v;
        }
    Matrix vecs;
    Vec ev = symmetric_eigen(inner, vecs);
    double trace_cross = 0.0;
    for (double v : ev) trace_cross += v > 0.0 ? std::sqrt(v) : 0.0;

    double mean_term = 0.0;
    for (int i = 0; i < d; ++i) {
        const double diff = mu_a[static_cast<size_t>(i)] - mu_b[static_cast<size_t>(i)];
        mean_term += diff * diff;
    }
    double trace_term = 0.0;
    for (int i = 0; i < d; ++i) trace_term += ca(i, i) + cb(i, i);
    const double value = mean_term + trace_term - 2.0 * trace_cross;
    return value > 0.0 ? value : 0.0;
}

}  // namespace

Vec symmetric_eigen(const Matrix& m, Matrix& vecs) {
    if (m.rows != m.cols) throw std::invalid_argument("symmetric_eigen: matrix must be square");
    const int d = m.rows;
    Matrix a = m;
    vecs = Matrix(d, d);
    for (int i = 0; i < d; ++i) vecs(i, i) = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) off += a(i, j) * a(i, j);
        if (off < 1e-30) break;
        for (int p = 0; p < d - 1; ++p) {
            for (int q = p + 1; q < d; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < d; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < d; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < d; ++k) {
                    const double vkp = vecs(k, p), vkq = vecs(k, q);
                    vecs(k, p) = c * vkp - s * vkq;
                    vecs(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    Vec evals(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) evals[static_cast<size_t>(i)] = a(i, i);
    return evals;
}

GaussianFit fit_gaussian(const Matrix& samples) {
    const int n = samples.rows, d = samples.cols;
    if (n < d + 1) throw std::invalid_argument("fit_gaussian: need at least d+1 samples");
    GaussianFit fit;
    fit.mean.assign(static_cast<size_t>(d), 0.0);
    for (int i = 0; i < n; ++i) axpy(1.0, samples.row(i), fit.mean);
    for (auto& v : fit.mean) v /= n;
    fit.cov = Matrix(d, d);
    for (int i = 0; i < n; ++i) {
        auto row = samples.row(i);
        for (int a = 0; a < d; ++a) {
            const double da = row[static_cast<size_t>(a)] - fit.mean[static_cast<size_t>(a)];
            for (int b = 0; b < d; ++b)
                fit.cov(a, b) += da * (row[static_cast<size_t>(b)] - fit.mean[static_cast<size_t>(b)]);
        }
    }
    const double denom = n > 1 ? n - 1.0 : 1.0;
    for (auto& v : fit.cov.data) v /= denom;
    return fit;
}

double frechet_gaussian(const Matrix& a, const Matrix& b, bool* regularized) {
    if (a.cols != b.cols) throw std::invalid_argument("frechet_gaussian: dimension mismatch");
    const GaussianFit fa = fit_gaussian(a);
    const GaussianFit fb = fit_gaussian(b);
    return frechet_from_moments(fa.mean, fa.cov, fb.mean, fb.cov, regularized);
}

double frechet_to_moments(const Matrix& a, const Vec& ref_mean, const Matrix& ref_cov, bool* regularized) {
    const GaussianFit fa = fit_gaussian(a);
    return frechet_from_moments(fa.mean, fa.cov, ref_mean, ref_cov, regularized);
}

double frechet_to_mixture(const Matrix& a, const GaussianMixture& mixture, bool* regularized) {
    return frechet_to_moments(a, mixture.mixture_mean(), mixture.mixture_covariance(), regularized);
}

namespace {

// squared distance to the k-th nearest neighbour within the same set, per point
std::vector<double> knn_radii_sq(const Matrix& set, int k) {
    const int n = set.rows;
    std::vector<double> radii(static_cast<size_t>(n));
    std::vector<std::pair<double, int>> dists;
    dists.reserve(static_cast<size_t>(n) - 1);
    for (int i = 0; i < n; ++i) {
        dists.clear();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            dists.emplace_back(squared_distance(set.row(i), set.row(j)), j);
        }
        std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
        radii[static_cast<size_t>(i)] = dists[static_cast<size_t>(k - 1)].first;
    }
    return radii;
}

double manifold_coverage(const Matrix& queries, const Matrix& set, const std::vector<double>& radii_sq) {
    int covered = 0;
    for (int i = 0; i < queries.rows; ++i) {
        auto q = queries.row(i);
        for (int j = 0; j < set.rows; ++j) {
            if (squared_distance(q, set.row(j)) <= radii_sq[static_cast<size_t>(j)]) {
                ++covered;
                break;
            }
        }
    }
    return static_cast<double>(covered) / queries.rows;
}

}  // namespace

std::pair<double, double> knn_precision_recall(const Matrix& samples, const Matrix& reference, int k) {
    if (samples.cols != reference.cols) throw std::invalid_argument("knn_precision_recall: dimension mismatch");
    if (k < 1) throw std::domain_error("knn_precision_recall: k must be >= 1");
    if (k >= samples.rows || k >= reference.rows)
        throw std::domain_error("knn_precision_recall: k must be smaller than both set sizes");
    const std::vector<double> ref_radii = knn_radii_sq(reference, k);
    const std::vector<double> sample_radii = knn_radii_sq(samples, k);
    const double precision = manifold_coverage(samples, reference, ref_radii);
    const double recall = manifold_coverage(reference, samples, sample_radii);
    return {precision, recall};
}

double score_field_mse(const DenoiserInterface& model, const GmmOracle& oracle, std::span<const double> t_list,
                       int n_probe, std::uint64_t seed) {
    if (n_probe < 1) throw std::invalid_argument("score_field_mse: n_probe must be >= 1");
    double total = 0.0;
    size_t count = 0;
    Rng rng(seed);
    for (double t : t_list) {
        const double s = oracle.schedule().sigma(t);
        for (int i = 0; i < n_probe; ++i) {
            const int y = rng.categorical(oracle.mixture().weights());
            Vec x(oracle.mixture().mean(y));
            for (auto& v : x) v += rng.normal();
            Vec z(x);
            for (auto& v : z) v += s * rng.normal();
            const Vec target = oracle.cond_score(z, t, y);
            Vec predicted = model.denoise(z, t, y);
            const double inv = 1.0 / (s * s);
            for (size_t j = 0; j < predicted.size(); ++j) predicted[j] = (predicted[j] - z[j]) * inv;
            total += squared_distance(predicted, target);
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

std::vector<ModeStat> mode_stats(const Matrix& samples, const GaussianMixture& mixture) {
    if (samples.rows < 1) throw std::domain_error("mode_stats: empty sample set");
    if (samples.cols != mixture.dim()) throw std::invalid_argument("mode_stats: dimension mismatch");
    const int K = mixture.num_components();
    std::vector<int> counts(static_cast<size_t>(K), 0);
    std::vector<double> dist_sums(static_cast<size_t>(K), 0.0);
    for (int i = 0; i < samples.rows; ++i) {
        auto row = samples.row(i);
        int best = 0;
        double best_d = squared_distance(row, mixture.mean(0));
        for (int k = 1; k < K; ++k) {
            const double dk = squared_distance(row, mixture.mean(k));
            if (dk < best_d) {
                best_d = dk;
                best = k;
            }
        }
        counts[static_cast<size_t>(best)]++;
        dist_sums[static_cast<size_t>(best)] += std::sqrt(best_d);
    }
    std::vector<ModeStat> stats(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) {
        const int c = counts[static_cast<size_t>(k)];
        stats[static_cast<size_t>(k)].fraction = static_cast<double>(c) / samples.rows;
        stats[static_cast<size_t>(k)].mean_distance = c > 0 ? dist_sums[static_cast<size_t>(k)] / c : 0.0;
    }
    return stats;
}

double mean_mode_covariance_trace(const Matrix& samples, const GaussianMixture& mixture) {
    if (samples.rows < 1) throw std::domain_error("mean_mode_covariance_trace: empty sample set");
    const int K = mixture.num_components();
    const int d = mixture.dim();
    std::vector<std::vector<int>> members(static_cast<size_t>(K));
    for (int i = 0; i < samples.rows; ++i) {
        auto row = samples.row(i);
        int best = 0;
        double best_d = squared_distance(row, mixture.mean(0));
        for (int k = 1; k < K; ++k) {
            const double dk = squared_distance(row, mixture.mean(k));
            if (dk < best_d) {
                best_d = dk;
                best = k;
            }
        }
        members[static_cast<size_t>(best)].push_back(i);
    }
    double trace_sum = 0.0;
    int modes_used = 0;
    for (int k = 0; k < K; ++k) {
        const auto& idx = members[static_cast<size_t>(k)];
        if (static_cast<int>(idx.size()) < 2) continue;
        Vec mean(static_cast<size_t>(d), 0.0);
        for (int i : idx) axpy(1.0, samples.row(i), mean);
        for (auto& v : mean) v /= static_cast<double>(idx.size());
        double trace = 0.0;
        for (int i : idx) {
            auto row = samples.row(i);
            for (int a = 0; a < d; ++a) {
                const double da = row[static_cast<size_t>(a)] - mean[static_cast<size_t>(a)];
                trace += da * da;
            }
        }
        trace_sum += trace / (static_cast<double>(idx.size()) - 1.0);
        ++modes_used;
    }
    if (modes_used == 0) throw std::domain_error("mean_mode_covariance_trace: no mode has two samples");
    return trace_sum / modes_used;
}

std::string MetricsReport::csv_header(int num_modes) {
    std::ostringstream os;
    os << "frechet,precision,recall,score_mse,cov_regularized";
    for (int k = 0; k < num_modes; ++k) os << ",mode" << k << "_fraction,mode" << k << "_mean_dist";
    return os.str();
}

std::string MetricsReport::csv_row() const {
    std::ostringstream os;
    os.precision(12);
    os << frechet << ',' << precision << ',' << recall << ',' << score_mse << ',' << (covariance_regularized ? 1 : 0);
    for (const ModeStat& m : mode_stats) os << ',' << m.fraction << ',' << m.mean_distance;
    return os.str();
}

}  // namespace guidelab
