#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "guidelab/common.hpp"
#include "guidelab/guidance.hpp"
#include "guidelab/mixture.hpp"

namespace guidelab {

struct ModeStat {
    double fraction = 0.0;       // share of samples assigned to this mode
    double mean_distance = 0.0;  // mean distance to the mode mean
};

struct MetricsReport {
    double frechet = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double score_mse = -1.0;  // negative: not evaluated
    std::vector<ModeStat> mode_stats;
    bool covariance_regularized = false;

    static std::string csv_header(int num_modes);
    std::string csv_row() const;
};

struct GaussianFit {
    Vec mean;
    Matrix cov;  // unbiased
};

GaussianFit fit_gaussian(const Matrix& samples);

// 2-Wasserstein distance between Gaussian moment fits of the two sets.
double frechet_gaussian(const Matrix& a, const Matrix& b, bool* regularized = nullptr);
// Same formula against explicitly given reference moments.
double frechet_to_moments(const Matrix& a, const Vec& ref_mean, const Matrix& ref_cov, bool* regularized = nullptr);
// Reference moments are the analytic moments of the mixture.
double frechet_to_mixture(const Matrix& a, const GaussianMixture& mixture, bool* regularized = nullptr);

// Improved-PR style estimator on raw coordinates; k-NN radii within each set
// define its manifold, ties broken by index order.
std::pair<double, double> knn_precision_recall(const Matrix& samples, const Matrix& reference, int k);

// Mean squared error between the model score and the oracle conditional score
// over z ~ p_t probes, averaged over t_list.
double score_field_mse(const DenoiserInterface& model, const GmmOracle& oracle, std::span<const double> t_list,
                       int n_probe, std::uint64_t seed);

std::vector<ModeStat> mode_stats(const Matrix& samples, const GaussianMixture& mixture);

// Trace of the within-mode sample covariance averaged over modes (nearest-mean
// assignment); the terminal-variance diagnostic for the offset-time probe.
double mean_mode_covariance_trace(const Matrix& samples, const GaussianMixture& mixture);

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Returns eigenvalues; eigenvectors land in the columns of vecs.
Vec symmetric_eigen(const Matrix& m, Matrix& vecs);

}  // namespace guidelab
