#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "guidelab/common.hpp"
#include "guidelab/rng.hpp"

namespace guidelab {

// Noise schedule sigma(t), linear in t: sigma(0) = 0, sigma(1) = sigma_max.
struct NoiseSchedule {
    double sigma_max = 20.0;

    double sigma(double t) const { return t * sigma_max; }
    double sigma_dot(double /*t*/) const { return sigma_max; }
    double time_of_sigma(double s) const { return s / sigma_max; }
};

// Labeled mixture of isotropic unit-covariance Gaussians. Component k is the
// class y = k. Immutable after construction.
class GaussianMixture {
   public:
    GaussianMixture(int dim, std::vector<Vec> means, Vec weights);

    int dim() const { return dim_; }
    int num_components() const { return static_cast<int>(means_.size()); }
    const Vec& mean(int k) const { return means_[static_cast<size_t>(k)]; }
    double weight(int k) const { return weights_[static_cast<size_t>(k)]; }
    const Vec& weights() const { return weights_; }

    // Moments of the mixture itself (noise-free data distribution).
    Vec mixture_mean() const;
    Matrix mixture_covariance() const;

    // Canonical 2-D symmetric two-component fixture: means (-2,0) and (2,0),
    // equal weights.
    static GaussianMixture sym_pair();

   private:
    int dim_;
    std::vector<Vec> means_;
    Vec weights_;
};

// Law of the independent condition y_hat used by ICG.
struct IndependentConditionLaw {
    enum class Mode { kUniform, kFixed, kCategorical };

    Mode mode = Mode::kUniform;
    int fixed_class = 0;
    Vec probs;  // used in categorical mode

    static IndependentConditionLaw uniform() { return {}; }
    static IndependentConditionLaw fixed(int k) { return {Mode::kFixed, k, {}}; }
    static IndependentConditionLaw categorical(Vec p);

    // Materialize as a K-vector of probabilities.
    Vec probabilities(int num_classes) const;
    int sample(int num_classes, Rng& rng) const;
};

struct LabeledSample {
    Matrix points;
    std::vector<int> labels;
};

// Closed-form scores, posteriors and guidance directions for a Gaussian
// mixture under the forward process z_t = x + sigma(t) * eps. All noisy
// marginals are mixtures of N(mu_k, (1 + sigma^2) I).
class GmmOracle {
   public:
    GmmOracle(GaussianMixture mixture, NoiseSchedule schedule)
        : mixture_(std::move(mixture)), schedule_(schedule) {}

    const GaussianMixture& mixture() const { return mixture_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    int dim() const { return mixture_.dim(); }
    int num_classes() const { return mixture_.num_components(); }

    LabeledSample sample_data(int n, std::uint64_t seed) const;

    Vec forward_perturb(const Vec& x, double t, std::uint64_t seed) const;
    Vec forward_perturb(const Vec& x, double t, Rng& rng) const;

    Vec cond_score(const Vec& z, double t, int y) const;
    Vec uncond_score(const Vec& z, double t) const;
    Vec posterior_weights(const Vec& z, double t) const;

    // cond_score(z,t,y) - uncond_score(z,t), computed through the posterior
    // expansion sum_k post_k (mu_y - mu_k) / (1 + sigma^2) rather than as a
    // literal difference of the two score calls.
    Vec cfg_direction_closed_form(const Vec& z, double t, int y) const;

    // Exact expectation over y_hat ~ q of cond_score(z,t,y) - cond_score(z,t,y_hat).
    Vec icg_expected_direction(const IndependentConditionLaw& q, const Vec& z, double t, int y) const;

    // grad_z KL(q(y) || p_t(y|z)) for a categorical q, in closed form.
    Vec kl_gradient(const IndependentConditionLaw& q, const Vec& z, double t) const;
    Vec kl_gradient(std::span<const double> q_probs, const Vec& z, double t) const;

    // log densities (for finite-difference oracles and Langevin diagnostics)
    double log_density(const Vec& z, double t) const;
    double cond_log_density(const Vec& z, double t, int y) const;
    double kl_to_posterior(std::span<const double> q_probs, const Vec& z, double t) const;

   private:
    void check_time(double t) const;
    void check_class(int y) const;
    // log w_k + log N(z; mu_k, (1+sigma^2) I) for all k
    Vec component_log_joint(const Vec& z, double t) const;

    GaussianMixture mixture_;
    NoiseSchedule schedule_;
};

}  // namespace guidelab
