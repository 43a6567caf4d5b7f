#include "guidelab/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace guidelab {

namespace {
constexpr double kWeightSumTol = 1e-12;
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
}  // namespace

GaussianMixture::GaussianMixture(int dim, std::vector<Vec> means, Vec weights)
    : dim_(dim), means_(std::move(means)), weights_(std::move(weights)) {
    if (dim_ <= 0) throw std::invalid_argument("GaussianMixture: dim must be positive");
    if (means_.empty()) throw std::invalid_argument("GaussianMixture: need at least one component");
    if (means_.size() != weights_.size())
        throw std::invalid_argument("GaussianMixture: means/weights size mismatch");
    double total = 0.0;
    for (double w : weights_) {
        if (!(w > 0.0)) throw std::invalid_argument("GaussianMixture: weights must be strictly positive");
        total += w;
    }
    if (std::abs(total - 1.0) > kWeightSumTol)
        throw std::invalid_argument("GaussianMixture: weights must sum to 1");
    for (const Vec& m : means_) {
        if (static_cast<int>(m.size()) != dim_)
            throw std::invalid_argument("GaussianMixture: mean dimension mismatch");
    }
}

Vec GaussianMixture::mixture_mean() const {
    Vec mu(static_cast<size_t>(dim_), 0.0);
    for (int k = 0; k < num_components(); ++k) axpy(weights_[static_cast<size_t>(k)], means_[static_cast<size_t>(k)], mu);
    return mu;
}

Matrix GaussianMixture::mixture_covariance() const {
    // identity within-component covariance plus between-component spread
    const Vec mu = mixture_mean();
    Matrix cov(dim_, dim_);
    for (int i = 0; i < dim_; ++i) cov(i, i) = 1.0;
    for (int k = 0; k < num_components(); ++k) {
        const Vec d = sub(means_[static_cast<size_t>(k)], mu);
        const double w = weights_[static_cast<size_t>(k)];
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) cov(i, j) += w * d[static_cast<size_t>(i)] * d[static_cast<size_t>(j)];
    }
    return cov;
}

GaussianMixture GaussianMixture::sym_pair() {
    return GaussianMixture(2, {{-2.0, 0.0}, {2.0, 0.0}}, {0.5, 0.5});
}

IndependentConditionLaw IndependentConditionLaw::categorical(Vec p) {
    IndependentConditionLaw law;
    law.mode = Mode::kCategorical;
    law.probs = std::move(p);
    double total = 0.0;
    for (double x : law.probs) {
        if (x < 0.0) throw std::invalid_argument("IndependentConditionLaw: negative probability");
        total += x;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("IndependentConditionLaw: probabilities must sum to 1");
    return law;
}

Vec IndependentConditionLaw::probabilities(int num_classes) const {
    switch (mode) {
        case Mode::kUniform:
            return Vec(static_cast<size_t>(num_classes), 1.0 / num_classes);
        case Mode::kFixed: {
            if (fixed_class < 0 || fixed_class >= num_classes)
                throw std::invalid_argument("IndependentConditionLaw: fixed class out of range");
            Vec p(static_cast<size_t>(num_classes), 0.0);
            p[static_cast<size_t>(fixed_class)] = 1.0;
            return p;
        }
        case Mode::kCategorical:
            if (static_cast<int>(probs.size()) != num_classes)
                throw std::invalid_argument("IndependentConditionLaw: probability vector has wrong length");
            return probs;
    }
    throw std::logic_error("IndependentConditionLaw: bad mode");
}

int IndependentConditionLaw::sample(int num_classes, Rng& rng) const {
    if (mode == Mode::kFixed) {
        if (fixed_class < 0 || fixed_class >= num_classes)
            throw std::invalid_argument("IndependentConditionLaw: fixed class out of range");
        return fixed_class;
    }
    const Vec p = probabilities(num_classes);
    return rng.categorical(p);
}

LabeledSample GmmOracle::sample_data(int n, std::uint64_t seed) const {
    if (n < 0) throw std::invalid_argument("sample_data: n must be >= 0");
    Rng rng(seed);
    const int d = dim();
    LabeledSample out;
    out.points = Matrix(n, d);
    out.labels.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int k = rng.categorical(mixture_.weights());
        out.labels[static_cast<size_t>(i)] = k;
        auto row = out.points.row(i);
        const Vec& mu = mixture_.mean(k);
        for (int j = 0; j < d; ++j) row[static_cast<size_t>(j)] = mu[static_cast<size_t>(j)] + rng.normal();
    }
    return out;
}

void GmmOracle::check_time(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("time t must lie in [0, 1]");
}

void GmmOracle::check_class(int y) const {
    if (y < 0 || y >= num_classes()) throw std::domain_error("class index out of range");
}

Vec GmmOracle::forward_perturb(const Vec& x, double t, std::uint64_t seed) const {
    Rng rng(seed);
    return forward_perturb(x, t, rng);
}

Vec GmmOracle::forward_perturb(const Vec& x, double t, Rng& rng) const {
    check_time(t);
    const double s = schedule_.sigma(t);
    Vec z(x);
    for (auto& v : z) v += s * rng.normal();
    return z;
}

Vec GmmOracle::cond_score(const Vec& z, double t, int y) const {
    check_time(t);
    check_class(y);
    const double s = schedule_.sigma(t);
    const double inv_var = 1.0 / (1.0 + s * s);
    const Vec& mu = mixture_.mean(y);
    Vec out(z.size());
    for (size_t i = 0; i < z.size(); ++i) out[i] = (mu[i] - z[i]) * inv_var;
    return out;
}

Vec GmmOracle::component_log_joint(const Vec& z, double t) const {
    const double s = schedule_.sigma(t);
    const double var = 1.0 + s * s;
    const int K = num_classes();
    const int d = dim();
    Vec lj(static_cast<size_t>(K));
    const double log_norm = -0.5 * d * (kLogTwoPi + std::log(var));
    for (int k = 0; k < K; ++k) {
        const double q = squared_distance(z, mixture_.mean(k));
        lj[static_cast<size_t>(k)] = std::log(mixture_.weight(k)) + log_norm - 0.5 * q / var;
    }
    return lj;
}

Vec GmmOracle::posterior_weights(const Vec& z, double t) const {
    check_time(t);
    Vec lj = component_log_joint(z, t);
    const double m = *std::max_element(lj.begin(), lj.end());
    double total = 0.0;
    for (auto& v : lj) {
        v = std::exp(v - m);
        total += v;
    }
    for (auto& v : lj) v /= total;
    return lj;
}

Vec GmmOracle::uncond_score(const Vec& z, double t) const {
    check_time(t);
    const Vec post = posterior_weights(z, t);
    const double s = schedule_.sigma(t);
    const double inv_var = 1.0 / (1.0 + s * s);
    Vec out(z.size(), 0.0);
    for (int k = 0; k < num_classes(); ++k) {
        const Vec& mu = mixture_.mean(k);
        const double w = post[static_cast<size_t>(k)];
        for (size_t i = 0; i < z.size(); ++i) out[i] += w * (mu[i] - z[i]) * inv_var;
    }
    return out;
}

Vec GmmOracle::cfg_direction_closed_form(const Vec& z, double t, int y) const {
    check_time(t);
    check_class(y);
    const Vec post = posterior_weights(z, t);
    const double s = schedule_.sigma(t);
    const double inv_var = 1.0 / (1.0 + s * s);
    const Vec& mu_y = mixture_.mean(y);
    Vec out(z.size(), 0.0);
    for (int k = 0; k < num_classes(); ++k) {
        const Vec& mu_k = mixture_.mean(k);
        const double w = post[static_cast<size_t>(k)];
        for (size_t i = 0; i < z.size(); ++i) out[i] += w * (mu_y[i] - mu_k[i]) * inv_var;
    }
    return out;
}

Vec GmmOracle::icg_expected_direction(const IndependentConditionLaw& q, const Vec& z, double t, int y) const {
    check_time(t);
    check_class(y);
    const Vec qp = q.probabilities(num_classes());
    const double s = schedule_.sigma(t);
    const double inv_var = 1.0 / (1.0 + s * s);
    const Vec& mu_y = mixture_.mean(y);
    Vec out(z.size(), 0.0);
    for (int k = 0; k < num_classes(); ++k) {
        const Vec& mu_k = mixture_.mean(k);
        const double w = qp[static_cast<size_t>(k)];
        for (size_t i = 0; i < z.size(); ++i) out[i] += w * (mu_y[i] - mu_k[i]) * inv_var;
    }
    return out;
}

Vec GmmOracle::kl_gradient(const IndependentConditionLaw& q, const Vec& z, double t) const {
    const Vec qp = q.probabilities(num_classes());
    return kl_gradient(qp, z, t);
}

Vec GmmOracle::kl_gradient(std::span<const double> q_probs, const Vec& z, double t) const {
    check_time(t);
    if (static_cast<int>(q_probs.size()) != num_classes())
        throw std::invalid_argument("kl_gradient: q has wrong length");
    // grad_z log p_t(k|z) = cond_score_k - uncond_score, so the KL gradient is
    // uncond_score - sum_k q_k cond_score_k.
    const Vec uncond = uncond_score(z, t);
    const double s = schedule_.sigma(t);
    const double inv_var = 1.0 / (1.0 + s * s);
    Vec out(uncond);
    for (int k = 0; k < num_classes(); ++k) {
        const Vec& mu = mixture_.mean(k);
        const double w = q_probs[static_cast<size_t>(k)];
        for (size_t i = 0; i < z.size(); ++i) out[i] -= w * (mu[i] - z[i]) * inv_var;
    }
    return out;
}

double GmmOracle::log_density(const Vec& z, double t) const {
    check_time(t);
    Vec lj = component_log_joint(z, t);
    const double m = *std::max_element(lj.begin(), lj.end());
    double total = 0.0;
    for (double v : lj) total += std::exp(v - m);
    return m + std::log(total);
}

double GmmOracle::cond_log_density(const Vec& z, double t, int y) const {
    check_time(t);
    check_class(y);
    const double s = schedule_.sigma(t);
    const double var = 1.0 + s * s;
    const double q = squared_distance(z, mixture_.mean(y));
    return -0.5 * dim() * (kLogTwoPi + std::log(var)) - 0.5 * q / var;
}

double GmmOracle::kl_to_posterior(std::span<const double> q_probs, const Vec& z, double t) const {
    check_time(t);
    if (static_cast<int>(q_probs.size()) != num_classes())
        throw std::invalid_argument("kl_to_posterior: q has wrong length");
    // KL(q || p(.|z)) with log p(k|z) evaluated in the log domain
    Vec lj = component_log_joint(z, t);
    const double m = *std::max_element(lj.begin(), lj.end());
    double total = 0.0;
    for (double v : lj) total += std::exp(v - m);
    const double log_pz = m + std::log(total);
    double kl = 0.0;
    for (int k = 0; k < num_classes(); ++k) {
        const double qk = q_probs[static_cast<size_t>(k)];
        if (qk <= 0.0) continue;
        const double log_post = lj[static_cast<size_t>(k)] - log_pz;
        kl += qk * (std::log(qk) - log_post);
    }
    return kl;
}

}  // namespace guidelab
