#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "guidelab/common.hpp"
#include "guidelab/guidance.hpp"
#include "guidelab/mixture.hpp"
#include "guidelab/rng.hpp"

namespace guidelab {

enum class SolverKind { kEulerOde, kHeunOde, kEulerMaruyamaSde, kLangevinChurn };

struct SamplerConfig {
    SolverKind solver = SolverKind::kHeunOde;
    int steps = 64;
    double sigma_min = 0.01;
    double sigma_max = 20.0;
    double beta = 0.0;        // SDE churn rate (constant)
    double churn_eta = 0.1;   // Langevin solver step factor: eta = churn_eta * sigma^2
    std::uint64_t seed = 0;
    int batch_size = 256;     // chunk size used by batch drivers
};

// How the per-chain condition is chosen.
struct ConditioningPolicy {
    enum class Kind { kClassPrior, kFixedClass, kUnconditional };

    Kind kind = Kind::kClassPrior;
    int fixed_class = 0;
    Vec prior;  // class-prior weights; empty means uniform over classes

    static ConditioningPolicy class_prior() { return {}; }
    static ConditioningPolicy class_prior(Vec weights) { return {Kind::kClassPrior, 0, std::move(weights)}; }
    static ConditioningPolicy fixed(int k) { return {Kind::kFixedClass, k, {}}; }
    static ConditioningPolicy unconditional() { return {Kind::kUnconditional, 0, {}}; }
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
};

struct SampleResult {
    Matrix points;
    std::vector<int> conditions;  // class per chain; -1 for unconditional
    std::vector<Trajectory> trajectories;
};

// Length steps+1: sigma_max at the head, geometric interior down to
// sigma_min, and a final jump to exactly 0.
std::vector<double> make_sigma_grid(const SamplerConfig& cfg);

using ScoreFn = std::function<Vec(const Vec& z, double sigma)>;

Vec euler_ode_step(const ScoreFn& score, const Vec& z, double sigma_cur, double sigma_next);
Vec heun_ode_step(const ScoreFn& score, const Vec& z, double sigma_cur, double sigma_next);
Vec euler_maruyama_step(const ScoreFn& score, const NoiseSchedule& schedule, const Vec& z, double sigma_cur,
                        double sigma_next, double beta, Rng& rng);
// deterministic half (gradient ascent on log p_sigma)
Vec langevin_churn_step(const ScoreFn& score, const Vec& z, double sigma, double eta);
Vec langevin_churn_step(const ScoreFn& score, const Vec& z, double sigma, double eta, Rng& rng);

// Generates n points by integrating the reverse process with guided_denoise
// as the score source. Chains are independent; chain c draws all of its
// randomness (condition, initial state, guidance noise, SDE noise) from a
// generator seeded with (cfg.seed, c), so results do not depend on
// scheduling or chunking.
SampleResult sample(const DenoiserInterface& model, const ConditioningPolicy& policy, const GuidanceConfig& guidance,
                    const SamplerConfig& cfg, int n, bool record_trajectories = false);

// Plain (unguided) sampling with the model's time input offset by delta.
SampleResult offset_time_sample(const DenoiserInterface& model, double delta, const ConditioningPolicy& policy,
                                const SamplerConfig& cfg, int n);

}  // namespace guidelab
