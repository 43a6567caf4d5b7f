#include "guidelab/sampler.hpp"

#include <cmath>
#include <string>

namespace guidelab {

std::vector<double> make_sigma_grid(const SamplerConfig& cfg) {
    if (cfg.steps < 1) throw std::invalid_argument("SamplerConfig: steps must be >= 1");
    if (!(cfg.sigma_min > 0.0)) throw std::domain_error("SamplerConfig: sigma_min must be > 0");
    if (!(cfg.sigma_max > cfg.sigma_min)) throw std::invalid_argument("SamplerConfig: sigma_max must exceed sigma_min");
    std::vector<double> grid(static_cast<size_t>(cfg.steps) + 1);
    const int n = cfg.steps;
    if (n == 1) {
        grid[0] = cfg.sigma_max;
    } else {
        const double ratio = std::pow(cfg.sigma_min / cfg.sigma_max, 1.0 / (n - 1));
        double s = cfg.sigma_max;
        for (int i = 0; i < n; ++i) {
            grid[static_cast<size_t>(i)] = s;
            s *= ratio;
        }
        grid[static_cast<size_t>(n - 1)] = cfg.sigma_min;
    }
    grid[static_cast<size_t>(n)] = 0.0;
    return grid;
}

Vec euler_ode_step(const ScoreFn& score, const Vec& z, double sigma_cur, double sigma_next) {
    if (!(sigma_cur > 0.0)) throw std::domain_error("euler_ode_step: sigma_cur must be > 0");
    if (sigma_next == sigma_cur) return z;
    // d = (z - x_hat)/sigma = -sigma * score
    const Vec s = score(z, sigma_cur);
    Vec out(z);
    const double h = sigma_next - sigma_cur;
    for (size_t i = 0; i < out.size(); ++i) out[i] += h * (-sigma_cur * s[i]);
    return out;
}

Vec heun_ode_step(const ScoreFn& score, const Vec& z, double sigma_cur, double sigma_next) {
    if (!(sigma_cur > 0.0)) throw std::domain_error("heun_ode_step: sigma_cur must be > 0");
    if (sigma_next == sigma_cur) return z;
    const Vec s1 = score(z, sigma_cur);
    const double h = sigma_next - sigma_cur;
    Vec z_euler(z);
    for (size_t i = 0; i < z.size(); ++i) z_euler[i] += h * (-sigma_cur * s1[i]);
    // no trapezoidal correction into sigma = 0, where the score is undefined
    if (sigma_next == 0.0) return z_euler;
    const Vec s2 = score(z_euler, sigma_next);
    Vec out(z);
    for (size_t i = 0; i < z.size(); ++i)
        out[i] += 0.5 * h * ((-sigma_cur * s1[i]) + (-sigma_next * s2[i]));
    return out;
}

Vec euler_maruyama_step(const ScoreFn& score, const NoiseSchedule& schedule, const Vec& z, double sigma_cur,
                        double sigma_next, double beta, Rng& rng) {
    if (beta < 0.0) throw std::invalid_argument("euler_maruyama_step: beta must be >= 0");
    if (beta == 0.0) return euler_ode_step(score, z, sigma_cur, sigma_next);
    if (!(sigma_cur > 0.0)) throw std::domain_error("euler_maruyama_step: sigma_cur must be > 0");
    const Vec s = score(z, sigma_cur);
    const double dt = schedule.time_of_sigma(sigma_next) - schedule.time_of_sigma(sigma_cur);  // negative
    const double dsigma = sigma_next - sigma_cur;
    Vec out(z);
    const double noise_std = std::sqrt(2.0 * beta * std::abs(dt)) * sigma_cur;
    for (size_t i = 0; i < out.size(); ++i) {
        const double drift_ode = dsigma * (-sigma_cur * s[i]);
        const double drift_langevin = -beta * sigma_cur * sigma_cur * s[i] * dt;
        out[i] += drift_ode + drift_langevin + noise_std * rng.normal();
    }
    return out;
}

Vec langevin_churn_step(const ScoreFn& score, const Vec& z, double sigma, double eta) {
    if (!(eta > 0.0)) throw std::invalid_argument("langevin_churn_step: eta must be > 0");
    const Vec s = score(z, sigma);
    Vec out(z);
    for (size_t i = 0; i < out.size(); ++i) out[i] += eta * s[i];
    return out;
}

Vec langevin_churn_step(const ScoreFn& score, const Vec& z, double sigma, double eta, Rng& rng) {
    Vec out = langevin_churn_step(score, z, sigma, eta);
    const double noise = std::sqrt(2.0 * eta);
    for (auto& v : out) v += noise * rng.normal();
    return out;
}

namespace {

Vec run_chain(const DenoiserInterface& model, const ConditioningPolicy& policy, const GuidanceConfig& guidance,
              const SamplerConfig& cfg, const std::vector<double>& grid, std::uint64_t chain_index,
              std::optional<int>& condition_out, Trajectory* traj) {
    Rng rng = Rng::child(cfg.seed, chain_index);
    const NoiseSchedule schedule = model.schedule();
    const int d = model.data_dim();

    std::optional<int> y;
    switch (policy.kind) {
        case ConditioningPolicy::Kind::kClassPrior: {
            if (policy.prior.empty()) {
                const Vec uniform(static_cast<size_t>(model.num_classes()), 1.0 / model.num_classes());
                y = rng.categorical(uniform);
            } else {
                if (static_cast<int>(policy.prior.size()) != model.num_classes())
                    throw std::invalid_argument("ConditioningPolicy: prior length does not match class count");
                y = rng.categorical(policy.prior);
            }
            break;
        }
        case ConditioningPolicy::Kind::kFixedClass:
            y = policy.fixed_class;
            break;
        case ConditioningPolicy::Kind::kUnconditional:
            y = std::nullopt;
            break;
    }
    condition_out = y;

    Vec z(static_cast<size_t>(d));
    for (auto& v : z) v = cfg.sigma_max * rng.normal();

    const ScoreFn score = [&](const Vec& zz, double s) -> Vec {
        const double t = schedule.time_of_sigma(s);
        Vec d_hat = guided_denoise(model, zz, t, y, guidance, rng);
        const double inv = 1.0 / (s * s);
        for (size_t i = 0; i < d_hat.size(); ++i) d_hat[i] = (d_hat[i] - zz[i]) * inv;
        return d_hat;
    };

    if (traj) {
        traj->times.push_back(schedule.time_of_sigma(grid[0]));
        traj->states.push_back(z);
    }

    for (int i = 0; i < cfg.steps; ++i) {
        const double s_cur = grid[static_cast<size_t>(i)];
        const double s_next = grid[static_cast<size_t>(i) + 1];
        switch (cfg.solver) {
            case SolverKind::kEulerOde:
                z = euler_ode_step(score, z, s_cur, s_next);
                break;
            case SolverKind::kHeunOde:
                z = heun_ode_step(score, z, s_cur, s_next);
                break;
            case SolverKind::kEulerMaruyamaSde:
                z = euler_maruyama_step(score, schedule, z, s_cur, s_next, cfg.beta, rng);
                break;
            case SolverKind::kLangevinChurn:
                // annealed Langevin: churn at the current level, then contract
                z = langevin_churn_step(score, z, s_cur, cfg.churn_eta * s_cur * s_cur, rng);
                z = euler_ode_step(score, z, s_cur, s_next);
                break;
        }
        if (!all_finite(z))
            throw SamplingFailure("non-finite state at step " + std::to_string(i) + " (sigma=" +
                                  std::to_string(s_cur) + ")");
        if (traj) {
            traj->times.push_back(schedule.time_of_sigma(s_next));
            traj->states.push_back(z);
        }
    }
    return z;
}

}  // namespace

SampleResult sample(const DenoiserInterface& model, const ConditioningPolicy& policy, const GuidanceConfig& guidance,
                    const SamplerConfig& cfg, int n, bool record_trajectories) {
    if (n < 0) throw std::invalid_argument("sample: n must be >= 0");
    const std::vector<double> grid = make_sigma_grid(cfg);
    SampleResult result;
    result.points = Matrix(n, model.data_dim());
    result.conditions.assign(static_cast<size_t>(n), -1);
    if (record_trajectories) result.trajectories.resize(static_cast<size_t>(n));

    for (int c = 0; c < n; ++c) {
        std::optional<int> y;
        Trajectory* traj = record_trajectories ? &result.trajectories[static_cast<size_t>(c)] : nullptr;
        const Vec z = run_chain(model, policy, guidance, cfg, grid, static_cast<std::uint64_t>(c), y, traj);
        result.points.set_row(c, z);
        result.conditions[static_cast<size_t>(c)] = y.value_or(-1);
    }
    return result;
}

SampleResult offset_time_sample(const DenoiserInterface& model, double delta, const ConditioningPolicy& policy,
                                const SamplerConfig& cfg, int n) {
    const OffsetTimeEvaluator shifted(model, delta);
    return sample(shifted, policy, GuidanceConfig{}, cfg, n);
}

}  // namespace guidelab
