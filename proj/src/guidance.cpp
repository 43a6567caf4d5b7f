#include "guidelab/guidance.hpp"

#include <cmath>

namespace guidelab {

Vec OracleEvaluator::denoise(const Vec& z, double t, const Condition& cond) const {
    const double s = oracle_->schedule().sigma(t);
    Vec score;
    if (std::holds_alternative<int>(cond)) {
        score = oracle_->cond_score(z, t, std::get<int>(cond));
    } else if (std::holds_alternative<NullToken>(cond)) {
        score = oracle_->uncond_score(z, t);
    } else {
        throw ConfigurationError("oracle evaluator accepts class or null conditions only");
    }
    Vec out(z);
    axpy(s * s, score, out);
    return out;
}

void TsgSchedule::validate() const {
    if (s < 0.0) throw std::invalid_argument("TsgSchedule: s must be >= 0");
    if (!(t_min >= 0.0 && t_min <= t_max && t_max <= 1.0))
        throw std::invalid_argument("TsgSchedule: need 0 <= t_min <= t_max <= 1");
}

Vec cfg_denoise(const DenoiserInterface& model, const Vec& z, double t, int y, double w) {
    if (!model.has_null_branch())
        throw ConfigurationError(
            "CFG needs a model trained with label dropping (null token); use ICG on purely conditional models");
    const Vec d_cond = model.denoise(z, t, y);
    if (w == 1.0) return d_cond;
    const Vec d_null = model.denoise(z, t, NullToken{});
    Vec out(d_null);
    for (size_t i = 0; i < out.size(); ++i) out[i] += w * (d_cond[i] - d_null[i]);
    return out;
}

Condition draw_independent_condition(const DenoiserInterface& model, const IcgSettings& icg, Rng& rng) {
    if (icg.mode == IcgMode::kRandomCondition) {
        return icg.law.sample(model.num_classes(), rng);
    }
    // Gaussian mode: an explicit embedding with entries scaled to the class table
    if (!model.has_embedding_space())
        throw ConfigurationError("Gaussian-noise ICG needs an evaluator with an embedding space");
    const double std = icg.gaussian_scale * model.condition_table_std();
    Vec e(static_cast<size_t>(model.embed_dim()));
    for (auto& v : e) v = std * rng.normal();
    return e;
}

Vec icg_denoise(const DenoiserInterface& model, const Vec& z, double t, int y, double w, const IcgSettings& icg,
                Rng& rng) {
    const Vec d_cond = model.denoise(z, t, y);
    if (w == 1.0) return d_cond;
    const Condition y_hat = draw_independent_condition(model, icg, rng);
    const Vec d_hat = model.denoise(z, t, y_hat);
    Vec out(d_hat);
    for (size_t i = 0; i < out.size(); ++i) out[i] += w * (d_cond[i] - d_hat[i]);
    return out;
}

Vec tsg_perturb_embedding(const Vec& e_t, double t, const TsgSchedule& sched, Rng& rng) {
    sched.validate();
    if (t < sched.t_min || t > sched.t_max) return e_t;
    double noise_scale = sched.kind == TsgSchedule::Kind::kPower ? sched.s * std::pow(t, sched.alpha) : sched.s;
    if (sched.std_scaling) {
        // empirical std of the embedding entries (Bessel-corrected)
        double mean = 0.0;
        for (double v : e_t) mean += v;
        mean /= static_cast<double>(e_t.size());
        double ss = 0.0;
        for (double v : e_t) ss += (v - mean) * (v - mean);
        noise_scale *= std::sqrt(ss / static_cast<double>(e_t.size() - 1));
    }
    Vec out(e_t);
    if (noise_scale == 0.0) return out;
    for (auto& v : out) v += noise_scale * rng.normal();
    return out;
}

namespace {

// D evaluated with the perturbed time embedding on the first layer_count
// layers and the clean embedding on the rest.
Vec tsg_perturbed_branch(const DenoiserInterface& model, const Vec& z, double t, const Condition& cond,
                         const TsgSchedule& sched, Rng& rng) {
    if (!model.has_embedding_space())
        throw ConfigurationError("TSG needs an evaluator with a time-step embedding");
    const int layers = model.layer_count();
    const int perturbed_layers = sched.layer_count < 0 ? layers : std::min(sched.layer_count, layers);
    const Vec e_t = model.time_embedding(t);
    const Vec e_t_pert = tsg_perturb_embedding(e_t, t, sched, rng);
    const Vec e_cond = model.condition_embedding(cond);
    const Vec clean_sum = add(e_t, e_cond);
    const Vec pert_sum = add(e_t_pert, e_cond);
    std::vector<Vec> layer_embs(static_cast<size_t>(layers));
    for (int l = 0; l < layers; ++l) layer_embs[static_cast<size_t>(l)] = l < perturbed_layers ? pert_sum : clean_sum;
    return model.denoise_layered(z, layer_embs);
}

}  // namespace

Vec tsg_denoise(const DenoiserInterface& model, const Vec& z, double t, const Condition& cond, double w,
                const TsgSchedule& sched, Rng& rng) {
    sched.validate();
    const Vec d_clean = model.denoise(z, t, cond);
    if (w == 1.0) return d_clean;
    const Vec d_pert = tsg_perturbed_branch(model, z, t, cond, sched, rng);
    Vec out(d_pert);
    for (size_t i = 0; i < out.size(); ++i) out[i] += w * (d_clean[i] - d_pert[i]);
    return out;
}

Vec guided_denoise(const DenoiserInterface& model, const Vec& z, double t, std::optional<int> y,
                   const GuidanceConfig& cfg, Rng& rng) {
    const auto base_condition = [&]() -> Condition {
        if (y.has_value()) return *y;
        if (!model.has_null_branch())
            throw ConfigurationError("unconditional evaluation needs a model with a trained null branch");
        return NullToken{};
    };

    switch (cfg.rule) {
        case GuidanceRule::kNone:
            return model.denoise(z, t, base_condition());
        case GuidanceRule::kCfg: {
            if (!y.has_value()) throw ConfigurationError("CFG needs a condition");
            return cfg_denoise(model, z, t, *y, cfg.w_cfg);
        }
        case GuidanceRule::kIcg: {
            if (!y.has_value()) throw ConfigurationError("ICG needs a condition");
            return icg_denoise(model, z, t, *y, cfg.w_icg, cfg.icg, rng);
        }
        case GuidanceRule::kTsg:
            return tsg_denoise(model, z, t, base_condition(), cfg.w_tsg, cfg.tsg, rng);
        case GuidanceRule::kIcgAndTsg: {
            if (!y.has_value()) throw ConfigurationError("ICG+TSG needs a condition");
            // Both rules are corrections around the conditional branch:
            //   D + (w_icg - 1)(D - D_hat) + (w_tsg - 1)(D - D_pert).
            // Branches with weight exactly 1 are skipped so that, e.g.,
            // w_icg = 1 consumes the same random stream as plain TSG.
            const Vec d_cond = model.denoise(z, t, *y);
            Vec out(d_cond);
            if (cfg.w_icg != 1.0) {
                const Condition y_hat = draw_independent_condition(model, cfg.icg, rng);
                const Vec d_hat = model.denoise(z, t, y_hat);
                for (size_t i = 0; i < out.size(); ++i) out[i] += (cfg.w_icg - 1.0) * (d_cond[i] - d_hat[i]);
            }
            if (cfg.w_tsg != 1.0) {
                cfg.tsg.validate();
                const Vec d_pert = tsg_perturbed_branch(model, z, t, *y, cfg.tsg, rng);
                for (size_t i = 0; i < out.size(); ++i) out[i] += (cfg.w_tsg - 1.0) * (d_cond[i] - d_pert[i]);
            }
            return out;
        }
    }
    throw std::logic_error("guided_denoise: bad rule");
}

}  // namespace guidelab
