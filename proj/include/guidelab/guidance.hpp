#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "guidelab/common.hpp"
#include "guidelab/denoiser.hpp"
#include "guidelab/mixture.hpp"
#include "guidelab/rng.hpp"

namespace guidelab {

// Anything that can act as a denoiser D(z, t, cond). The embedding-level
// hooks (layered evaluation, condition table) back TSG and ICG's Gaussian
// mode; evaluators without an embedding space (the analytic oracle) report
// has_embedding_space() == false and the corresponding rules refuse them.
class DenoiserInterface {
   public:
    virtual ~DenoiserInterface() = default;

    virtual int data_dim() const = 0;
    virtual int num_classes() const = 0;
    virtual NoiseSchedule schedule() const = 0;
    virtual Vec denoise(const Vec& z, double t, const Condition& cond) const = 0;
    // true if the null-token branch estimates the unconditional denoiser
    virtual bool has_null_branch() const = 0;

    virtual bool has_embedding_space() const { return false; }
    virtual int embed_dim() const { throw ConfigurationError("evaluator has no embedding space"); }
    virtual int layer_count() const { throw ConfigurationError("evaluator has no embedding space"); }
    virtual Vec time_embedding(double) const { throw ConfigurationError("evaluator has no embedding space"); }
    virtual Vec condition_embedding(const Condition&) const {
        throw ConfigurationError("evaluator has no embedding space");
    }
    virtual double condition_table_std() const { throw ConfigurationError("evaluator has no embedding space"); }
    virtual Vec denoise_layered(const Vec&, std::span<const Vec>) const {
        throw ConfigurationError("evaluator has no embedding space");
    }
};

// Exact denoiser derived from the analytic mixture scores: D = z + sigma^2 * score.
class OracleEvaluator : public DenoiserInterface {
   public:
    explicit OracleEvaluator(const GmmOracle& oracle) : oracle_(&oracle) {}

    int data_dim() const override { return oracle_->dim(); }
    int num_classes() const override { return oracle_->num_classes(); }
    NoiseSchedule schedule() const override { return oracle_->schedule(); }
    bool has_null_branch() const override { return true; }
    Vec denoise(const Vec& z, double t, const Condition& cond) const override;

    const GmmOracle& oracle() const { return *oracle_; }

   private:
    const GmmOracle* oracle_;
};

// Trained-model evaluator. The null branch is only meaningful when the model
// was trained with label dropping (p > 0).
class MlpEvaluator : public DenoiserInterface {
   public:
    explicit MlpEvaluator(const MlpDenoiser& model)
        : model_(&model), null_ok_(model.label_drop_p() > 0.0) {}
    MlpEvaluator(const MlpDenoiser& model, bool null_ok) : model_(&model), null_ok_(null_ok) {}

    int data_dim() const override { return model_->data_dim(); }
    int num_classes() const override { return model_->num_classes(); }
    NoiseSchedule schedule() const override { return model_->schedule(); }
    bool has_null_branch() const override { return null_ok_; }
    Vec denoise(const Vec& z, double t, const Condition& cond) const override {
        return model_->denoise(z, t, cond);
    }

    bool has_embedding_space() const override { return true; }
    int embed_dim() const override { return model_->embed_dim(); }
    int layer_count() const override { return model_->depth(); }
    Vec time_embedding(double t) const override { return model_->embed_time(t); }
    Vec condition_embedding(const Condition& cond) const override { return model_->condition_embedding(cond); }
    double condition_table_std() const override { return model_->class_table_std(); }
    Vec denoise_layered(const Vec& z, std::span<const Vec> layer_embs) const override {
        return model_->denoise_layered(z, layer_embs);
    }

    const MlpDenoiser& model() const { return *model_; }

   private:
    const MlpDenoiser* model_;
    bool null_ok_;
};

// Evaluates the wrapped model with the time input shifted by a constant
// offset (clamped to [0, 1]); the diagnostic probe for mismatched
// noise-level beliefs.
class OffsetTimeEvaluator : public DenoiserInterface {
   public:
    OffsetTimeEvaluator(const DenoiserInterface& inner, double delta) : inner_(&inner), delta_(delta) {}

    int data_dim() const override { return inner_->data_dim(); }
    int num_classes() const override { return inner_->num_classes(); }
    NoiseSchedule schedule() const override { return inner_->schedule(); }
    bool has_null_branch() const override { return inner_->has_null_branch(); }
    Vec denoise(const Vec& z, double t, const Condition& cond) const override {
        return inner_->denoise(z, shift(t), cond);
    }
    bool has_embedding_space() const override { return inner_->has_embedding_space(); }
    int embed_dim() const override { return inner_->embed_dim(); }
    int layer_count() const override { return inner_->layer_count(); }
    Vec time_embedding(double t) const override { return inner_->time_embedding(shift(t)); }
    Vec condition_embedding(const Condition& cond) const override { return inner_->condition_embedding(cond); }
    double condition_table_std() const override { return inner_->condition_table_std(); }
    Vec denoise_layered(const Vec& z, std::span<const Vec> layer_embs) const override {
        return inner_->denoise_layered(z, layer_embs);
    }

   private:
    double shift(double t) const { return std::min(1.0, std::max(0.0, t + delta_)); }

    const DenoiserInterface* inner_;
    double delta_;
};

// ---- guidance configuration ---------------------------------------------------

enum class GuidanceRule { kNone, kCfg, kIcg, kTsg, kIcgAndTsg };

enum class IcgMode { kGaussianNoise, kRandomCondition };

struct IcgSettings {
    IcgMode mode = IcgMode::kRandomCondition;
    double gaussian_scale = 1.0;  // multiplies the class-table std
    IndependentConditionLaw law;  // random-condition mode
};

struct TsgSchedule {
    enum class Kind { kConstant, kPower };

    Kind kind = Kind::kPower;
    double s = 1.0;       // noise scale
    double alpha = 1.0;   // exponent (power kind)
    double t_min = 0.0;   // gating interval
    double t_max = 1.0;
    bool std_scaling = true;
    int layer_count = -1;  // leading layers that see the perturbed embedding; -1: all

    void validate() const;
};

struct GuidanceConfig {
    GuidanceRule rule = GuidanceRule::kNone;
    double w_cfg = 1.0;
    double w_icg = 1.0;
    double w_tsg = 1.0;
    IcgSettings icg;
    TsgSchedule tsg;
    std::uint64_t seed = 0;
};

// ---- guidance rules -------------------------------------------------------------

Vec cfg_denoise(const DenoiserInterface& model, const Vec& z, double t, int y, double w);

Condition draw_independent_condition(const DenoiserInterface& model, const IcgSettings& icg, Rng& rng);

Vec icg_denoise(const DenoiserInterface& model, const Vec& z, double t, int y, double w, const IcgSettings& icg,
                Rng& rng);

Vec tsg_perturb_embedding(const Vec& e_t, double t, const TsgSchedule& sched, Rng& rng);

Vec tsg_denoise(const DenoiserInterface& model, const Vec& z, double t, const Condition& cond, double w,
                const TsgSchedule& sched, Rng& rng);

Vec guided_denoise(const DenoiserInterface& model, const Vec& z, double t, std::optional<int> y,
                   const GuidanceConfig& cfg, Rng& rng);

}  // namespace guidelab
