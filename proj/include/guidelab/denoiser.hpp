#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "guidelab/common.hpp"
#include "guidelab/mixture.hpp"
#include "guidelab/rng.hpp"

namespace guidelab {

// Sinusoidal features of the scalar time step, frequencies geometric between
// omega_min and omega_max. Entries are bounded by 1 in absolute value.
struct TimeEmbedding {
    int dim = 32;  // even
    Vec omegas;    // dim/2 angular frequencies

    static TimeEmbedding make(int dim, double omega_min = 1.0, double omega_max = 50.0);
    Vec embed(double t) const;
};

struct NullToken {
    bool operator==(const NullToken&) const = default;
};

// Condition input of the denoiser: a class index, the null token, or an
// explicit embedding vector (ICG's Gaussian mode bypasses the class table).
using Condition = std::variant<int, NullToken, Vec>;

struct DenoiserArch {
    int data_dim = 2;
    int num_classes = 2;
    int embed_dim = 32;  // E, even
    int width = 128;     // W
    int depth = 6;       // L hidden layers
    double sigma_max = 20.0;
};

// Offsets of each parameter block inside the flat parameter vector.
struct ParamLayout {
    DenoiserArch arch;
    size_t cond_table = 0;           // (K+1) x E, row K is the null token
    size_t in_w = 0, in_b = 0;       // W x d, W
    std::vector<size_t> hid_w;       // depth-1 blocks of W x W
    std::vector<size_t> hid_b;       // depth-1 blocks of W
    std::vector<size_t> proj;        // depth blocks of W x E
    size_t out_w = 0, out_b = 0;     // d x W, d
    size_t total = 0;

    explicit ParamLayout(const DenoiserArch& a);
};

// One training batch; cond_row is the class-table row per sample (K = null).
struct TrainBatch {
    Matrix z;
    Matrix x;
    std::vector<double> t;
    std::vector<int> cond_row;
    int size() const { return z.rows; }
};

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 256;
    int total_steps = 20000;
    double label_drop_p = 0.1;
    // training-time noise-level law: sigma log-uniform in [sigma_lo, sigma_max]
    double sigma_lo = 0.02;
    std::uint64_t seed = 0;
    std::vector<double> snapshot_fractions;  // e.g. {0.25, 0.5, 0.75, 1.0}
};

// Small MLP denoiser D(z, t, cond). Each hidden layer receives a learned
// projection of (time embedding + condition embedding) added to its
// pre-activation; TSG's layer-limited perturbation enters through
// denoise_layered. Evaluation is pure; only train_denoiser, set_parameters
// and checkpoint loading mutate parameters.
class MlpDenoiser {
   public:
    MlpDenoiser(const DenoiserArch& arch, std::uint64_t init_seed);

    const DenoiserArch& arch() const { return layout_.arch; }
    int data_dim() const { return layout_.arch.data_dim; }
    int num_classes() const { return layout_.arch.num_classes; }
    int embed_dim() const { return layout_.arch.embed_dim; }
    int depth() const { return layout_.arch.depth; }
    NoiseSchedule schedule() const { return NoiseSchedule{layout_.arch.sigma_max}; }
    const TimeEmbedding& time_embedding() const { return time_emb_; }

    Vec embed_time(double t) const { return time_emb_.embed(t); }
    // class row, null row, or the explicit vector (validated for length)
    Vec condition_embedding(const Condition& cond) const;
    // empirical std over all entries of the K class rows (null row excluded)
    double class_table_std() const;

    Vec denoise(const Vec& z, double t, const Condition& cond) const;
    // layer_embs supplies the full injected embedding for each hidden layer
    Vec denoise_layered(const Vec& z, std::span<const Vec> layer_embs) const;
    Vec denoiser_score(const Vec& z, double t, const Condition& cond) const;
    // central difference (D(z,t+h) - D(z,t-h)) / (2h)
    Vec time_derivative(const Vec& z, double t, const Condition& cond, double h) const;

    double batch_loss(const TrainBatch& batch) const;
    double batch_loss_gradient(const TrainBatch& batch, std::span<double> grad) const;

    std::span<const double> parameters() const { return params_; }
    void set_parameters(std::span<const double> p);
    void sgd_update(std::span<const double> grad, double lr);

    const ParamLayout& layout() const { return layout_; }
    std::span<const double> cond_table_row(int row) const;

    // training metadata (persisted in checkpoints)
    double label_drop_p() const { return label_drop_p_; }
    std::uint64_t train_seed() const { return train_seed_; }
    int train_steps() const { return train_steps_; }
    void set_train_metadata(double label_drop_p, std::uint64_t seed, int steps);

   private:
    Vec forward(const Vec& z, std::span<const Vec> layer_embs) const;

    ParamLayout layout_;
    TimeEmbedding time_emb_;
    std::vector<double> params_;
    double label_drop_p_ = -1.0;  // negative: not trained
    std::uint64_t train_seed_ = 0;
    int train_steps_ = 0;
};

// Draws a fresh batch (labels, clean points, noise levels, noisy points) from
// the data distribution. Label dropping is applied separately so that the
// data stream is identical across drop probabilities for matched seeds.
TrainBatch draw_train_batch(const GmmOracle& data, const TrainConfig& cfg, int batch_size, Rng& data_rng);
void apply_label_dropping(TrainBatch& batch, double p, int null_row, Rng& drop_rng);

struct TrainResult {
    MlpDenoiser model;
    std::vector<std::pair<int, double>> loss_trace;                  // (step, batch loss)
    std::vector<std::pair<double, MlpDenoiser>> snapshots;           // (fraction, model copy)
};

TrainResult train_denoiser(const GmmOracle& data, const DenoiserArch& arch, const TrainConfig& cfg);

void save_checkpoint(const MlpDenoiser& model, const std::string& path);
MlpDenoiser load_checkpoint(const std::string& path);

// Smoothed view of a loss trace (trailing window mean).
std::vector<double> smooth_trace(std::span<const std::pair<int, double>> trace, int window);

}  // namespace guidelab
