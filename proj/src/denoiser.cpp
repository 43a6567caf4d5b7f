#include "guidelab/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace guidelab {

namespace {

// ---- dense kernels (row-major) ---------------------------------------------

// C[ar x br] = A[ar x ac] * B[br x ac]^T
void gemm_abt(const double* a, int ar, int ac, const double* b, int br, double* c) {
    for (int i = 0; i < ar; ++i) {
        const double* ai = a + static_cast<size_t>(i) * ac;
        double* ci = c + static_cast<size_t>(i) * br;
        for (int j = 0; j < br; ++j) {
            const double* bj = b + static_cast<size_t>(j) * ac;
            double s = 0.0;
            for (int k = 0; k < ac; ++k) s += ai[k] * bj[k];
            ci[j] = s;
        }
    }
}

// C[ar x br] += A[ar x ac] * B[br x ac]^T
void gemm_abt_acc(const double* a, int ar, int ac, const double* b, int br, double* c) {
    for (int i = 0; i < ar; ++i) {
        const double* ai = a + static_cast<size_t>(i) * ac;
        double* ci = c + static_cast<size_t>(i) * br;
        for (int j = 0; j < br; ++j) {
            const double* bj = b + static_cast<size_t>(j) * ac;
            double s = 0.0;
            for (int k = 0; k < ac; ++k) s += ai[k] * bj[k];
            ci[j] += s;
        }
    }
}

// C[ar x bc] += A[ar x ac] * B[ac x bc]
void gemm_ab_acc(const double* a, int ar, int ac, const double* b, int bc, double* c) {
    for (int i = 0; i < ar; ++i) {
        const double* ai = a + static_cast<size_t>(i) * ac;
        double* ci = c + static_cast<size_t>(i) * bc;
        for (int k = 0; k < ac; ++k) {
            const double aik = ai[k];
            const double* bk = b + static_cast<size_t>(k) * bc;
            for (int j = 0; j < bc; ++j) ci[j] += aik * bk[j];
        }
    }
}

// C[ar x bc] = A[ar x ac] * B[ac x bc]
void gemm_ab(const double* a, int ar, int ac, const double* b, int bc, double* c) {
    std::fill(c, c + static_cast<size_t>(ar) * bc, 0.0);
    gemm_ab_acc(a, ar, ac, b, bc, c);
}

// C[m x n] += A[rows x m]^T * B[rows x n]
void accumulate_atb(const double* a, const double* b, int rows, int m, int n, double* c) {
    for (int r = 0; r < rows; ++r) {
        const double* ar = a + static_cast<size_t>(r) * m;
        const double* br = b + static_cast<size_t>(r) * n;
        for (int i = 0; i < m; ++i) {
            const double w = ar[i];
            double* ci = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) ci[j] += w * br[j];
        }
    }
}

void add_bias_rows(double* c, int rows, int cols, const double* bias) {
    for (int i = 0; i < rows; ++i) {
        double* ci = c + static_cast<size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) ci[j] += bias[j];
    }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// ---- time embedding ---------------------------------------------------------

TimeEmbedding TimeEmbedding::make(int dim, double omega_min, double omega_max) {
    if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("TimeEmbedding: dim must be even and >= 2");
    TimeEmbedding emb;
    emb.dim = dim;
    const int half = dim / 2;
    emb.omegas.resize(static_cast<size_t>(half));
    for (int i = 0; i < half; ++i) {
        const double frac = half > 1 ? static_cast<double>(i) / (half - 1) : 0.0;
        emb.omegas[static_cast<size_t>(i)] = omega_min * std::pow(omega_max / omega_min, frac);
    }
    return emb;
}

Vec TimeEmbedding::embed(double t) const {
    Vec e(static_cast<size_t>(dim));
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double phase = omegas[static_cast<size_t>(i)] * t;
        e[static_cast<size_t>(2 * i)] = std::sin(phase);
        e[static_cast<size_t>(2 * i + 1)] = std::cos(phase);
    }
    return e;
}

// ---- layout -----------------------------------------------------------------

ParamLayout::ParamLayout(const DenoiserArch& a) : arch(a) {
    if (a.data_dim < 1) throw std::invalid_argument("DenoiserArch: data_dim must be positive");
    if (a.num_classes < 1) throw std::invalid_argument("DenoiserArch: num_classes must be positive");
    if (a.width < 1) throw std::invalid_argument("DenoiserArch: width must be positive");
    if (a.depth < 2) throw std::invalid_argument("DenoiserArch: depth must be at least 2");
    if (a.embed_dim < 2 || a.embed_dim % 2 != 0)
        throw std::invalid_argument("DenoiserArch: embed_dim must be even and >= 2");
    const size_t d = static_cast<size_t>(a.data_dim);
    const size_t e = static_cast<size_t>(a.embed_dim);
    const size_t w = static_cast<size_t>(a.width);
    size_t off = 0;
    cond_table = off;
    off += (static_cast<size_t>(a.num_classes) + 1) * e;
    in_w = off;
    off += w * d;
    in_b = off;
    off += w;
    proj.push_back(off);
    off += w * e;
    for (int l = 1; l < a.depth; ++l) {
        hid_w.push_back(off);
        off += w * w;
        hid_b.push_back(off);
        off += w;
        proj.push_back(off);
        off += w * e;
    }
    out_w = off;
    off += d * w;
    out_b = off;
    off += d;
    total = off;
}

// ---- model ------------------------------------------------------------------

MlpDenoiser::MlpDenoiser(const DenoiserArch& arch, std::uint64_t init_seed)
    : layout_(arch), time_emb_(TimeEmbedding::make(arch.embed_dim)), params_(layout_.total, 0.0) {
    Rng rng(init_seed);
    const int d = arch.data_dim, e = arch.embed_dim, w = arch.width;
    auto fill_block = [&](size_t off, size_t count, double std) {
        for (size_t i = 0; i < count; ++i) params_[off + i] = std * rng.normal();
    };
    // class and null rows drawn alike, unit variance
    fill_block(layout_.cond_table, (static_cast<size_t>(arch.num_classes) + 1) * e, 1.0);
    fill_block(layout_.in_w, static_cast<size_t>(w) * d, std::sqrt(2.0 / d));
    for (int l = 1; l < arch.depth; ++l)
        fill_block(layout_.hid_w[static_cast<size_t>(l - 1)], static_cast<size_t>(w) * w, std::sqrt(2.0 / w));
    for (int l = 0; l < arch.depth; ++l)
        fill_block(layout_.proj[static_cast<size_t>(l)], static_cast<size_t>(w) * e, std::sqrt(1.0 / e));
    fill_block(layout_.out_w, static_cast<size_t>(d) * w, std::sqrt(1.0 / w));
    // biases stay zero
}

Vec MlpDenoiser::condition_embedding(const Condition& cond) const {
    const int e = embed_dim();
    if (std::holds_alternative<int>(cond)) {
        const int y = std::get<int>(cond);
        if (y < 0 || y >= num_classes()) throw std::domain_error("condition class index out of range");
        auto row = cond_table_row(y);
        return Vec(row.begin(), row.end());
    }
    if (std::holds_alternative<NullToken>(cond)) {
        auto row = cond_table_row(num_classes());
        return Vec(row.begin(), row.end());
    }
    const Vec& v = std::get<Vec>(cond);
    if (static_cast<int>(v.size()) != e) throw std::domain_error("explicit condition embedding has wrong length");
    return v;
}

std::span<const double> MlpDenoiser::cond_table_row(int row) const {
    const size_t e = static_cast<size_t>(embed_dim());
    return {params_.data() + layout_.cond_table + static_cast<size_t>(row) * e, e};
}

double MlpDenoiser::class_table_std() const {
    const int k = num_classes();
    const size_t e = static_cast<size_t>(embed_dim());
    const size_t n = static_cast<size_t>(k) * e;
    const double* table = params_.data() + layout_.cond_table;
    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) mean += table[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = table[i] - mean;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(n - 1));
}

Vec MlpDenoiser::forward(const Vec& z, std::span<const Vec> layer_embs) const {
    const int d = data_dim(), w = arch().width;
    const double* p = params_.data();
    Vec h(static_cast<size_t>(w));
    Vec a(static_cast<size_t>(w));
    // input layer
    gemm_abt(z.data(), 1, d, p + layout_.in_w, w, a.data());
    add_bias_rows(a.data(), 1, w, p + layout_.in_b);
    gemm_abt_acc(layer_embs[0].data(), 1, embed_dim(), p + layout_.proj[0], w, a.data());
    for (int j = 0; j < w; ++j) h[static_cast<size_t>(j)] = a[static_cast<size_t>(j)] * sigmoid(a[static_cast<size_t>(j)]);
    // hidden layers
    Vec h2(static_cast<size_t>(w));
    for (int l = 1; l < depth(); ++l) {
        gemm_abt(h.data(), 1, w, p + layout_.hid_w[static_cast<size_t>(l - 1)], w, a.data());
        add_bias_rows(a.data(), 1, w, p + layout_.hid_b[static_cast<size_t>(l - 1)]);
        gemm_abt_acc(layer_embs[static_cast<size_t>(l)].data(), 1, embed_dim(), p + layout_.proj[static_cast<size_t>(l)], w,
                     a.data());
        for (int j = 0; j < w; ++j)
            h2[static_cast<size_t>(j)] = a[static_cast<size_t>(j)] * sigmoid(a[static_cast<size_t>(j)]);
        std::swap(h, h2);
    }
    Vec out(static_cast<size_t>(d));
    gemm_abt(h.data(), 1, w, p + layout_.out_w, d, out.data());
    add_bias_rows(out.data(), 1, d, p + layout_.out_b);
    return out;
}

Vec MlpDenoiser::denoise(const Vec& z, double t, const Condition& cond) const {
    if (static_cast<int>(z.size()) != data_dim()) throw std::domain_error("denoise: input dimension mismatch");
    const Vec e = add(embed_time(t), condition_embedding(cond));
    std::vector<Vec> embs(static_cast<size_t>(depth()), e);
    return forward(z, embs);
}

Vec MlpDenoiser::denoise_layered(const Vec& z, std::span<const Vec> layer_embs) const {
    if (static_cast<int>(z.size()) != data_dim()) throw std::domain_error("denoise_layered: input dimension mismatch");
    if (static_cast<int>(layer_embs.size()) != depth())
        throw std::domain_error("denoise_layered: need one embedding per hidden layer");
    for (const Vec& e : layer_embs)
        if (static_cast<int>(e.size()) != embed_dim())
            throw std::domain_error("denoise_layered: embedding has wrong length");
    return forward(z, layer_embs);
}

Vec MlpDenoiser::denoiser_score(const Vec& z, double t, const Condition& cond) const {
    const double s = schedule().sigma(t);
    if (s <= 0.0) throw std::domain_error("denoiser_score: sigma(t) must be positive");
    Vec out = denoise(z, t, cond);
    const double inv = 1.0 / (s * s);
    for (size_t i = 0; i < out.size(); ++i) out[i] = (out[i] - z[i]) * inv;
    return out;
}

Vec MlpDenoiser::time_derivative(const Vec& z, double t, const Condition& cond, double h) const {
    if (!(h > 0.0)) throw std::domain_error("time_derivative: h must be positive");
    if (t - h < 0.0 || t + h > 1.0) throw std::domain_error("time_derivative: stencil leaves [0, 1]");
    const Vec hi = denoise(z, t + h, cond);
    const Vec lo = denoise(z, t - h, cond);
    Vec out(hi.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = (hi[i] - lo[i]) / (2.0 * h);
    return out;
}

void MlpDenoiser::set_parameters(std::span<const double> p) {
    if (p.size() != params_.size()) throw std::invalid_argument("set_parameters: size mismatch");
    std::copy(p.begin(), p.end(), params_.begin());
}

void MlpDenoiser::sgd_update(std::span<const double> grad, double lr) {
    if (grad.size() != params_.size()) throw std::invalid_argument("sgd_update: size mismatch");
    for (size_t i = 0; i < params_.size(); ++i) params_[i] -= lr * grad[i];
}

void MlpDenoiser::set_train_metadata(double label_drop_p, std::uint64_t seed, int steps) {
    label_drop_p_ = label_drop_p;
    train_seed_ = seed;
    train_steps_ = steps;
}

// ---- batch loss and gradient -------------------------------------------------

namespace {

struct BatchBuffers {
    Matrix emb;                 // B x E
    std::vector<Matrix> acts;   // depth of B x W pre-activations
    std::vector<Matrix> sig;    // depth of B x W sigmoid(pre)
    std::vector<Matrix> h;      // depth of B x W activations
    Matrix out;                 // B x d
};

void forward_batch(const MlpDenoiser& model, const TrainBatch& batch, BatchBuffers& buf) {
    const ParamLayout& lay = model.layout();
    const int bsz = batch.size();
    const int d = model.data_dim(), e = model.embed_dim(), w = model.arch().width, depth = model.depth();
    const double* p = model.parameters().data();

    buf.emb = Matrix(bsz, e);
    for (int b = 0; b < bsz; ++b) {
        const Vec te = model.embed_time(batch.t[static_cast<size_t>(b)]);
        auto crow = model.cond_table_row(batch.cond_row[static_cast<size_t>(b)]);
        auto row = buf.emb.row(b);
        for (int j = 0; j < e; ++j) row[static_cast<size_t>(j)] = te[static_cast<size_t>(j)] + crow[static_cast<size_t>(j)];
    }

    buf.acts.assign(static_cast<size_t>(depth), Matrix(bsz, w));
    buf.sig.assign(static_cast<size_t>(depth), Matrix(bsz, w));
    buf.h.assign(static_cast<size_t>(depth), Matrix(bsz, w));

    auto activate = [&](int layer) {
        Matrix& a = buf.acts[static_cast<size_t>(layer)];
        Matrix& sg = buf.sig[static_cast<size_t>(layer)];
        Matrix& hh = buf.h[static_cast<size_t>(layer)];
        for (size_t i = 0; i < a.data.size(); ++i) {
            const double s = sigmoid(a.data[i]);
            sg.data[i] = s;
            hh.data[i] = a.data[i] * s;
        }
    };

    Matrix& a0 = buf.acts[0];
    gemm_abt(batch.z.data.data(), bsz, d, p + lay.in_w, w, a0.data.data());
    add_bias_rows(a0.data.data(), bsz, w, p + lay.in_b);
    gemm_abt_acc(buf.emb.data.data(), bsz, e, p + lay.proj[0], w, a0.data.data());
    activate(0);

    for (int l = 1; l < depth; ++l) {
        Matrix& al = buf.acts[static_cast<size_t>(l)];
        gemm_abt(buf.h[static_cast<size_t>(l - 1)].data.data(), bsz, w, p + lay.hid_w[static_cast<size_t>(l - 1)], w,
                 al.data.data());
        add_bias_rows(al.data.data(), bsz, w, p + lay.hid_b[static_cast<size_t>(l - 1)]);
        gemm_abt_acc(buf.emb.data.data(), bsz, e, p + lay.proj[static_cast<size_t>(l)], w, al.data.data());
        activate(l);
    }

    buf.out = Matrix(bsz, d);
    gemm_abt(buf.h[static_cast<size_t>(depth - 1)].data.data(), bsz, w, p + lay.out_w, d, buf.out.data.data());
    add_bias_rows(buf.out.data.data(), bsz, d, p + lay.out_b);
}

double batch_mse(const TrainBatch& batch, const Matrix& out) {
    double loss = 0.0;
    for (size_t i = 0; i < out.data.size(); ++i) {
        const double r = out.data[i] - batch.x.data[i];
        loss += r * r;
    }
    return loss / batch.size();
}

}  // namespace

double MlpDenoiser::batch_loss(const TrainBatch& batch) const {
    BatchBuffers buf;
    forward_batch(*this, batch, buf);
    return batch_mse(batch, buf.out);
}

double MlpDenoiser::batch_loss_gradient(const TrainBatch& batch, std::span<double> grad) const {
    if (grad.size() != params_.size()) throw std::invalid_argument("batch_loss_gradient: grad size mismatch");
    std::fill(grad.begin(), grad.end(), 0.0);

    BatchBuffers buf;
    forward_batch(*this, batch, buf);
    const double loss = batch_mse(batch, buf.out);

    const ParamLayout& lay = layout_;
    const int bsz = batch.size();
    const int d = data_dim(), e = embed_dim(), w = arch().width, dep = depth();
    const double* p = params_.data();
    double* g = grad.data();

    // d(loss)/d(out)
    Matrix dout(bsz, d);
    const double inv_b = 2.0 / bsz;
    for (size_t i = 0; i < dout.data.size(); ++i)
        dout.data[i] = inv_b * (buf.out.data[i] - batch.x.data[i]);

    // output layer
    for (int b = 0; b < bsz; ++b) axpy(1.0, dout.row(b), {g + lay.out_b, static_cast<size_t>(d)});
    accumulate_atb(dout.data.data(), buf.h[static_cast<size_t>(dep - 1)].data.data(), bsz, d, w, g + lay.out_w);

    Matrix dh(bsz, w);
    gemm_ab(dout.data.data(), bsz, d, p + lay.out_w, w, dh.data.data());

    Matrix da(bsz, w);
    Matrix demb(bsz, e);  // accumulated over layers
    for (int l = dep - 1; l >= 0; --l) {
        const Matrix& a = buf.acts[static_cast<size_t>(l)];
        const Matrix& sg = buf.sig[static_cast<size_t>(l)];
        for (size_t i = 0; i < da.data.size(); ++i) {
            const double s = sg.data[i];
            da.data[i] = dh.data[i] * s * (1.0 + a.data[i] * (1.0 - s));
        }
        // bias
        const size_t b_off = l > 0 ? lay.hid_b[static_cast<size_t>(l - 1)] : lay.in_b;
        for (int b = 0; b < bsz; ++b) axpy(1.0, da.row(b), {g + b_off, static_cast<size_t>(w)});
        // embedding projection
        accumulate_atb(da.data.data(), buf.emb.data.data(), bsz, w, e, g + lay.proj[static_cast<size_t>(l)]);
        gemm_ab_acc(da.data.data(), bsz, w, p + lay.proj[static_cast<size_t>(l)], e, demb.data.data());
        if (l > 0) {
            accumulate_atb(da.data.data(), buf.h[static_cast<size_t>(l - 1)].data.data(), bsz, w, w,
                           g + lay.hid_w[static_cast<size_t>(l - 1)]);
            gemm_ab(da.data.data(), bsz, w, p + lay.hid_w[static_cast<size_t>(l - 1)], w, dh.data.data());
        } else {
            accumulate_atb(da.data.data(), batch.z.data.data(), bsz, w, d, g + lay.in_w);
        }
    }

    // scatter embedding gradients into the condition table rows
    for (int b = 0; b < bsz; ++b) {
        double* row = g + lay.cond_table + static_cast<size_t>(batch.cond_row[static_cast<size_t>(b)]) * e;
        axpy(1.0, demb.row(b), {row, static_cast<size_t>(e)});
    }

    return loss;
}

// ---- batch drawing and training ----------------------------------------------

TrainBatch draw_train_batch(const GmmOracle& data, const TrainConfig& cfg, int batch_size, Rng& data_rng) {
    const int d = data.dim();
    const double sigma_max = data.schedule().sigma_max;
    if (!(cfg.sigma_lo > 0.0 && cfg.sigma_lo < sigma_max))
        throw std::invalid_argument("TrainConfig: sigma_lo must lie in (0, sigma_max)");
    const double log_lo = std::log(cfg.sigma_lo), log_hi = std::log(sigma_max);
    TrainBatch batch;
    batch.z = Matrix(batch_size, d);
    batch.x = Matrix(batch_size, d);
    batch.t.resize(static_cast<size_t>(batch_size));
    batch.cond_row.resize(static_cast<size_t>(batch_size));
    for (int b = 0; b < batch_size; ++b) {
        const int k = data_rng.categorical(data.mixture().weights());
        batch.cond_row[static_cast<size_t>(b)] = k;
        const Vec& mu = data.mixture().mean(k);
        auto xrow = batch.x.row(b);
        for (int j = 0; j < d; ++j) xrow[static_cast<size_t>(j)] = mu[static_cast<size_t>(j)] + data_rng.normal();
        const double sigma = std::exp(log_lo + (log_hi - log_lo) * data_rng.uniform());
        batch.t[static_cast<size_t>(b)] = sigma / sigma_max;
        auto zrow = batch.z.row(b);
        for (int j = 0; j < d; ++j) zrow[static_cast<size_t>(j)] = xrow[static_cast<size_t>(j)] + sigma * data_rng.normal();
    }
    return batch;
}

void apply_label_dropping(TrainBatch& batch, double p, int null_row, Rng& drop_rng) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("label drop probability must lie in [0, 1]");
    for (auto& row : batch.cond_row)
        if (drop_rng.uniform() < p) row = null_row;
}

TrainResult train_denoiser(const GmmOracle& data, const DenoiserArch& arch, const TrainConfig& cfg) {
    if (cfg.total_steps < 1) throw std::invalid_argument("TrainConfig: total_steps must be >= 1");
    if (cfg.batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (cfg.label_drop_p < 0.0 || cfg.label_drop_p > 1.0)
        throw std::invalid_argument("TrainConfig: label_drop_p must lie in [0, 1]");
    if (arch.data_dim != data.dim()) throw std::invalid_argument("train: arch data_dim does not match data");
    if (arch.num_classes != data.num_classes())
        throw std::invalid_argument("train: arch num_classes does not match data");

    Rng data_rng = Rng::child(cfg.seed, 0);
    Rng drop_rng = Rng::child(cfg.seed, 1);

    TrainResult result{MlpDenoiser(arch, derive_seed(cfg.seed, 2)), {}, {}};
    MlpDenoiser& model = result.model;
    std::vector<double> grad(model.parameters().size());
    result.loss_trace.reserve(static_cast<size_t>(cfg.total_steps));

    std::vector<int> snapshot_steps;
    for (double f : cfg.snapshot_fractions) {
        int s = static_cast<int>(std::lround(f * cfg.total_steps));
        snapshot_steps.push_back(std::clamp(s, 1, cfg.total_steps));
    }

    for (int step = 0; step < cfg.total_steps; ++step) {
        TrainBatch batch = draw_train_batch(data, cfg, cfg.batch_size, data_rng);
        apply_label_dropping(batch, cfg.label_drop_p, arch.num_classes, drop_rng);
        const double loss = model.batch_loss_gradient(batch, grad);
        if (!std::isfinite(loss) || loss > 1e6)
            throw TrainingFailure("training diverged at step " + std::to_string(step) +
                                  " (loss=" + std::to_string(loss) + ")");
        model.sgd_update(grad, cfg.learning_rate);
        result.loss_trace.emplace_back(step, loss);

        for (size_t i = 0; i < snapshot_steps.size(); ++i) {
            if (snapshot_steps[i] == step + 1) {
                MlpDenoiser snap = model;
                snap.set_train_metadata(cfg.label_drop_p, cfg.seed, step + 1);
                result.snapshots.emplace_back(cfg.snapshot_fractions[i], std::move(snap));
            }
        }
    }
    model.set_train_metadata(cfg.label_drop_p, cfg.seed, cfg.total_steps);
    return result;
}

std::vector<double> smooth_trace(std::span<const std::pair<int, double>> trace, int window) {
    std::vector<double> out;
    if (trace.empty() || window < 1) return out;
    out.reserve(trace.size());
    double acc = 0.0;
    for (size_t i = 0; i < trace.size(); ++i) {
        acc += trace[i].second;
        if (i >= static_cast<size_t>(window)) acc -= trace[i - static_cast<size_t>(window)].second;
        const double n = std::min<double>(window, static_cast<double>(i + 1));
        out.push_back(acc / n);
    }
    return out;
}

// ---- checkpoints --------------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'G', 'L', 'A', 'B', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kCkptVersion = 1;

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw CheckpointError("checkpoint truncated or unreadable");
}
}  // namespace

void save_checkpoint(const MlpDenoiser& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, kCkptVersion);
    const DenoiserArch& a = model.arch();
    write_pod(os, static_cast<std::uint32_t>(a.data_dim));
    write_pod(os, static_cast<std::uint32_t>(a.embed_dim));
    write_pod(os, static_cast<std::uint32_t>(a.width));
    write_pod(os, static_cast<std::uint32_t>(a.depth));
    write_pod(os, static_cast<std::uint32_t>(a.num_classes));
    write_pod(os, a.sigma_max);
    write_pod(os, model.label_drop_p());
    write_pod(os, model.train_seed());
    write_pod(os, static_cast<std::uint32_t>(model.train_steps()));
    const auto params = model.parameters();
    write_pod(os, static_cast<std::uint64_t>(params.size()));
    os.write(reinterpret_cast<const char*>(params.data()),
             static_cast<std::streamsize>(params.size() * sizeof(double)));
    if (!os) throw CheckpointError("failed writing checkpoint: " + path);
}

MlpDenoiser load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError("not a denoiser checkpoint: " + path);
    std::uint32_t version = 0;
    read_pod(is, version);
    if (version != kCkptVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    std::uint32_t data_dim = 0, embed_dim = 0, width = 0, depth = 0, num_classes = 0;
    read_pod(is, data_dim);
    read_pod(is, embed_dim);
    read_pod(is, width);
    read_pod(is, depth);
    read_pod(is, num_classes);
    DenoiserArch arch;
    arch.data_dim = static_cast<int>(data_dim);
    arch.embed_dim = static_cast<int>(embed_dim);
    arch.width = static_cast<int>(width);
    arch.depth = static_cast<int>(depth);
    arch.num_classes = static_cast<int>(num_classes);
    read_pod(is, arch.sigma_max);
    double label_drop_p = -1.0;
    std::uint64_t train_seed = 0;
    std::uint32_t train_steps = 0;
    read_pod(is, label_drop_p);
    read_pod(is, train_seed);
    read_pod(is, train_steps);
    std::uint64_t count = 0;
    read_pod(is, count);

    MlpDenoiser model(arch, 0);
    if (count != model.parameters().size())
        throw CheckpointError("checkpoint parameter count does not match architecture");
    std::vector<double> params(count);
    is.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!is || is.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
        throw CheckpointError("checkpoint truncated: " + path);
    model.set_parameters(params);
    model.set_train_metadata(label_drop_p, train_seed, static_cast<int>(train_steps));
    return model;
}

}  // namespace guidelab
