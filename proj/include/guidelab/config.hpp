#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "guidelab/denoiser.hpp"
#include "guidelab/guidance.hpp"
#include "guidelab/mixture.hpp"
#include "guidelab/sampler.hpp"

namespace guidelab {

// Plain-text `key = value` store with '#' comments. Keys keep insertion
// order so serialization round-trips byte-for-byte after normalization.
class KeyValueConfig {
   public:
    static KeyValueConfig parse_string(const std::string& text);
    static KeyValueConfig parse_file(const std::string& path);

    std::string serialize() const;
    void save(const std::string& path) const;

    bool has(const std::string& key) const;
    void set(const std::string& key, const std::string& value);
    void set_double(const std::string& key, double value);
    void set_int(const std::string& key, long long value);
    void set_bool(const std::string& key, bool value);
    void set_vector(const std::string& key, const Vec& v);
    void set_vector_list(const std::string& key, const std::vector<Vec>& vs);

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    Vec get_vector(const std::string& key) const;
    Vec get_vector(const std::string& key, const Vec& fallback) const;
    std::vector<Vec> get_vector_list(const std::string& key) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    // FNV-1a over the canonical serialization; stamped into CSV provenance lines.
    std::uint64_t hash() const;

   private:
    const std::string* find(const std::string& key) const;

    std::vector<std::pair<std::string, std::string>> entries_;
};

// ---- typed serialization ----------------------------------------------------

void mixture_to_config(const GaussianMixture& mixture, const NoiseSchedule& schedule, KeyValueConfig& cfg,
                       const std::string& prefix = "mixture.");
GmmOracle mixture_from_config(const KeyValueConfig& cfg, const std::string& prefix = "mixture.");

void guidance_to_config(const GuidanceConfig& g, KeyValueConfig& cfg, const std::string& prefix = "guidance.");
GuidanceConfig guidance_from_config(const KeyValueConfig& cfg, const std::string& prefix = "guidance.");

void sampler_to_config(const SamplerConfig& s, KeyValueConfig& cfg, const std::string& prefix = "sampler.");
SamplerConfig sampler_from_config(const KeyValueConfig& cfg, const std::string& prefix = "sampler.");

void train_to_config(const DenoiserArch& arch, const TrainConfig& t, KeyValueConfig& cfg,
                     const std::string& prefix = "train.");
std::pair<DenoiserArch, TrainConfig> train_from_config(const KeyValueConfig& cfg, int data_dim, int num_classes,
                                                       double sigma_max, const std::string& prefix = "train.");

std::string rule_to_string(GuidanceRule rule);
GuidanceRule rule_from_string(const std::string& s);
std::string solver_to_string(SolverKind kind);
SolverKind solver_from_string(const std::string& s);

}  // namespace guidelab
