#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "geomancer/encoder.hpp"
#include "geomancer/params.hpp"
#include "geomancer/rng.hpp"
#include "geomancer/tensor.hpp"

namespace geomancer {

struct NoiseSchedule {
    int steps = 0;
    std::vector<double> beta;       // beta[t-1] for t in 1..T
    std::vector<double> alpha;      // 1 - beta
    std::vector<double> alpha_bar;  // cumulative product

    static NoiseSchedule linear(int steps, double beta_1, double beta_t);

    double beta_at(int t) const { return beta.at(t - 1); }
    double alpha_at(int t) const { return alpha.at(t - 1); }
    // alpha_bar(0) == 1 so the terminal reverse step returns the clean estimate
    double alpha_bar_at(int t) const { return t == 0 ? 1.0 : alpha_bar.at(t - 1); }
};

struct GuidanceConfig {
    enum class Mode { CfgPP, Cfg, None };
    Mode mode = Mode::CfgPP;
    double lambda_g = 0.6;  // CFG++ strength in [0, 1]
    double w = 0.0;         // CFG weight
    double p_uncond = 0.1;  // condition dropout during training
    // alternative combination (1 - lambda) eps_c - lambda eps_u kept for
    // side-by-side inspection; not the default
    bool compat_combination = false;
};

GuidanceConfig::Mode guidance_mode_from_string(const std::string& s);
std::string to_string(GuidanceConfig::Mode mode);

enum class ConditionKind { None, ClassLabel, Scalar, LatentToken, PerNodeLatent };

struct Condition {
    ConditionKind kind = ConditionKind::None;
    int class_id = 0;
    double scalar = 0.0;
    Tensor latent;  // [1 x w] token source, or [n x w] per-node tokens

    static Condition none() { return {}; }
    static Condition cls(int id) {
        Condition c;
        c.kind = ConditionKind::ClassLabel;
        c.class_id = id;
        return c;
    }
    static Condition value(double v) {
        Condition c;
        c.kind = ConditionKind::Scalar;
        c.scalar = v;
        return c;
    }
    static Condition token(Tensor latent) {
        Condition c;
        c.kind = ConditionKind::LatentToken;
        c.latent = std::move(latent);
        return c;
    }
    static Condition per_node(Tensor latent) {
        Condition c;
        c.kind = ConditionKind::PerNodeLatent;
        c.latent = std::move(latent);
        return c;
    }
};

// Joint node/edge diffusion state: [n x W] and [n^2 x W].
struct DiffusionState {
    Tensor z_x;
    Tensor z_e;
};

struct CrossAttnParams {
    Tensor q, k, v;  // [h x h]
    LayerNormParams ln;
};

struct DenoiserLayer {
    GraphLayerParams self_attn;
    CrossAttnParams ca_x, ca_e;
};

struct DenoiserConfig {
    int width = 16;   // diffusion state width
    int hidden = 64;
    int layers = 4;
    int heads = 4;
    int num_classes = 0;        // class/pseudo-label conditions
    int cond_latent_width = 0;  // latent-token conditions
};

struct DenoiserParams {
    DenoiserConfig cfg;
    Tensor in_x, in_e;                              // [W x h]
    Tensor time_w1, time_b1, time_w2, time_b2;      // MLP over the sinusoidal t embedding
    Tensor class_emb;                               // [num_classes x h]
    Tensor scalar_w1, scalar_b1, scalar_w2, scalar_b2;  // MLP over (v, v^2, sin v)
    Tensor cond_proj;                               // [cond_latent_width x h]
    Tensor null_token;                              // [1 x h]
    std::vector<DenoiserLayer> layers;
    Tensor out_x, out_e;                            // [h x W]

    static DenoiserParams create(const DenoiserConfig& cfg, Rng& rng, DType dt, ParamStore& store,
                                 const std::string& prefix = "denoise");
};

// Eq.-11-style cross attention of rows toward condition tokens (one shared
// token or one token per row), wrapped with residual + layer norm outside.
Tensor cross_attention(const CrossAttnParams& p, const Tensor& rows, const Tensor& tokens);

// tau(y): condition embedding; the null token when the condition is absent.
Tensor embed_condition(const DenoiserParams& params, const Condition& cond);

DiffusionState denoise_forward(const DenoiserParams& params, const DiffusionState& z_t, int t,
                               const Condition& cond);

Tensor forward_sample(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& sched);

// eps_u + lambda (eps_c - eps_u)
Tensor guided_noise(const Tensor& eps_c, const Tensor& eps_u, double lambda_g);
// (1 - lambda) eps_c - lambda eps_u
Tensor guided_noise_compat(const Tensor& eps_c, const Tensor& eps_u, double lambda_g);

DiffusionState cfgpp_step(const DenoiserParams& params, const DiffusionState& z_t, int t,
                          const Condition& cond, double lambda_g, const NoiseSchedule& sched,
                          bool compat_combination = false);
DiffusionState cfg_step(const DenoiserParams& params, const DiffusionState& z_t, int t,
                        const Condition& cond, double w, const NoiseSchedule& sched);
DiffusionState uncond_step(const DenoiserParams& params, const DiffusionState& z_t, int t,
                           const NoiseSchedule& sched);

struct SampleTraceRow {
    int t = 0;
    double state_norm = 0.0;
    double noise_norm = 0.0;
};

DiffusionState sample(const DenoiserParams& params, int n_rows, const Condition& cond,
                      const GuidanceConfig& guidance, const NoiseSchedule& sched,
                      std::uint64_t seed, std::vector<SampleTraceRow>* trace = nullptr);

using DenoiseFn = std::function<DiffusionState(const DiffusionState&, int, const Condition&)>;

// Deterministic core of the noise-prediction objective at a fixed (t, eps).
Tensor noise_prediction_loss(const DenoiseFn& denoiser, const DiffusionState& z0,
                             const Condition& cond, int t, const DiffusionState& eps,
                             const NoiseSchedule& sched);

// Samples t, eps and condition dropout, then evaluates the objective.
Tensor diffusion_loss(const DenoiserParams& params, const DiffusionState& z0, const Condition& cond,
                      const NoiseSchedule& sched, Rng& rng, double p_uncond);

struct PseudoLabels {
    int k = 0;
    std::vector<std::vector<double>> centroids;
    std::vector<int> assignment;
    double inertia = 0.0;
    std::uint64_t seed = 0;
};

// k-means++ seeding plus Lloyd iterations to an assignment fixpoint (or the
// cap); empty clusters are refilled with the point farthest from its centroid.
PseudoLabels self_guidance_labels(const std::vector<std::vector<double>>& points, int k,
                                  std::uint64_t seed, int max_iters = 100);

}  // namespace geomancer
