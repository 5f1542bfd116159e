#include "geomancer/diffusion.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace geomancer {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_1, double beta_t) {
    if (steps < 1 || !(beta_1 > 0.0) || !(beta_t < 1.0) || beta_1 > beta_t) {
        throw std::invalid_argument("noise schedule: need 0 < beta_1 <= beta_T < 1, T >= 1");
    }
    NoiseSchedule s;
    s.steps = steps;
    s.beta.resize(steps);
    s.alpha.resize(steps);
    s.alpha_bar.resize(steps);
    double prod = 1.0;
    for (int t = 0; t < steps; ++t) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(t) / (steps - 1);
        s.beta[t] = beta_1 + (beta_t - beta_1) * frac;
        s.alpha[t] = 1.0 - s.beta[t];
        prod *= s.alpha[t];
        s.alpha_bar[t] = prod;
    }
    return s;
}

GuidanceConfig::Mode guidance_mode_from_string(const std::string& s) {
    if (s == "cfgpp") return GuidanceConfig::Mode::CfgPP;
    if (s == "cfg") return GuidanceConfig::Mode::Cfg;
    if (s == "none") return GuidanceConfig::Mode::None;
    throw std::invalid_argument("guidance mode must be cfgpp | cfg | none");
}

std::string to_string(GuidanceConfig::Mode mode) {
    switch (mode) {
        case GuidanceConfig::Mode::CfgPP: return "cfgpp";
        case GuidanceConfig::Mode::Cfg: return "cfg";
        case GuidanceConfig::Mode::None: return "none";
    }
    return "none";
}

DenoiserParams DenoiserParams::create(const DenoiserConfig& cfg, Rng& rng, DType dt,
                                      ParamStore& store, const std::string& prefix) {
    DenoiserParams p;
    p.cfg = cfg;
    const int h = cfg.hidden;
    p.in_x = store.add(prefix + ".in_x", xavier_param(cfg.width, h, rng, dt));
    p.in_e = store.add(prefix + ".in_e", xavier_param(cfg.width, h, rng, dt));
    p.time_w1 = store.add(prefix + ".time_w1", xavier_param(h, h, rng, dt));
    p.time_b1 = store.add(prefix + ".time_b1", zeros_param(1, h, dt));
    p.time_w2 = store.add(prefix + ".time_w2", xavier_param(h, h, rng, dt));
    p.time_b2 = store.add(prefix + ".time_b2", zeros_param(1, h, dt));
    if (cfg.num_classes > 0) {
        p.class_emb = store.add(prefix + ".class_emb", gaussian_param(cfg.num_classes, h, 0.5, rng, dt));
    }
    p.scalar_w1 = store.add(prefix + ".scalar_w1", xavier_param(3, h, rng, dt));
    p.scalar_b1 = store.add(prefix + ".scalar_b1", zeros_param(1, h, dt));
    p.scalar_w2 = store.add(prefix + ".scalar_w2", xavier_param(h, h, rng, dt));
    p.scalar_b2 = store.add(prefix + ".scalar_b2", zeros_param(1, h, dt));
    if (cfg.cond_latent_width > 0) {
        p.cond_proj = store.add(prefix + ".cond_proj", xavier_param(cfg.cond_latent_width, h, rng, dt));
    }
    p.null_token = store.add(prefix + ".null_token", gaussian_param(1, h, 0.5, rng, dt));
    for (int l = 0; l < cfg.layers; ++l) {
        DenoiserLayer layer;
        const std::string base = prefix + ".layer" + std::to_string(l);
        layer.self_attn = GraphLayerParams::create(h, cfg.heads, rng, dt, store, base + ".sa");
        auto make_ca = [&](const std::string& tag) {
            CrossAttnParams ca;
            ca.q = store.add(base + tag + ".q", xavier_param(h, h, rng, dt));
            ca.k = store.add(base + tag + ".k", xavier_param(h, h, rng, dt));
            ca.v = store.add(base + tag + ".v", xavier_param(h, h, rng, dt));
            ca.ln = {store.add(base + tag + ".ln.gain", Tensor::param(1, h, std::vector<double>(h, 1.0), dt)),
                     store.add(base + tag + ".ln.bias", zeros_param(1, h, dt))};
            return ca;
        };
        layer.ca_x = make_ca(".ca_x");
        layer.ca_e = make_ca(".ca_e");
        p.layers.push_back(std::move(layer));
    }
    p.out_x = store.add(prefix + ".out_x", xavier_param(h, cfg.width, rng, dt));
    p.out_e = store.add(prefix + ".out_e", xavier_param(h, cfg.width, rng, dt));
    return p;
}

Tensor cross_attention(const CrossAttnParams& p, const Tensor& rows, const Tensor& tokens) {
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(p.q.cols()));
    Tensor q = matmul(rows, p.q);
    Tensor k = matmul(tokens, p.k);
    Tensor v = matmul(tokens, p.v);
    if (tokens.rows() == 1) {
        Tensor scores = softmax(matmul(q, transpose(k)) * inv_sqrt_d, 1);  // [r x 1]
        return matmul(scores, v);
    }
    if (tokens.rows() != rows.rows()) {
        throw std::invalid_argument("cross_attention: tokens must be shared or row-aligned");
    }
    Tensor scores = softmax(sum_axis(mul(q, k), 1) * inv_sqrt_d, 1);  // [r x 1], single key per row
    return mul(scores, v);
}

Tensor embed_condition(const DenoiserParams& params, const Condition& cond) {
    switch (cond.kind) {
        case ConditionKind::None:
            return params.null_token;
        case ConditionKind::ClassLabel: {
            if (!params.class_emb.defined()) throw std::invalid_argument("denoiser has no class table");
            return gather_rows(params.class_emb, {cond.class_id});
        }
        case ConditionKind::Scalar: {
            const double v = cond.scalar;
            Tensor f = Tensor::from(1, 3, {v, v * v, std::sin(v)}, params.scalar_w1.dtype());
            Tensor hidden = relu(add(matmul(f, params.scalar_w1), params.scalar_b1));
            return add(matmul(hidden, params.scalar_w2), params.scalar_b2);
        }
        case ConditionKind::LatentToken:
        case ConditionKind::PerNodeLatent: {
            if (!params.cond_proj.defined()) throw std::invalid_argument("denoiser has no latent projection");
            return matmul(cond.latent, params.cond_proj);
        }
    }
    throw std::logic_error("embed_condition: bad kind");
}

namespace {

Tensor time_embedding(const DenoiserParams& params, int t) {
    const int h = params.cfg.hidden;
    std::vector<double> emb(static_cast<std::size_t>(h));
    const int half = h / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / std::max(1, half - 1));
        emb[i] = std::sin(t * freq);
        emb[half + i] = std::cos(t * freq);
    }
    for (int i = 2 * half; i < h; ++i) emb[i] = 0.0;
    Tensor sinusoid = Tensor::from(1, h, std::move(emb), params.time_w1.dtype());
    Tensor hidden = relu(add(matmul(sinusoid, params.time_w1), params.time_b1));
    return add(matmul(hidden, params.time_w2), params.time_b2);
}

// tokens for edge rows: shared token stays shared; per-node tokens average the
// endpoints of each ordered pair
Tensor edge_tokens(const Tensor& node_tokens, int n) {
    if (node_tokens.rows() == 1) return node_tokens;
    Tensor ti = gather_rows(node_tokens, pair_row_index(n));
    Tensor tj = gather_rows(node_tokens, pair_col_index(n));
    return mul(add(ti, tj), Tensor::scalar(0.5, node_tokens.dtype()));
}

}  // namespace

DiffusionState denoise_forward(const DenoiserParams& params, const DiffusionState& z_t, int t,
                               const Condition& cond) {
    const int n = z_t.z_x.rows();
    if (z_t.z_e.rows() != n * n) throw std::invalid_argument("denoise_forward: edge rows must be n^2");
    if (z_t.z_x.cols() != params.cfg.width) throw std::invalid_argument("denoise_forward: width mismatch");
    if (cond.kind == ConditionKind::PerNodeLatent && cond.latent.rows() != n) {
        throw std::invalid_argument("denoise_forward: per-node condition must have n rows");
    }

    Tensor tokens = embed_condition(params, cond);
    Tensor temb = time_embedding(params, t);
    Tensor hx = add(matmul(z_t.z_x, params.in_x), temb);
    Tensor he = add(matmul(z_t.z_e, params.in_e), temb);
    Tensor etok = edge_tokens(tokens, n);

    for (const auto& layer : params.layers) {
        auto sa = graph_layer_forward(layer.self_attn, hx, he);
        hx = sa.z_x;
        he = sa.z_e;
        hx = layer_norm(add(hx, cross_attention(layer.ca_x, hx, tokens)), layer.ca_x.ln);
        he = layer_norm(add(he, cross_attention(layer.ca_e, he, etok)), layer.ca_e.ln);
    }
    return {matmul(hx, params.out_x), matmul(he, params.out_e)};
}

Tensor forward_sample(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& sched) {
    if (t < 1 || t > sched.steps) throw std::out_of_range("forward_sample: t out of range");
    const double ab = sched.alpha_bar_at(t);
    return add(z0 * std::sqrt(ab), eps * std::sqrt(1.0 - ab));
}

Tensor guided_noise(const Tensor& eps_c, const Tensor& eps_u, double lambda_g) {
    if (lambda_g < 0.0 || lambda_g > 1.0) throw std::invalid_argument("guided_noise: lambda outside [0, 1]");
    return add(eps_u, sub(eps_c, eps_u) * lambda_g);
}

Tensor guided_noise_compat(const Tensor& eps_c, const Tensor& eps_u, double lambda_g) {
    return sub(eps_c * (1.0 - lambda_g), eps_u * lambda_g);
}

namespace {

DiffusionState reverse_step(const DiffusionState& z_t, int t, const NoiseSchedule& sched,
                            const DiffusionState& guided, const DiffusionState& renoise) {
    const double ab_t = sched.alpha_bar_at(t);
    const double ab_prev = sched.alpha_bar_at(t - 1);
    const double inv_sqrt = 1.0 / std::sqrt(ab_t);
    const double sig_t = std::sqrt(1.0 - ab_t);
    const double sig_prev = std::sqrt(1.0 - ab_prev);
    auto step_one = [&](const Tensor& z, const Tensor& g, const Tensor& r) {
        Tensor z0 = sub(z, g * sig_t) * inv_sqrt;
        return add(z0 * std::sqrt(ab_prev), r * sig_prev);
    };
    return {step_one(z_t.z_x, guided.z_x, renoise.z_x), step_one(z_t.z_e, guided.z_e, renoise.z_e)};
}

}  // namespace

DiffusionState cfgpp_step(const DenoiserParams& params, const DiffusionState& z_t, int t,
                          const Condition& cond, double lambda_g, const NoiseSchedule& sched,
                          bool compat_combination) {
    if (t < 1 || t > sched.steps) throw std::out_of_range("cfgpp_step: t out of range");
    auto eps_c = denoise_forward(params, z_t, t, cond);
    auto eps_u = denoise_forward(params, z_t, t, Condition::none());
    DiffusionState guided;
    if (compat_combination) {
        guided = {guided_noise_compat(eps_c.z_x, eps_u.z_x, lambda_g),
                  guided_noise_compat(eps_c.z_e, eps_u.z_e, lambda_g)};
    } else {
        guided = {guided_noise(eps_c.z_x, eps_u.z_x, lambda_g),
                  guided_noise(eps_c.z_e, eps_u.z_e, lambda_g)};
    }
    // renoising uses the unconditional prediction
    return reverse_step(z_t, t, sched, guided, eps_u);
}

DiffusionState cfg_step(const DenoiserParams& params, const DiffusionState& z_t, int t,
                        const Condition& cond, double w, const NoiseSchedule& sched) {
    if (t < 1 || t > sched.steps) throw std::out_of_range("cfg_step: t out of range");
    auto eps_c = denoise_forward(params, z_t, t, cond);
    auto eps_u = denoise_forward(params, z_t, t, Condition::none());
    DiffusionState guided{sub(eps_c.z_x * (1.0 + w), eps_u.z_x * w),
                          sub(eps_c.z_e * (1.0 + w), eps_u.z_e * w)};
    return reverse_step(z_t, t, sched, guided, guided);
}

DiffusionState uncond_step(const DenoiserParams& params, const DiffusionState& z_t, int t,
                           const NoiseSchedule& sched) {
    if (t < 1 || t > sched.steps) throw std::out_of_range("uncond_step: t out of range");
    auto eps_u = denoise_forward(params, z_t, t, Condition::none());
    return reverse_step(z_t, t, sched, eps_u, eps_u);
}

namespace {

Tensor gaussian_tensor(int rows, int cols, DType dt, Rng& rng) {
    std::vector<double> v(static_cast<std::size_t>(rows) * cols);
    for (auto& x : v) x = rng.gaussian();
    return Tensor::from(rows, cols, std::move(v), dt);
}

double fro_norm(const Tensor& a, const Tensor& b) {
    double acc = 0.0;
    for (double v : a.values()) acc += v * v;
    for (double v : b.values()) acc += v * v;
    return std::sqrt(acc);
}

}  // namespace

DiffusionState sample(const DenoiserParams& params, int n_rows, const Condition& cond,
                      const GuidanceConfig& guidance, const NoiseSchedule& sched,
                      std::uint64_t seed, std::vector<SampleTraceRow>* trace) {
    Rng rng(seed);
    const DType dt = params.in_x.dtype();
    DiffusionState z{gaussian_tensor(n_rows, params.cfg.width, dt, rng),
                     gaussian_tensor(n_rows * n_rows, params.cfg.width, dt, rng)};
    for (int t = sched.steps; t >= 1; --t) {
        DiffusionState next;
        switch (guidance.mode) {
            case GuidanceConfig::Mode::CfgPP:
                next = cfgpp_step(params, z, t, cond, guidance.lambda_g, sched,
                                  guidance.compat_combination);
                break;
            case GuidanceConfig::Mode::Cfg:
                next = cfg_step(params, z, t, cond, guidance.w, sched);
                break;
            case GuidanceConfig::Mode::None:
                next = uncond_step(params, z, t, sched);
                break;
        }
        if (trace) {
            trace->push_back({t, fro_norm(z.z_x, z.z_e), fro_norm(next.z_x, next.z_e)});
        }
        z = next;
    }
    return z;
}

Tensor noise_prediction_loss(const DenoiseFn& denoiser, const DiffusionState& z0,
                             const Condition& cond, int t, const DiffusionState& eps,
                             const NoiseSchedule& sched) {
    DiffusionState z_t{forward_sample(z0.z_x, t, eps.z_x, sched),
                       forward_sample(z0.z_e, t, eps.z_e, sched)};
    auto pred = denoiser(z_t, t, cond);
    Tensor dx = sub(pred.z_x, eps.z_x);
    Tensor de = sub(pred.z_e, eps.z_e);
    Tensor sq = add(sum_all(mul(dx, dx)), sum_all(mul(de, de)));
    const double count = static_cast<double>(eps.z_x.size() + eps.z_e.size());
    return sq * (1.0 / count);
}

Tensor diffusion_loss(const DenoiserParams& params, const DiffusionState& z0, const Condition& cond,
                      const NoiseSchedule& sched, Rng& rng, double p_uncond) {
    const int t = 1 + static_cast<int>(rng.uniform_int(sched.steps));
    const DType dt = z0.z_x.dtype();
    DiffusionState eps{gaussian_tensor(z0.z_x.rows(), z0.z_x.cols(), dt, rng),
                       gaussian_tensor(z0.z_e.rows(), z0.z_e.cols(), dt, rng)};
    const bool drop = rng.uniform() < p_uncond;
    const Condition& used = drop ? Condition::none() : cond;
    Condition stored = used;  // keep the temporary alive through the call
    return noise_prediction_loss(
        [&params](const DiffusionState& z, int step, const Condition& c) {
            return denoise_forward(params, z, step, c);
        },
        z0, stored, t, eps, sched);
}

PseudoLabels self_guidance_labels(const std::vector<std::vector<double>>& points, int k,
                                  std::uint64_t seed, int max_iters) {
    const int n = static_cast<int>(points.size());
    if (n < k || k < 1) throw std::invalid_argument("self_guidance_labels: need at least k points");
    const std::size_t dim = points[0].size();
    Rng rng(seed);

    auto sq_dist = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
        return acc;
    };

    // k-means++ seeding
    std::vector<std::vector<double>> centroids;
    centroids.push_back(points[rng.uniform_int(n)]);
    std::vector<double> d2(n);
    while (static_cast<int>(centroids.size()) < k) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, sq_dist(points[i], c));
            d2[i] = best;
            total += best;
        }
        int chosen = 0;
        if (total > 0.0) {
            double target = rng.uniform() * total, acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = static_cast<int>(rng.uniform_int(n));
        }
        centroids.push_back(points[chosen]);
    }

    std::vector<int> assign(n, -1);
    auto assign_all = [&]() {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(points[i], centroids[0]);
            for (int c = 1; c < k; ++c) {
                const double d = sq_dist(points[i], centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            changed = changed || best != assign[i];
            assign[i] = best;
        }
        return changed;
    };

    assign_all();
    for (int iter = 0; iter < max_iters; ++iter) {
        // centroid update
        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            ++counts[assign[i]];
            for (std::size_t d = 0; d < dim; ++d) sums[assign[i]][d] += points[i][d];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // refill with the point farthest from its own centroid
                int far = 0;
                double far_d = -1.0;
                for (int i = 0; i < n; ++i) {
                    const double d = sq_dist(points[i], centroids[assign[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                centroids[c] = points[far];
                assign[far] = c;
            } else {
                for (std::size_t d = 0; d < dim; ++d) centroids[c][d] = sums[c][d] / counts[c];
            }
        }
        if (!assign_all()) break;
    }

    PseudoLabels out;
    out.k = k;
    out.centroids = std::move(centroids);
    out.assignment = assign;
    out.seed = seed;
    out.inertia = 0.0;
    for (int i = 0; i < n; ++i) out.inertia += sq_dist(points[i], out.centroids[assign[i]]);
    return out;
}

}  // namespace geomancer
