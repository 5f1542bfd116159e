#include "geomancer/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "geomancer/checkpoint.hpp"
#include "geomancer/losses.hpp"
#include "geomancer/manifolds.hpp"
#include "json.hpp"

namespace geomancer {

namespace {

namespace fs = std::filesystem;

// seed stream tags
constexpr std::uint64_t kSeedInit = 1;
constexpr std::uint64_t kSeedAeEpoch = 2;
constexpr std::uint64_t kSeedKmeans = 5;
constexpr std::uint64_t kSeedSample = 6;
constexpr std::uint64_t kSeedDiffEpoch = 7;
constexpr std::uint64_t kSeedValEps = 8;
constexpr std::uint64_t kSeedCond = 9;

std::string fmt(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("csv: cannot format double");
    return std::string(buf, ptr);
}

std::ofstream open_out(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::vector<double> to_values(const Tensor& t) {
    return std::vector<double>(t.values().begin(), t.values().end());
}

Tensor detach(const Tensor& t, DType dt) {
    return Tensor::from(t.rows(), t.cols(), to_values(t), dt);
}

}  // namespace

// ---- optimizer ---------------------------------------------------------------

AdamW::AdamW(const ParamStore& store, double lr, double weight_decay) : lr_(lr), wd_(weight_decay) {
    m_.reserve(store.items.size());
    v_.reserve(store.items.size());
    for (const auto& [_, t] : store.items) {
        m_.emplace_back(t.size(), 0.0);
        v_.emplace_back(t.size(), 0.0);
    }
}

void AdamW::step(ParamStore& store, const std::vector<std::vector<double>>& grads) {
    if (grads.size() != store.items.size()) throw std::invalid_argument("adamw: gradient count mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t p = 0; p < store.items.size(); ++p) {
        auto vals = store.items[p].second.values_mut();
        const auto& g = grads[p];
        if (g.size() != vals.size()) throw std::invalid_argument("adamw: gradient size mismatch");
        for (std::size_t i = 0; i < vals.size(); ++i) {
            m_[p][i] = beta1_ * m_[p][i] + (1.0 - beta1_) * g[i];
            v_[p][i] = beta2_ * v_[p][i] + (1.0 - beta2_) * g[i] * g[i];
            const double mhat = m_[p][i] / bc1;
            const double vhat = v_[p][i] / bc2;
            vals[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + wd_ * vals[i]);
        }
        store.items[p].second.round_to_dtype();
    }
}

GradAccumulator::GradAccumulator(const ParamStore& store) {
    sums.reserve(store.items.size());
    for (const auto& [_, t] : store.items) sums.emplace_back(t.size(), 0.0);
}

void GradAccumulator::add(const ParamStore& store) {
    for (std::size_t p = 0; p < store.items.size(); ++p) {
        const auto g = store.items[p].second.grad_values();
        if (g.size() != sums[p].size()) continue;  // parameter did not participate
        for (std::size_t i = 0; i < g.size(); ++i) sums[p][i] += g[i];
    }
}

void GradAccumulator::scale(double s) {
    for (auto& g : sums) {
        for (auto& v : g) v *= s;
    }
}

void GradAccumulator::clip_global_norm(double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (const auto& g : sums) {
        for (double v : g) sq += v * v;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) scale(max_norm / norm);
}

void GradAccumulator::clear() {
    for (auto& g : sums) std::fill(g.begin(), g.end(), 0.0);
}

// ---- dataset -----------------------------------------------------------------

DatasetBundle resolve_dataset(const RunConfig& cfg) {
    DatasetBundle data;
    if (cfg.dataset_kind == "grammar") {
        data.graphs = gen_valence_graphs(cfg.dataset_count, data.grammar, cfg.dataset_seed);
        data.node_types = data.grammar.node_types();
        data.edge_types = data.grammar.edge_types;
    } else if (cfg.dataset_kind == "sbm") {
        data.graphs.reserve(cfg.dataset_count);
        for (int i = 0; i < cfg.dataset_count; ++i) {
            data.graphs.push_back(gen_sbm(cfg.sbm_per_block, cfg.sbm_blocks, cfg.sbm_p_in,
                                          cfg.sbm_p_out, derive_seed(cfg.dataset_seed, i)));
        }
        data.node_types = cfg.sbm_blocks;
        data.edge_types = 2;
    } else {
        throw std::invalid_argument("dataset.kind must be grammar or sbm");
    }
    data.split = make_split(static_cast<int>(data.graphs.size()), cfg.dataset_seed);
    return data;
}

// ---- models ------------------------------------------------------------------

AeModel AeModel::build(const RunConfig& cfg, const DatasetBundle& data) {
    cfg.validate();
    AeModel model;
    model.cfg = cfg;
    const DType dt = cfg.dtype();
    Rng init(derive_seed(cfg.seed, kSeedInit));

    EncoderConfig enc_cfg;
    enc_cfg.node_types = data.node_types;
    enc_cfg.edge_types = data.edge_types;
    enc_cfg.hidden = cfg.hidden;
    enc_cfg.latent_dim = cfg.d_latent;
    enc_cfg.layers = cfg.layers_enc;
    enc_cfg.heads = cfg.heads;
    enc_cfg.positional = cfg.positional;
    model.encoder = EncoderParams::create(enc_cfg, init, dt, model.params);

    std::vector<GyroComponentSpec> specs;
    for (double sign : cfg.gyro_signs) specs.push_back({sign, cfg.gyro_m});
    model.basis = ProductManifoldBasis::create(specs, cfg.d_latent, cfg.ball_dim, cfg.gyro_s,
                                               derive_seed(cfg.seed, 0xba5e), init, dt, model.params);
    model.feature_width = model.basis.total_features();
    const auto widths = model.basis.feature_widths();

    if (cfg.task == TaskKindRun::GenUncond || cfg.task == TaskKindRun::GenCond) {
        model.node_recon = TaskHead::create(TaskKind::ReconstructNodes, widths, cfg.head_hidden,
                                            data.node_types, init, dt, model.params, "head.node");
        model.edge_recon = TaskHead::create(TaskKind::ReconstructEdges, widths, cfg.head_hidden,
                                            data.edge_types, init, dt, model.params, "head.edge");
    } else if (cfg.task == TaskKindRun::NodeClass) {
        model.node_class_head = TaskHead::create(TaskKind::NodeClass, widths, cfg.head_hidden,
                                                 data.node_types, init, dt, model.params, "head.cls");
    } else {
        model.graph_head = TaskHead::create(TaskKind::GraphRegress, widths, cfg.head_hidden, 1, init,
                                            dt, model.params, "head.reg");
    }

    if (cfg.task == TaskKindRun::GraphRegress || cfg.task == TaskKindRun::GenCond) {
        double mu = 0.0, sq = 0.0;
        int count = 0;
        for (int idx : data.split.train) {
            if (!data.graphs[idx].y_graph) throw std::runtime_error("dataset lacks graph targets");
            const double y = *data.graphs[idx].y_graph;
            mu += y;
            sq += y * y;
            ++count;
        }
        mu /= std::max(1, count);
        const double var = std::max(sq / std::max(1, count) - mu * mu, 1e-12);
        model.buffers.add("target.mu", Tensor::from(1, 1, {mu}, dt));
        model.buffers.add("target.sigma", Tensor::from(1, 1, {std::sqrt(var)}, dt));
    }
    return model;
}

int diffusion_num_classes(const RunConfig& cfg, const DatasetBundle&) {
    return cfg.task == TaskKindRun::GenUncond ? cfg.kmeans_k : 0;
}

DiffModel DiffModel::build(const RunConfig& cfg, int state_width, int cond_width, int num_classes) {
    DiffModel model;
    model.cfg = cfg;
    const DType dt = cfg.dtype();
    Rng init(derive_seed(cfg.seed, kSeedInit + 100));
    DenoiserConfig dc;
    dc.width = state_width;
    dc.hidden = cfg.hidden;
    dc.layers = cfg.layers_denoise;
    dc.heads = cfg.heads;
    dc.num_classes = num_classes;
    dc.cond_latent_width = cond_width;
    model.denoiser = DenoiserParams::create(dc, init, dt, model.params);
    return model;
}

// ---- shared forward helpers ----------------------------------------------------

namespace {

struct AeLoss {
    Tensor total;
    double tgt = 0.0;
    double reg = 0.0;
};

AeLoss ae_loss(AeModel& model, const Graph& g, bool training, Rng* noise_rng, Rng* flip_rng) {
    EncodeOptions opt;
    opt.sample = training;
    opt.noise_rng = noise_rng;
    opt.flip_rng = training ? flip_rng : nullptr;
    LatentState z = encode(g, model.encoder, opt);
    Tensor vbar = model.basis.project();
    LatentState zg = geometrize_latent(z, vbar);
    const auto widths = model.basis.feature_widths();

    Tensor l_tgt;
    switch (model.cfg.task) {
        case TaskKindRun::GenUncond:
        case TaskKindRun::GenCond: {
            Tensor node_logits = head_forward(*model.node_recon, decouple(zg.z_x, widths));
            Tensor edge_logits =
                symmetrize_edge_logits(head_forward(*model.edge_recon, decouple(zg.z_e, widths)), g.n);
            l_tgt = reconstruction_loss(node_logits, edge_logits, g);
            break;
        }
        case TaskKindRun::NodeClass: {
            if (!g.y_nodes) throw std::runtime_error("node_class: graph lacks node labels");
            Tensor logits = head_forward(*model.node_class_head, decouple(zg.z_x, widths));
            l_tgt = cross_entropy_rows(logits, *g.y_nodes);
            break;
        }
        case TaskKindRun::GraphRegress: {
            if (!g.y_graph) throw std::runtime_error("graph_regress: graph lacks a target");
            const double mu = model.buffers.find("target.mu")->item();
            const double sigma = model.buffers.find("target.sigma")->item();
            Tensor pred = head_forward(*model.graph_head, decouple(zg.z_g, widths));
            Tensor truth = Tensor::scalar((*g.y_graph - mu) / sigma, pred.dtype());
            l_tgt = mse(pred, truth);
            break;
        }
    }
    Tensor kl = kl_reg(concat({z.mu_x, z.mu_e}, 0), concat({z.logvar_x, z.logvar_e}, 0));
    AeLoss out;
    out.tgt = l_tgt.item();
    out.reg = kl.item();
    out.total = add(l_tgt, kl * model.cfg.kl_beta);
    return out;
}

struct ParamSnapshot {
    std::vector<std::vector<double>> values;

    explicit ParamSnapshot(const ParamStore& store) {
        for (const auto& [_, t] : store.items) values.push_back(to_values(t));
    }
    void restore(ParamStore& store) const {
        for (std::size_t p = 0; p < store.items.size(); ++p) {
            auto vals = store.items[p].second.values_mut();
            std::copy(values[p].begin(), values[p].end(), vals.begin());
            store.items[p].second.round_to_dtype();
        }
    }
};

double ae_val_metric(AeModel& model, const DatasetBundle& data) {
    double acc = 0.0;
    int count = 0;
    for (int idx : data.split.val) {
        const Graph& g = data.graphs[idx];
        AeLoss l = ae_loss(model, g, false, nullptr, nullptr);
        acc += l.tgt;
        ++count;
    }
    return count == 0 ? 0.0 : acc / count;
}

void save_model(const std::string& path, const ParamStore& params, const ParamStore& buffers) {
    ParamStore all;
    for (const auto& [name, t] : params.items) all.items.emplace_back(name, t);
    for (const auto& [name, t] : buffers.items) all.items.emplace_back("buf." + name, t);
    save_checkpoint(path, all);
}

void load_model(const std::string& path, ParamStore& params, ParamStore& buffers) {
    auto entries = load_checkpoint(path);
    apply_checkpoint(params, entries);
    if (!buffers.items.empty()) {
        ParamStore prefixed;
        for (auto& [name, t] : buffers.items) prefixed.items.emplace_back("buf." + name, t);
        apply_checkpoint(prefixed, entries);
    }
}

}  // namespace

// ---- train AE ------------------------------------------------------------------

TrainAeResult train_ae(const RunConfig& cfg) {
    cfg.validate();
    auto data = resolve_dataset(cfg);
    AeModel model = AeModel::build(cfg, data);

    const fs::path out_dir(cfg.out_dir);
    auto train_log = open_out(out_dir / "train_log.csv");
    train_log << "epoch,step,total,l_tgt,l_reg\n";
    auto val_log = open_out(out_dir / "val_log.csv");
    val_log << "epoch,val_metric\n";

    AdamW opt(model.params, cfg.ae_lr, cfg.ae_weight_decay);
    GradAccumulator acc(model.params);

    TrainAeResult result;
    result.first_val_metric = ae_val_metric(model, data);
    double best_val = result.first_val_metric;
    ParamSnapshot best(model.params);

    int step = 0;
    for (int epoch = 0; epoch < cfg.ae_epochs; ++epoch) {
        Rng order_rng(derive_seed(cfg.seed, kSeedAeEpoch * 1000003 + epoch));
        Rng noise_rng(derive_seed(cfg.seed, kSeedAeEpoch * 2000003 + epoch));
        Rng flip_rng(derive_seed(cfg.seed, kSeedAeEpoch * 3000017 + epoch));
        auto order = data.split.train;
        order_rng.shuffle(order);

        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch);
            acc.clear();
            double bt = 0.0, btg = 0.0, brg = 0.0;
            for (std::size_t b = start; b < end; ++b) {
                const Graph& g = data.graphs[order[b]];
                try {
                    zero_grads(model.params);
                    GradTape tape;
                    AeLoss l = ae_loss(model, g, true, &noise_rng, &flip_rng);
                    tape.backward(l.total);
                    acc.add(model.params);
                    bt += l.total.item();
                    btg += l.tgt;
                    brg += l.reg;
                } catch (const std::domain_error& e) {
                    throw std::runtime_error("train_ae: non-finite loss at epoch " +
                                             std::to_string(epoch) + " step " + std::to_string(step) +
                                             ": " + e.what());
                }
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            acc.scale(inv);
            acc.clip_global_norm(cfg.grad_clip);
            opt.step(model.params, acc.sums);
            model.basis.clamp_points();
            train_log << epoch << ',' << step << ',' << fmt(bt * inv) << ',' << fmt(btg * inv) << ','
                      << fmt(brg * inv) << '\n';
            ++step;
        }

        const double val = ae_val_metric(model, data);
        val_log << epoch << ',' << fmt(val) << '\n';
        if (val <= best_val || cfg.ae_epochs == 0) {
            best_val = val;
            best = ParamSnapshot(model.params);
        }
    }

    best.restore(model.params);
    result.best_val_metric = best_val;
    result.checkpoint_path = (out_dir / "ae.ckpt").string();
    save_model(result.checkpoint_path, model.params, model.buffers);
    write_manifest(cfg);
    return result;
}

// ---- latent cache ----------------------------------------------------------------

namespace {

struct LatentCache {
    std::vector<Tensor> z_x, z_e, z_g;  // geometrized, detached
};

LatentCache compute_latents(AeModel& model, const DatasetBundle& data) {
    LatentCache cache;
    const DType dt = model.cfg.dtype();
    Tensor vbar = model.basis.project();
    Tensor vbar_d = detach(vbar, dt);
    cache.z_x.reserve(data.graphs.size());
    for (const auto& g : data.graphs) {
        LatentState z = encode(g, model.encoder, {});
        cache.z_x.push_back(detach(geometrize(z.z_x, vbar_d), dt));
        cache.z_e.push_back(detach(geometrize(z.z_e, vbar_d), dt));
        cache.z_g.push_back(detach(geometrize(z.z_g, vbar_d), dt));
    }
    return cache;
}

struct DiffTask {
    int state_width = 0;
    int cond_width = 0;
    int num_classes = 0;
    std::vector<DiffusionState> states;      // per graph
    std::vector<Condition> conditions;       // per graph
};

// label codes: scaled identity, fixed so nearest-code decoding stays well posed
Tensor class_codes(int k, DType dt) {
    std::vector<double> vals(static_cast<std::size_t>(k) * k, 0.0);
    for (int i = 0; i < k; ++i) vals[static_cast<std::size_t>(i) * k + i] = 2.0;
    return Tensor::from(k, k, std::move(vals), dt);
}

// Per-dimension moments of the training latent rows; diffusion runs on
// standardized latents so the N(0, I) endpoint matches the data scale.
struct LatentMoments {
    std::vector<double> mu, sigma;
};

LatentMoments latent_moments(const std::vector<Tensor>& latents, const std::vector<int>& train_idx) {
    const int w = latents.empty() ? 0 : latents[0].cols();
    LatentMoments m;
    m.mu.assign(w, 0.0);
    m.sigma.assign(w, 0.0);
    std::size_t rows = 0;
    for (int idx : train_idx) {
        const Tensor& t = latents[idx];
        for (int r = 0; r < t.rows(); ++r) {
            for (int c = 0; c < w; ++c) m.mu[c] += t(r, c);
        }
        rows += t.rows();
    }
    for (auto& v : m.mu) v /= std::max<std::size_t>(1, rows);
    for (int idx : train_idx) {
        const Tensor& t = latents[idx];
        for (int r = 0; r < t.rows(); ++r) {
            for (int c = 0; c < w; ++c) {
                const double d = t(r, c) - m.mu[c];
                m.sigma[c] += d * d;
            }
        }
    }
    for (auto& v : m.sigma) v = std::max(std::sqrt(v / std::max<std::size_t>(1, rows)), 1e-6);
    return m;
}

Tensor standardize_rows(const Tensor& t, const LatentMoments& m, DType dt) {
    std::vector<double> out(t.size());
    for (int r = 0; r < t.rows(); ++r) {
        for (int c = 0; c < t.cols(); ++c) {
            out[static_cast<std::size_t>(r) * t.cols() + c] = (t(r, c) - m.mu[c]) / m.sigma[c];
        }
    }
    return Tensor::from(t.rows(), t.cols(), std::move(out), dt);
}

DiffTask build_diff_task(const RunConfig& cfg, const DatasetBundle& data, AeModel& ae,
                         const LatentCache& cache, ParamStore& buffers) {
    DiffTask task;
    const DType dt = cfg.dtype();
    const int w = ae.feature_width;
    switch (cfg.task) {
        case TaskKindRun::GenUncond: {
            task.state_width = w;
            task.cond_width = 0;
            task.num_classes = cfg.kmeans_k;
            std::vector<std::vector<double>> zg;
            zg.reserve(data.split.train.size());
            for (int idx : data.split.train) zg.push_back(to_values(cache.z_g[idx]));
            auto labels = self_guidance_labels(zg, cfg.kmeans_k, derive_seed(cfg.seed, kSeedKmeans));
            std::vector<double> cents;
            for (const auto& c : labels.centroids) cents.insert(cents.end(), c.begin(), c.end());
            buffers.add("selfguide.centroids", Tensor::from(cfg.kmeans_k, w, std::move(cents), dt));
            const LatentMoments mx = latent_moments(cache.z_x, data.split.train);
            const LatentMoments me = latent_moments(cache.z_e, data.split.train);
            buffers.add("latent.mu_x", Tensor::from(1, w, mx.mu, dt));
            buffers.add("latent.sigma_x", Tensor::from(1, w, mx.sigma, dt));
            buffers.add("latent.mu_e", Tensor::from(1, w, me.mu, dt));
            buffers.add("latent.sigma_e", Tensor::from(1, w, me.sigma, dt));
            std::vector<int> per_graph(data.graphs.size(), 0);
            for (std::size_t i = 0; i < data.split.train.size(); ++i) {
                per_graph[data.split.train[i]] = labels.assignment[i];
            }
            // held-out graphs get their nearest centroid
            auto nearest = [&](const std::vector<double>& p) {
                int best = 0;
                double bd = 1e300;
                for (int c = 0; c < cfg.kmeans_k; ++c) {
                    double d = 0.0;
                    for (int j = 0; j < w; ++j) {
                        const double diff = p[j] - labels.centroids[c][j];
                        d += diff * diff;
                    }
                    if (d < bd) {
                        bd = d;
                        best = c;
                    }
                }
                return best;
            };
            for (int idx : data.split.val) per_graph[idx] = nearest(to_values(cache.z_g[idx]));
            for (int idx : data.split.test) per_graph[idx] = nearest(to_values(cache.z_g[idx]));
            for (std::size_t i = 0; i < data.graphs.size(); ++i) {
                task.states.push_back({standardize_rows(cache.z_x[i], mx, dt),
                                       standardize_rows(cache.z_e[i], me, dt)});
                task.conditions.push_back(Condition::cls(per_graph[i]));
            }
            break;
        }
        case TaskKindRun::GenCond: {
            task.state_width = w;
            task.cond_width = 0;
            task.num_classes = 0;
            const LatentMoments mx = latent_moments(cache.z_x, data.split.train);
            const LatentMoments me = latent_moments(cache.z_e, data.split.train);
            buffers.add("latent.mu_x", Tensor::from(1, w, mx.mu, dt));
            buffers.add("latent.sigma_x", Tensor::from(1, w, mx.sigma, dt));
            buffers.add("latent.mu_e", Tensor::from(1, w, me.mu, dt));
            buffers.add("latent.sigma_e", Tensor::from(1, w, me.sigma, dt));
            for (std::size_t i = 0; i < data.graphs.size(); ++i) {
                task.states.push_back({standardize_rows(cache.z_x[i], mx, dt),
                                       standardize_rows(cache.z_e[i], me, dt)});
                const double mu = ae.buffers.find("target.mu")->item();
                const double sigma = ae.buffers.find("target.sigma")->item();
                task.conditions.push_back(Condition::value((*data.graphs[i].y_graph - mu) / sigma));
            }
            break;
        }
        case TaskKindRun::NodeClass: {
            const int k = data.node_types;
            task.state_width = k;
            task.cond_width = w;
            task.num_classes = 0;
            Tensor codes = class_codes(k, dt);
            buffers.add("codes.class", codes);
            for (std::size_t i = 0; i < data.graphs.size(); ++i) {
                const Graph& g = data.graphs[i];
                if (!g.y_nodes) throw std::runtime_error("node_class: graph lacks labels");
                std::vector<double> zx(static_cast<std::size_t>(g.n) * k, 0.0);
                for (int r = 0; r < g.n; ++r) zx[static_cast<std::size_t>(r) * k + (*g.y_nodes)[r]] = 2.0;
                task.states.push_back(
                    {Tensor::from(g.n, k, std::move(zx), dt),
                     Tensor::zeros(g.n * g.n, k, dt)});
                task.conditions.push_back(Condition::per_node(cache.z_x[i]));
            }
            break;
        }
        case TaskKindRun::GraphRegress: {
            task.state_width = 1;
            task.cond_width = w;
            task.num_classes = 0;
            const double mu = ae.buffers.find("target.mu")->item();
            const double sigma = ae.buffers.find("target.sigma")->item();
            buffers.add("target.mu", Tensor::from(1, 1, {mu}, dt));
            buffers.add("target.sigma", Tensor::from(1, 1, {sigma}, dt));
            for (std::size_t i = 0; i < data.graphs.size(); ++i) {
                const double y = (*data.graphs[i].y_graph - mu) / sigma;
                task.states.push_back({Tensor::from(1, 1, {y}, dt), Tensor::zeros(1, 1, dt)});
                task.conditions.push_back(Condition::token(cache.z_g[i]));
            }
            break;
        }
    }
    return task;
}

double diff_val_loss(const DiffModel& model, const DiffTask& task, const DatasetBundle& data,
                     const NoiseSchedule& sched, std::uint64_t seed) {
    const int t_probe[3] = {std::max(1, sched.steps / 4), std::max(1, sched.steps / 2),
                            std::max(1, 3 * sched.steps / 4)};
    double acc = 0.0;
    int count = 0;
    for (int idx : data.split.val) {
        for (int ti = 0; ti < 3; ++ti) {
            Rng rng(derive_seed(seed, kSeedValEps + 8 * idx + ti));
            const auto& z0 = task.states[idx];
            std::vector<double> ex(z0.z_x.size()), ee(z0.z_e.size());
            for (auto& v : ex) v = rng.gaussian();
            for (auto& v : ee) v = rng.gaussian();
            DiffusionState eps{Tensor::from(z0.z_x.rows(), z0.z_x.cols(), std::move(ex), z0.z_x.dtype()),
                               Tensor::from(z0.z_e.rows(), z0.z_e.cols(), std::move(ee), z0.z_e.dtype())};
            Tensor loss = noise_prediction_loss(
                [&](const DiffusionState& z, int t, const Condition& c) {
                    return denoise_forward(model.denoiser, z, t, c);
                },
                z0, task.conditions[idx], t_probe[ti], eps, sched);
            acc += loss.item();
            ++count;
        }
    }
    return count == 0 ? 0.0 : acc / count;
}

}  // namespace

TrainDiffResult train_diffusion(const RunConfig& cfg) {
    cfg.validate();
    auto data = resolve_dataset(cfg);
    AeModel ae = AeModel::build(cfg, data);
    const fs::path out_dir(cfg.out_dir);
    load_model((out_dir / "ae.ckpt").string(), ae.params, ae.buffers);

    LatentCache cache = compute_latents(ae, data);
    ParamStore buffers;
    DiffTask task = build_diff_task(cfg, data, ae, cache, buffers);
    DiffModel model = DiffModel::build(cfg, task.state_width, task.cond_width, task.num_classes);
    model.buffers = std::move(buffers);
    auto sched = NoiseSchedule::linear(cfg.schedule_steps, cfg.beta_1, cfg.beta_t);

    auto diff_log = open_out(out_dir / "diff_log.csv");
    diff_log << "epoch,step,loss\n";

    AdamW opt(model.params, cfg.diff_lr, cfg.diff_weight_decay);
    GradAccumulator acc(model.params);

    TrainDiffResult result;
    result.init_val_loss = diff_val_loss(model, task, data, sched, cfg.seed);
    double best_val = result.init_val_loss;
    ParamSnapshot best(model.params);

    int step = 0;
    for (int epoch = 0; epoch < cfg.diff_epochs; ++epoch) {
        Rng order_rng(derive_seed(cfg.seed, kSeedDiffEpoch * 1000003 + epoch));
        auto order = data.split.train;
        order_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch);
            acc.clear();
            double batch_loss = 0.0;
            for (std::size_t b = start; b < end; ++b) {
                const int idx = order[b];
                Rng rng(derive_seed(derive_seed(cfg.seed, kSeedDiffEpoch + epoch), idx));
                try {
                    zero_grads(model.params);
                    GradTape tape;
                    Tensor loss = diffusion_loss(model.denoiser, task.states[idx],
                                                 task.conditions[idx], sched, rng, cfg.p_uncond);
                    tape.backward(loss);
                    acc.add(model.params);
                    batch_loss += loss.item();
                } catch (const std::domain_error& e) {
                    throw std::runtime_error("train_diffusion: non-finite loss at epoch " +
                                             std::to_string(epoch) + " step " + std::to_string(step) +
                                             ": " + e.what());
                }
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            acc.scale(inv);
            acc.clip_global_norm(cfg.grad_clip);
            opt.step(model.params, acc.sums);
            diff_log << epoch << ',' << step << ',' << fmt(batch_loss * inv) << '\n';
            ++step;
        }
        const double val = diff_val_loss(model, task, data, sched, cfg.seed);
        if (val <= best_val) {
            best_val = val;
            best = ParamSnapshot(model.params);
        }
    }

    best.restore(model.params);
    result.best_val_loss = best_val;
    result.checkpoint_path = (out_dir / "diff.ckpt").string();
    save_model(result.checkpoint_path, model.params, model.buffers);
    write_manifest(cfg);
    return result;
}

// ---- generation ------------------------------------------------------------------

namespace {

Graph decode_latent(const AeModel& model, const DiffModel& diff, const DiffusionState& z0, int n) {
    const auto widths = model.basis.feature_widths();
    // back to the latent scale the decoder was trained on
    Tensor zx = add(mul(z0.z_x, *diff.buffers.find("latent.sigma_x")), *diff.buffers.find("latent.mu_x"));
    Tensor ze = add(mul(z0.z_e, *diff.buffers.find("latent.sigma_e")), *diff.buffers.find("latent.mu_e"));
    Tensor node_logits = head_forward(*model.node_recon, decouple(zx, widths));
    Tensor edge_logits =
        symmetrize_edge_logits(head_forward(*model.edge_recon, decouple(ze, widths)), n);
    Graph g(n);
    for (int i = 0; i < n; ++i) {
        int best = 0;
        for (int c = 1; c < node_logits.cols(); ++c) {
            if (node_logits(i, c) > node_logits(i, best)) best = c;
        }
        g.node_type[i] = best;
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            int best = 0;
            for (int c = 1; c < edge_logits.cols(); ++c) {
                if (edge_logits(i * n + j, c) > edge_logits(i * n + j, best)) best = c;
            }
            if (best > 0) g.set_edge(i, j, best);
        }
    }
    return g;
}

struct LoadedPipeline {
    DatasetBundle data;
    AeModel ae;
    DiffModel diff;
    LatentCache cache;

    explicit LoadedPipeline(const RunConfig& cfg)
        : data(resolve_dataset(cfg)), ae(AeModel::build(cfg, data)), diff(DiffModel::build(cfg, 1, 0, 0)) {
        const fs::path out_dir(cfg.out_dir);
        load_model((out_dir / "ae.ckpt").string(), ae.params, ae.buffers);
        cache = compute_latents(ae, data);
        ParamStore buffers;
        DiffTask task_shape = build_diff_task(cfg, data, ae, cache, buffers);
        diff = DiffModel::build(cfg, task_shape.state_width, task_shape.cond_width,
                                task_shape.num_classes);
        diff.buffers = std::move(buffers);
        load_model((out_dir / "diff.ckpt").string(), diff.params, diff.buffers);
    }
};

}  // namespace

GenReport generate(const RunConfig& cfg, int count, bool write_trace) {
    cfg.validate();
    if (cfg.task != TaskKindRun::GenUncond && cfg.task != TaskKindRun::GenCond) {
        throw std::invalid_argument("generate: task must be gen_uncond or gen_cond");
    }
    LoadedPipeline pipe(cfg);
    const fs::path out_dir(cfg.out_dir);
    auto sched = NoiseSchedule::linear(cfg.schedule_steps, cfg.beta_1, cfg.beta_t);
    const GuidanceConfig guidance = cfg.guidance();

    // node-count histogram of the training split
    std::vector<int> sizes;
    for (int idx : pipe.data.split.train) sizes.push_back(pipe.data.graphs[idx].n);
    std::vector<double> train_targets;
    if (cfg.task == TaskKindRun::GenCond) {
        for (int idx : pipe.data.split.train) train_targets.push_back(*pipe.data.graphs[idx].y_graph);
    }

    std::vector<Graph> generated(static_cast<std::size_t>(count));
    std::vector<SampleTraceRow> trace;

    auto worker = [&](int begin, int end, bool tracing) {
        for (int s = begin; s < end; ++s) {
            Rng srng(derive_seed(cfg.seed, kSeedCond * 1000003 + s));
            const int n = sizes[srng.uniform_int(sizes.size())];
            Condition cond = Condition::none();
            if (cfg.task == TaskKindRun::GenUncond && guidance.mode != GuidanceConfig::Mode::None) {
                cond = Condition::cls(static_cast<int>(srng.uniform_int(cfg.kmeans_k)));
            } else if (cfg.task == TaskKindRun::GenCond) {
                const double mu = pipe.ae.buffers.find("target.mu")->item();
                const double sigma = pipe.ae.buffers.find("target.sigma")->item();
                const double y = train_targets[srng.uniform_int(train_targets.size())];
                cond = Condition::value((y - mu) / sigma);
            }
            std::vector<SampleTraceRow> local_trace;
            DiffusionState z0 = sample(pipe.diff.denoiser, n, cond, guidance, sched,
                                       derive_seed(cfg.seed, kSeedSample * 1000003 + s),
                                       tracing && s == 0 ? &local_trace : nullptr);
            generated[s] = decode_latent(pipe.ae, pipe.diff, z0, n);
            if (tracing && s == 0) trace = std::move(local_trace);
        }
    };

    const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const int workers = std::min(hw, std::max(1, count));
    if (workers <= 1 || count < 4) {
        worker(0, count, write_trace);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (count + workers - 1) / workers;
        for (int wkr = 0; wkr < workers; ++wkr) {
            const int begin = wkr * chunk;
            const int end = std::min(count, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(worker, begin, end, write_trace);
        }
        for (auto& th : pool) th.join();
    }

    save_jsonl(generated, (out_dir / "generated.jsonl").string());
    if (write_trace) {
        auto tr = open_out(out_dir / "sampler_trace.csv");
        tr << "t,state_norm,noise_norm\n";
        for (const auto& row : trace) {
            tr << row.t << ',' << fmt(row.state_norm) << ',' << fmt(row.noise_norm) << '\n';
        }
    }

    std::vector<Graph> train_set;
    for (int idx : pipe.data.split.train) train_set.push_back(pipe.data.graphs[idx]);
    GenReport report;
    if (count > 0) {
        report = evaluate_generation(generated, train_set, pipe.data.grammar);
    }
    auto rep = open_out(out_dir / "gen_report.csv");
    rep << "validity,uniqueness,novelty,mmd_degree,mmd_clustering\n";
    rep << fmt(report.validity) << ',' << fmt(report.uniqueness) << ',' << fmt(report.novelty) << ','
        << fmt(report.mmd_degree) << ',' << fmt(report.mmd_clustering) << '\n';
    write_manifest(cfg);
    return report;
}

// ---- prediction ------------------------------------------------------------------

PredictResult predict(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.task != TaskKindRun::NodeClass && cfg.task != TaskKindRun::GraphRegress) {
        throw std::invalid_argument("predict: task must be node_class or graph_regress");
    }
    LoadedPipeline pipe(cfg);
    const fs::path out_dir(cfg.out_dir);
    auto sched = NoiseSchedule::linear(cfg.schedule_steps, cfg.beta_1, cfg.beta_t);
    const GuidanceConfig guidance = cfg.guidance();
    const LatentCache& cache = pipe.cache;

    const auto& test = pipe.data.split.test;
    std::vector<double> pred_vals(test.size());
    std::vector<std::vector<int>> pred_nodes(test.size());

    auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s) {
            const int idx = test[s];
            const Graph& g = pipe.data.graphs[idx];
            if (cfg.task == TaskKindRun::NodeClass) {
                Condition cond = Condition::per_node(cache.z_x[idx]);
                DiffusionState z = sample(pipe.diff.denoiser, g.n, cond, guidance, sched,
                                          derive_seed(cfg.seed, kSeedSample * 7 + idx));
                const Tensor* codes = pipe.diff.buffers.find("codes.class");
                std::vector<int> labels(g.n);
                for (int r = 0; r < g.n; ++r) {
                    int best = 0;
                    double bd = 1e300;
                    for (int c = 0; c < codes->rows(); ++c) {
                        double d = 0.0;
                        for (int j = 0; j < codes->cols(); ++j) {
                            const double diff = z.z_x(r, j) - (*codes)(c, j);
                            d += diff * diff;
                        }
                        if (d < bd) {
                            bd = d;
                            best = c;
                        }
                    }
                    labels[r] = best;
                }
                pred_nodes[s] = std::move(labels);
            } else {
                Condition cond = Condition::token(cache.z_g[idx]);
                DiffusionState z = sample(pipe.diff.denoiser, 1, cond, guidance, sched,
                                          derive_seed(cfg.seed, kSeedSample * 7 + idx));
                const double mu = pipe.diff.buffers.find("target.mu")->item();
                const double sigma = pipe.diff.buffers.find("target.sigma")->item();
                pred_vals[s] = z.z_x(0, 0) * sigma + mu;
            }
        }
    };

    const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const std::size_t workers = std::min<std::size_t>(hw, std::max<std::size_t>(1, test.size()));
    if (workers <= 1 || test.size() < 4) {
        worker(0, test.size());
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (test.size() + workers - 1) / workers;
        for (std::size_t wkr = 0; wkr < workers; ++wkr) {
            const std::size_t begin = wkr * chunk;
            const std::size_t end = std::min(test.size(), begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(worker, begin, end);
        }
        for (auto& th : pool) th.join();
    }

    PredictResult result;
    auto csv = open_out(out_dir / "predictions.csv");
    if (cfg.task == TaskKindRun::NodeClass) {
        csv << "graph_index,node_index,truth,prediction\n";
        std::vector<int> all_pred, all_truth;
        for (std::size_t s = 0; s < test.size(); ++s) {
            const Graph& g = pipe.data.graphs[test[s]];
            for (int r = 0; r < g.n; ++r) {
                csv << test[s] << ',' << r << ',' << (*g.y_nodes)[r] << ',' << pred_nodes[s][r] << '\n';
                all_pred.push_back(pred_nodes[s][r]);
                all_truth.push_back((*g.y_nodes)[r]);
            }
        }
        result.metric = accuracy(all_pred, all_truth);
    } else {
        csv << "graph_index,truth,prediction\n";
        std::vector<double> all_pred, all_truth;
        for (std::size_t s = 0; s < test.size(); ++s) {
            const Graph& g = pipe.data.graphs[test[s]];
            csv << test[s] << ',' << fmt(*g.y_graph) << ',' << fmt(pred_vals[s]) << '\n';
            all_pred.push_back(pred_vals[s]);
            all_truth.push_back(*g.y_graph);
        }
        result.metric = mae(all_pred, all_truth);
    }
    result.csv_path = (out_dir / "predictions.csv").string();
    write_manifest(cfg);
    return result;
}

GenReport evaluate_files(const RunConfig& cfg, const std::string& generated_path,
                         const std::string& train_path) {
    auto generated = load_jsonl(generated_path);
    auto train = load_jsonl(train_path);
    GrammarSpec spec;
    GenReport report = evaluate_generation(generated, train, spec);
    auto rep = open_out(fs::path(cfg.out_dir) / "gen_report.csv");
    rep << "validity,uniqueness,novelty,mmd_degree,mmd_clustering\n";
    rep << fmt(report.validity) << ',' << fmt(report.uniqueness) << ',' << fmt(report.novelty) << ','
        << fmt(report.mmd_degree) << ',' << fmt(report.mmd_clustering) << '\n';
    return report;
}

// ---- stability benchmark -----------------------------------------------------------

StabilityReport bench_stability(const RunConfig& cfg) {
    StabilityReport report;
    const fs::path out_dir(cfg.out_dir);
    auto csv = open_out(out_dir / "stability_report.csv");
    csv << "tangent_norm,f32_nonfinite,f32_failed,f64_nonfinite,f64_failed,gyro_nonfinite\n";

    auto bank = GyroFeatureBank::sample(-1.0, cfg.ball_dim, 64, cfg.gyro_s,
                                        derive_seed(cfg.seed, 0xbe7c));
    Rng dir_rng(derive_seed(cfg.seed, 0xd1c7));
    const int trials = 40;
    for (int norm = 1; norm <= 50; ++norm) {
        auto st32 = manifolds::exp_log_roundtrip_stats<float>(-1.0, cfg.ball_dim, norm, norm, trials,
                                                              derive_seed(cfg.seed, 320000 + norm));
        auto st64 = manifolds::exp_log_roundtrip_stats<double>(-1.0, cfg.ball_dim, norm, norm, trials,
                                                               derive_seed(cfg.seed, 640000 + norm));
        // matching boundary-approach sweep for the kernel features:
        // row "norm" probes ||x||^2 = (1 - 10^(-6 norm / 50)) / |kappa|
        int gyro_nonfinite = 0;
        for (int t = 0; t < trials; ++t) {
            const double frac = 1.0 - std::pow(10.0, -6.0 * norm / 50.0);
            auto dir = dir_rng.unit_sphere(cfg.ball_dim);
            std::vector<double> x(dir.size());
            for (std::size_t j = 0; j < dir.size(); ++j) x[j] = dir[j] * std::sqrt(frac);
            try {
                for (double v : fourier_map(bank, x)) {
                    if (!std::isfinite(v)) ++gyro_nonfinite;
                }
            } catch (const std::exception&) {
                ++gyro_nonfinite;
            }
        }
        csv << norm << ',' << st32.nonfinite << ',' << st32.failed << ',' << st64.nonfinite << ','
            << st64.failed << ',' << gyro_nonfinite << '\n';
        ++report.rows;
        report.gyro_nonfinite += gyro_nonfinite;
        report.f32_failures_total += st32.nonfinite + st32.failed;
        if (norm >= 30) report.f32_failures_norm_ge_30 += st32.nonfinite + st32.failed;
        report.f64_failures_total += st64.nonfinite + st64.failed;
    }
    return report;
}

// ---- embedding export ---------------------------------------------------------------

void export_embeddings(const RunConfig& cfg) {
    cfg.validate();
    auto data = resolve_dataset(cfg);
    AeModel ae = AeModel::build(cfg, data);
    const fs::path out_dir(cfg.out_dir);
    load_model((out_dir / "ae.ckpt").string(), ae.params, ae.buffers);
    LatentCache cache = compute_latents(ae, data);

    // pseudo-labels when a self-guided diffusion checkpoint is present
    std::vector<int> pseudo(data.graphs.size(), -1);
    const fs::path diff_path = out_dir / "diff.ckpt";
    if (cfg.task == TaskKindRun::GenUncond && fs::exists(diff_path)) {
        auto entries = load_checkpoint(diff_path.string());
        for (const auto& e : entries) {
            if (e.name == "buf.selfguide.centroids") {
                const int k = static_cast<int>(e.dims[0]);
                const int w = static_cast<int>(e.dims[1]);
                for (std::size_t i = 0; i < data.graphs.size(); ++i) {
                    const auto zg = to_values(cache.z_g[i]);
                    int best = 0;
                    double bd = 1e300;
                    for (int c = 0; c < k; ++c) {
                        double d = 0.0;
                        for (int j = 0; j < w; ++j) {
                            const double diff = zg[j] - e.values[static_cast<std::size_t>(c) * w + j];
                            d += diff * diff;
                        }
                        if (d < bd) {
                            bd = d;
                            best = c;
                        }
                    }
                    pseudo[i] = best;
                }
            }
        }
    }

    auto csv = open_out(out_dir / "embeddings.csv");
    csv << "index,pseudo_label";
    for (int j = 0; j < ae.feature_width; ++j) csv << ",z" << j;
    csv << '\n';
    for (std::size_t i = 0; i < data.graphs.size(); ++i) {
        csv << i << ',' << pseudo[i];
        for (double v : cache.z_g[i].values()) csv << ',' << fmt(v);
        csv << '\n';
    }

    auto weights = open_out(out_dir / "manifold_weights.csv");
    weights << "task,component,curvature_sign,weight\n";
    auto dump_head = [&](const char* task_name, const TaskHead& head) {
        const auto w = head.block_weights();
        for (std::size_t b = 0; b < w.size(); ++b) {
            weights << task_name << ',' << b << ',' << fmt(cfg.gyro_signs[b]) << ',' << fmt(w[b]) << '\n';
        }
    };
    if (ae.node_recon) dump_head("reconstruct_nodes", *ae.node_recon);
    if (ae.edge_recon) dump_head("reconstruct_edges", *ae.edge_recon);
    if (ae.node_class_head) dump_head("node_class", *ae.node_class_head);
    if (ae.graph_head) dump_head("graph_regress", *ae.graph_head);
}

// ---- gradcheck battery ---------------------------------------------------------------

namespace {

double report_path(bool verbose, const char* name, double err) {
    if (verbose) std::printf("  %-42s max rel err %.3e\n", name, err);
    return err;
}

}  // namespace

double gradcheck_battery(bool verbose) {
    double worst = 0.0;
    Rng rng(20240601);

    {  // encoder stack (two Eq.-4 layers on a small graph)
        ParamStore store;
        EncoderConfig cfg;
        cfg.node_types = 4;
        cfg.edge_types = 3;
        cfg.hidden = 4;
        cfg.latent_dim = 3;
        cfg.layers = 2;
        cfg.heads = 2;
        auto enc = EncoderParams::create(cfg, rng, DType::F64, store);
        Graph g(3);
        g.node_type = {0, 1, 2};
        g.set_edge(0, 1, 1);
        g.set_edge(1, 2, 2);
        auto loss = [&](const Tensor&) {
            auto z = encode(g, enc, {});
            return add(sum_all(mul(z.z_x, z.z_x)), add(sum_all(mul(z.z_e, z.z_e)), sum_all(mul(z.z_g, z.z_g))));
        };
        for (auto& [name, t] : store.items) {
            worst = std::max(worst, report_path(false, name.c_str(), gradcheck(loss, t, 1e-4)));
        }
        report_path(verbose, "encoder (all parameters, 2 layers)", worst);
    }

    {  // gyrokernel basis points and curvature
        ParamStore store;
        Rng brng(77);
        auto basis = ProductManifoldBasis::create({{-1.0, 5}, {0.0, 4}, {1.0, 4}}, 3, 2, 1.0, 11, brng,
                                                  DType::F64, store);
        Rng wrng(3);
        Tensor weight = gaussian_param(3, 13, 1.0, wrng, DType::F64);
        auto loss = [&](const Tensor&) { return sum_all(mul(basis.project(), weight)); };
        double local = 0.0;
        for (auto& [name, t] : store.items) local = std::max(local, gradcheck(loss, t, 1e-4));
        worst = std::max(worst, report_path(verbose, "gyrokernel basis points and curvatures", local));
    }

    {  // decoder heads
        ParamStore store;
        Rng hrng(5);
        auto head = TaskHead::create(TaskKind::NodeClass, {4, 4}, 5, 3, hrng, DType::F64, store, "h");
        Tensor latent = gaussian_param(3, 8, 1.0, hrng, DType::F64);
        auto loss = [&](const Tensor&) {
            Tensor out = head_forward(head, decouple(latent, {4, 4}));
            return cross_entropy_rows(out, {0, 2, 1});
        };
        double local = gradcheck(loss, latent, 1e-4);
        for (auto& [name, t] : store.items) local = std::max(local, gradcheck(loss, t, 1e-4));
        worst = std::max(worst, report_path(verbose, "decoder head + cross entropy", local));
    }

    {  // losses
        Rng lrng(8);
        Tensor mu = gaussian_param(3, 4, 1.0, lrng, DType::F64);
        Tensor lv = gaussian_param(3, 4, 0.4, lrng, DType::F64);
        double local = gradcheck([&](const Tensor&) { return kl_reg(mu, lv); }, mu, 1e-4);
        local = std::max(local, gradcheck([&](const Tensor&) { return kl_reg(mu, lv); }, lv, 1e-4));
        Tensor pred = gaussian_param(2, 2, 1.0, lrng, DType::F64);
        local = std::max(local, gradcheck(
                                    [&](const Tensor& t) {
                                        return mse(t, Tensor::from(2, 2, {0.5, -1.0, 0.0, 2.0}));
                                    },
                                    pred, 1e-4));
        worst = std::max(worst, report_path(verbose, "kl regularizer + mse", local));
    }

    {  // denoiser with cross-attention, all condition embedders
        ParamStore store;
        Rng drng(13);
        DenoiserConfig dc;
        dc.width = 2;
        dc.hidden = 4;
        dc.layers = 1;
        dc.heads = 2;
        dc.num_classes = 3;
        dc.cond_latent_width = 5;
        auto den = DenoiserParams::create(dc, drng, DType::F64, store);
        auto sched = NoiseSchedule::linear(10, 1e-3, 0.1);
        Rng srng(4);
        auto mk = [&](int r, int c) {
            std::vector<double> v(static_cast<std::size_t>(r) * c);
            for (auto& x : v) x = srng.gaussian();
            return Tensor::from(r, c, std::move(v));
        };
        DiffusionState z0{mk(2, 2), mk(4, 2)};
        DiffusionState eps{mk(2, 2), mk(4, 2)};
        std::vector<double> lat(10);
        for (auto& v : lat) v = srng.gaussian();
        const Condition conds[3] = {Condition::cls(1), Condition::value(0.7),
                                    Condition::per_node(Tensor::from(2, 5, lat))};
        double local = 0.0;
        for (const auto& cond : conds) {
            auto loss = [&](const Tensor&) {
                return noise_prediction_loss(
                    [&](const DiffusionState& z, int t, const Condition& c) {
                        return denoise_forward(den, z, t, c);
                    },
                    z0, cond, 4, eps, sched);
            };
            for (auto& [name, t] : store.items) local = std::max(local, gradcheck(loss, t, 1e-4));
        }
        worst = std::max(worst, report_path(verbose, "denoiser + cross-attention (3 embedders)", local));
    }

    if (verbose) std::printf("gradcheck battery worst relative error: %.3e\n", worst);
    return worst;
}

double verify_prop31_battery(bool verbose, int grid) {
    double worst = 0.0;
    if (verbose) std::printf("  k1  k2   measured      expected   rel_err\n");
    for (int k1 = 0; k1 <= 4; ++k1) {
        for (int k2 = 0; k2 <= 4; ++k2) {
            auto r = verify_product_eigen(k1, k2, grid);
            double rel;
            if (r.expected == 0.0) {
                rel = std::abs(r.measured) < 1e-10 ? 0.0 : 1.0;
            } else {
                rel = std::abs(r.measured - r.expected) / r.expected;
            }
            worst = std::max(worst, rel);
            if (verbose) {
                std::printf("  %2d  %2d  %+11.6f  %+11.6f  %.2e\n", k1, k2, r.measured, r.expected, rel);
            }
        }
    }
    return worst;
}

void write_manifest(const RunConfig& cfg) {
    nlohmann::ordered_json manifest;
    manifest["config"] = cfg.to_kv();
    manifest["seeds"] = {{"global", cfg.seed}, {"dataset", cfg.dataset_seed}};
    nlohmann::ordered_json ckpts = nlohmann::ordered_json::object();
    for (const char* name : {"ae.ckpt", "diff.ckpt"}) {
        const fs::path p = fs::path(cfg.out_dir) / name;
        if (fs::exists(p)) {
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%08x", file_crc32(p.string()));
            ckpts[name] = buf;
        }
    }
    manifest["checkpoints"] = ckpts;
    auto out = open_out(fs::path(cfg.out_dir) / "manifest.json");
    out << manifest.dump(2) << '\n';
}

ReconQuality reconstruction_quality(const AeModel& model, const Graph& g) {
    AeModel& m = const_cast<AeModel&>(model);
    LatentState z = encode(g, m.encoder, {});
    Tensor vbar = m.basis.project();
    LatentState zg = geometrize_latent(z, vbar);
    const auto widths = m.basis.feature_widths();
    Tensor node_logits = head_forward(*m.node_recon, decouple(zg.z_x, widths));
    Tensor edge_logits =
        symmetrize_edge_logits(head_forward(*m.edge_recon, decouple(zg.z_e, widths)), g.n);
    return {node_accuracy(node_logits, g), edge_accuracy(edge_logits, g)};
}

}  // namespace geomancer
