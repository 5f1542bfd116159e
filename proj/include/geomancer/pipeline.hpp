#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geomancer/config.hpp"
#include "geomancer/datasets.hpp"
#include "geomancer/decoder.hpp"
#include "geomancer/diffusion.hpp"
#include "geomancer/encoder.hpp"
#include "geomancer/gyrokernel.hpp"
#include "geomancer/metrics.hpp"

namespace geomancer {

// Decoupled-weight-decay Adam over a parameter store; gradients are passed in
// explicitly so batches can be accumulated outside.
class AdamW {
public:
    AdamW(const ParamStore& store, double lr, double weight_decay);
    void step(ParamStore& store, const std::vector<std::vector<double>>& grads);

private:
    double lr_;
    double wd_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    int t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

struct GradAccumulator {
    std::vector<std::vector<double>> sums;

    explicit GradAccumulator(const ParamStore& store);
    void add(const ParamStore& store);
    void scale(double s);
    void clip_global_norm(double max_norm);
    void clear();
};

struct DatasetBundle {
    std::vector<Graph> graphs;
    DatasetSplit split;
    GrammarSpec grammar;
    int node_types = 0;
    int edge_types = 0;
};

DatasetBundle resolve_dataset(const RunConfig& cfg);

// Autoencoder assembly: encoder, gyrokernel basis and the task heads.
struct AeModel {
    RunConfig cfg;
    ParamStore params;
    ParamStore buffers;  // normalization constants; saved, never optimized
    EncoderParams encoder;
    ProductManifoldBasis basis;
    std::optional<TaskHead> node_recon, edge_recon, node_class_head, graph_head;
    int feature_width = 0;

    static AeModel build(const RunConfig& cfg, const DatasetBundle& data);
};

struct DiffModel {
    RunConfig cfg;
    ParamStore params;
    ParamStore buffers;  // label codes, target stats, k-means centroids
    DenoiserParams denoiser;

    static DiffModel build(const RunConfig& cfg, int state_width, int cond_width, int num_classes);
};

int diffusion_num_classes(const RunConfig& cfg, const DatasetBundle& data);

struct TrainAeResult {
    std::string checkpoint_path;
    double best_val_metric = 0.0;
    double first_val_metric = 0.0;
};
TrainAeResult train_ae(const RunConfig& cfg);

struct TrainDiffResult {
    std::string checkpoint_path;
    double init_val_loss = 0.0;
    double best_val_loss = 0.0;
};
TrainDiffResult train_diffusion(const RunConfig& cfg);

GenReport generate(const RunConfig& cfg, int count, bool write_trace = false);

struct PredictResult {
    double metric = 0.0;  // accuracy (node_class) or MAE (graph_regress)
    std::string csv_path;
};
PredictResult predict(const RunConfig& cfg);

GenReport evaluate_files(const RunConfig& cfg, const std::string& generated_path,
                         const std::string& train_path);

struct StabilityReport {
    int rows = 0;
    int gyro_nonfinite = 0;
    int f32_failures_total = 0;
    int f32_failures_norm_ge_30 = 0;
    int f64_failures_total = 0;
};
StabilityReport bench_stability(const RunConfig& cfg);

void export_embeddings(const RunConfig& cfg);

// Worst relative gradcheck error across every differentiable path
// (64-bit, h = 1e-4); prints one line per path when verbose.
double gradcheck_battery(bool verbose);

// Worst relative eigenvalue error over (k1, k2) in {0..4}^2 at grid 256.
double verify_prop31_battery(bool verbose, int grid = 256);

void write_manifest(const RunConfig& cfg);

// Reconstruction quality of a trained AE on one graph (used by memorization checks).
struct ReconQuality {
    double node_acc = 0.0;
    double edge_acc = 0.0;
};
ReconQuality reconstruction_quality(const AeModel& model, const Graph& g);

}  // namespace geomancer
