#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "geomancer/diffusion.hpp"
#include "geomancer/tensor.hpp"

namespace geomancer {

enum class TaskKindRun { GenUncond, GenCond, NodeClass, GraphRegress };

TaskKindRun task_from_string(const std::string& s);
std::string to_string(TaskKindRun t);

// Flat key = value run configuration ('#' comments, comma-separated lists).
// Round-trips losslessly through serialize/parse.
struct RunConfig {
    TaskKindRun task = TaskKindRun::GenUncond;
    std::uint64_t seed = 42;
    std::string precision = "f32";  // f32 | f64
    std::string out_dir = "run";

    // dataset
    std::string dataset_kind = "grammar";  // grammar | sbm
    int dataset_count = 2000;
    std::uint64_t dataset_seed = 1;
    int sbm_per_block = 8;
    int sbm_blocks = 3;
    double sbm_p_in = 0.6;
    double sbm_p_out = 0.05;

    // model dims
    int d_latent = 16;
    int hidden = 64;
    int layers_enc = 5;
    int layers_denoise = 4;
    int heads = 4;
    int head_hidden = 32;
    int ball_dim = 2;
    bool positional = true;

    // gyrokernel
    std::vector<double> gyro_signs{-1.0, 0.0, 1.0};
    int gyro_m = 64;
    double gyro_s = 1.0;

    // schedule
    int schedule_steps = 1000;
    double beta_1 = 1e-4;
    double beta_t = 0.02;

    // guidance
    std::string guidance_mode = "cfgpp";
    double lambda_g = 0.6;
    double cfg_w = 0.0;
    double p_uncond = 0.1;
    int kmeans_k = 10;
    bool guidance_compat = false;

    // optimizer
    double ae_lr = 1e-3;
    double ae_weight_decay = 1e-5;
    int ae_epochs = 8;
    double diff_lr = 1e-4;
    double diff_weight_decay = 1e-6;
    int diff_epochs = 10;
    int batch = 16;
    double grad_clip = 5.0;
    double kl_beta = 1e-3;

    // generation
    int sample_count = 128;

    DType dtype() const;
    GuidanceConfig guidance() const;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_kv(const std::map<std::string, std::string>& kv);
    void apply_override(const std::string& key, const std::string& value);
    std::map<std::string, std::string> to_kv() const;
    std::string serialize() const;
    void validate() const;
};

std::map<std::string, std::string> parse_kv_text(const std::string& text);

}  // namespace geomancer
