#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "geomancer/checkpoint.hpp"
#include "geomancer/config.hpp"
#include "geomancer/datasets.hpp"
#include "geomancer/pipeline.hpp"

using namespace geomancer;

namespace {

RunConfig make_config(const std::string& config_path, const std::vector<std::string>& overrides) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + kv);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        cfg.apply_override(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
    if (const char* env = std::getenv("GEOMANCER_SEED")) {
        cfg.seed = static_cast<std::uint64_t>(std::stoull(env));
    }
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geomancer: product-manifold latent graph diffusion"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "run configuration file (key = value lines)");
    app.add_option("--set", overrides, "override a config key, e.g. --set schedule.T=200");

    auto* cmd_train_ae = app.add_subcommand("train-ae", "train the gyrokernel autoencoder");
    auto* cmd_train_diff = app.add_subcommand("train-diff", "train the latent diffusion denoiser");
    auto* cmd_generate = app.add_subcommand("generate", "sample latents and decode graphs");
    int gen_count = -1;
    bool gen_trace = false;
    cmd_generate->add_option("--count", gen_count, "number of graphs (default: sample.count)");
    cmd_generate->add_flag("--trace", gen_trace, "write sampler_trace.csv for the first sample");
    auto* cmd_predict = app.add_subcommand("predict", "conditional generation of labels/targets");
    auto* cmd_evaluate = app.add_subcommand("evaluate", "score a generated JSONL against a train JSONL");
    std::string eval_generated, eval_train;
    cmd_evaluate->add_option("--generated", eval_generated, "generated graphs JSONL")->required();
    cmd_evaluate->add_option("--train", eval_train, "training graphs JSONL")->required();
    auto* cmd_gradcheck = app.add_subcommand("gradcheck", "finite-difference audit of every differentiable path");
    auto* cmd_bench = app.add_subcommand("bench-stability", "exp/log round-trip vs kernel-feature stability sweep");
    auto* cmd_export = app.add_subcommand("export-embeddings", "write graph embeddings and manifold weights");
    auto* cmd_prop31 = app.add_subcommand("verify-prop31", "finite-difference eigenvalue additivity check");
    int prop_grid = 256;
    cmd_prop31->add_option("--grid", prop_grid, "torus grid resolution");
    auto* cmd_make_data = app.add_subcommand("make-data", "generate a dataset JSONL plus manifest");
    std::string data_out = "dataset.jsonl";
    cmd_make_data->add_option("--out", data_out, "output JSONL path");

    for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) sub->fallthrough();
    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_gradcheck->parsed()) {
            const double worst = gradcheck_battery(true);
            std::printf("worst relative error: %.3e (threshold 1e-4)\n", worst);
            return worst < 1e-4 ? 0 : 1;
        }
        if (cmd_prop31->parsed()) {
            const double worst = verify_prop31_battery(true, prop_grid);
            std::printf("worst relative eigenvalue error: %.3e (threshold 0.01)\n", worst);
            return worst < 0.01 ? 0 : 1;
        }

        RunConfig cfg = make_config(config_path, overrides);

        if (cmd_train_ae->parsed()) {
            auto r = train_ae(cfg);
            std::printf("train-ae: checkpoint %s (val %.6f -> %.6f)\n", r.checkpoint_path.c_str(),
                        r.first_val_metric, r.best_val_metric);
        } else if (cmd_train_diff->parsed()) {
            auto r = train_diffusion(cfg);
            std::printf("train-diff: checkpoint %s (val loss %.6f -> %.6f)\n",
                        r.checkpoint_path.c_str(), r.init_val_loss, r.best_val_loss);
        } else if (cmd_generate->parsed()) {
            const int count = gen_count >= 0 ? gen_count : cfg.sample_count;
            auto report = generate(cfg, count, gen_trace);
            std::printf("generate: %d graphs  validity %.4f  uniqueness %.4f  novelty %.4f  "
                        "mmd_degree %.6f  mmd_clustering %.6f\n",
                        count, report.validity, report.uniqueness, report.novelty, report.mmd_degree,
                        report.mmd_clustering);
        } else if (cmd_predict->parsed()) {
            auto r = predict(cfg);
            const char* name = cfg.task == TaskKindRun::NodeClass ? "accuracy" : "mae";
            std::printf("predict: %s %.6f (%s)\n", name, r.metric, r.csv_path.c_str());
        } else if (cmd_evaluate->parsed()) {
            auto report = evaluate_files(cfg, eval_generated, eval_train);
            std::printf("evaluate: validity %.4f  uniqueness %.4f  novelty %.4f  mmd_degree %.6f  "
                        "mmd_clustering %.6f\n",
                        report.validity, report.uniqueness, report.novelty, report.mmd_degree,
                        report.mmd_clustering);
        } else if (cmd_bench->parsed()) {
            auto r = bench_stability(cfg);
            std::printf("bench-stability: %d rows, gyro non-finite %d, f32 failures %d "
                        "(%d at norm >= 30), f64 failures %d\n",
                        r.rows, r.gyro_nonfinite, r.f32_failures_total, r.f32_failures_norm_ge_30,
                        r.f64_failures_total);
        } else if (cmd_export->parsed()) {
            export_embeddings(cfg);
            std::printf("export-embeddings: wrote embeddings.csv and manifold_weights.csv under %s\n",
                        cfg.out_dir.c_str());
        } else if (cmd_make_data->parsed()) {
            auto data = resolve_dataset(cfg);
            save_jsonl(data.graphs, data_out);
            RunConfig manifest_cfg = cfg;
            write_manifest(manifest_cfg);
            std::printf("make-data: wrote %zu graphs to %s\n", data.graphs.size(), data_out.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
