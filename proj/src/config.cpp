#include "geomancer/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace geomancer {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("config: cannot format double");
    return std::string(buf, ptr);
}

double parse_double(const std::string& s, const std::string& key) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad number for " + key + ": " + s);
    }
}

std::int64_t parse_int(const std::string& s, const std::string& key) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad integer for " + key + ": " + s);
    }
}

bool parse_bool(const std::string& s, const std::string& key) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw std::invalid_argument("config: bad bool for " + key + ": " + s);
}

std::vector<double> parse_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_double(item, key));
    }
    if (out.empty()) throw std::invalid_argument("config: empty list for " + key);
    return out;
}

}  // namespace

TaskKindRun task_from_string(const std::string& s) {
    if (s == "gen_uncond") return TaskKindRun::GenUncond;
    if (s == "gen_cond") return TaskKindRun::GenCond;
    if (s == "node_class") return TaskKindRun::NodeClass;
    if (s == "graph_regress") return TaskKindRun::GraphRegress;
    throw std::invalid_argument("task must be gen_uncond | gen_cond | node_class | graph_regress");
}

std::string to_string(TaskKindRun t) {
    switch (t) {
        case TaskKindRun::GenUncond: return "gen_uncond";
        case TaskKindRun::GenCond: return "gen_cond";
        case TaskKindRun::NodeClass: return "node_class";
        case TaskKindRun::GraphRegress: return "graph_regress";
    }
    return "gen_uncond";
}

DType RunConfig::dtype() const {
    if (precision == "f32") return DType::F32;
    if (precision == "f64") return DType::F64;
    throw std::invalid_argument("precision must be f32 or f64");
}

GuidanceConfig RunConfig::guidance() const {
    GuidanceConfig g;
    g.mode = guidance_mode_from_string(guidance_mode);
    g.lambda_g = lambda_g;
    g.w = cfg_w;
    g.p_uncond = p_uncond;
    g.compat_combination = guidance_compat;
    return g;
}

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::stringstream ss(text);
    std::string line;
    int ln = 0;
    while (std::getline(ss, line)) {
        ++ln;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(ln) + ": expected key = value");
        }
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_kv(parse_kv_text(ss.str()));
}

RunConfig RunConfig::from_kv(const std::map<std::string, std::string>& kv) {
    RunConfig cfg;
    for (const auto& [key, value] : kv) cfg.apply_override(key, value);
    return cfg;
}

void RunConfig::apply_override(const std::string& key, const std::string& value) {
    if (key == "task") {
        task = task_from_string(value);
    } else if (key == "seed") {
        seed = static_cast<std::uint64_t>(parse_int(value, key));
    } else if (key == "precision") {
        precision = value;
    } else if (key == "out.dir") {
        out_dir = value;
    } else if (key == "dataset.kind") {
        dataset_kind = value;
    } else if (key == "dataset.count") {
        dataset_count = static_cast<int>(parse_int(value, key));
    } else if (key == "dataset.seed") {
        dataset_seed = static_cast<std::uint64_t>(parse_int(value, key));
    } else if (key == "dataset.sbm_per_block") {
        sbm_per_block = static_cast<int>(parse_int(value, key));
    } else if (key == "dataset.sbm_blocks") {
        sbm_blocks = static_cast<int>(parse_int(value, key));
    } else if (key == "dataset.sbm_p_in") {
        sbm_p_in = parse_double(value, key);
    } else if (key == "dataset.sbm_p_out") {
        sbm_p_out = parse_double(value, key);
    } else if (key == "model.d_latent") {
        d_latent = static_cast<int>(parse_int(value, key));
    } else if (key == "model.hidden") {
        hidden = static_cast<int>(parse_int(value, key));
    } else if (key == "model.layers_enc") {
        layers_enc = static_cast<int>(parse_int(value, key));
    } else if (key == "model.layers_denoise") {
        layers_denoise = static_cast<int>(parse_int(value, key));
    } else if (key == "model.heads") {
        heads = static_cast<int>(parse_int(value, key));
    } else if (key == "model.head_hidden") {
        head_hidden = static_cast<int>(parse_int(value, key));
    } else if (key == "model.ball_dim") {
        ball_dim = static_cast<int>(parse_int(value, key));
    } else if (key == "model.positional") {
        positional = parse_bool(value, key);
    } else if (key == "gyro.components") {
        gyro_signs = parse_list(value, key);
    } else if (key == "gyro.m") {
        gyro_m = static_cast<int>(parse_int(value, key));
    } else if (key == "gyro.s") {
        gyro_s = parse_double(value, key);
    } else if (key == "schedule.T") {
        schedule_steps = static_cast<int>(parse_int(value, key));
    } else if (key == "schedule.beta_1") {
        beta_1 = parse_double(value, key);
    } else if (key == "schedule.beta_T") {
        beta_t = parse_double(value, key);
    } else if (key == "guidance.mode") {
        guidance_mode = value;
    } else if (key == "guidance.lambda") {
        lambda_g = parse_double(value, key);
    } else if (key == "guidance.w") {
        cfg_w = parse_double(value, key);
    } else if (key == "guidance.p_uncond") {
        p_uncond = parse_double(value, key);
    } else if (key == "guidance.k") {
        kmeans_k = static_cast<int>(parse_int(value, key));
    } else if (key == "guidance.compat") {
        guidance_compat = parse_bool(value, key);
    } else if (key == "optim.ae_lr") {
        ae_lr = parse_double(value, key);
    } else if (key == "optim.ae_weight_decay") {
        ae_weight_decay = parse_double(value, key);
    } else if (key == "optim.ae_epochs") {
        ae_epochs = static_cast<int>(parse_int(value, key));
    } else if (key == "optim.diff_lr") {
        diff_lr = parse_double(value, key);
    } else if (key == "optim.diff_weight_decay") {
        diff_weight_decay = parse_double(value, key);
    } else if (key == "optim.diff_epochs") {
        diff_epochs = static_cast<int>(parse_int(value, key));
    } else if (key == "optim.batch") {
        batch = static_cast<int>(parse_int(value, key));
    } else if (key == "optim.grad_clip") {
        grad_clip = parse_double(value, key);
    } else if (key == "loss.beta") {
        kl_beta = parse_double(value, key);
    } else if (key == "sample.count") {
        sample_count = static_cast<int>(parse_int(value, key));
    } else {
        throw std::invalid_argument("config: unknown key " + key);
    }
}

std::map<std::string, std::string> RunConfig::to_kv() const {
    std::map<std::string, std::string> kv;
    kv["task"] = to_string(task);
    kv["seed"] = std::to_string(seed);
    kv["precision"] = precision;
    kv["out.dir"] = out_dir;
    kv["dataset.kind"] = dataset_kind;
    kv["dataset.count"] = std::to_string(dataset_count);
    kv["dataset.seed"] = std::to_string(dataset_seed);
    kv["dataset.sbm_per_block"] = std::to_string(sbm_per_block);
    kv["dataset.sbm_blocks"] = std::to_string(sbm_blocks);
    kv["dataset.sbm_p_in"] = fmt_double(sbm_p_in);
    kv["dataset.sbm_p_out"] = fmt_double(sbm_p_out);
    kv["model.d_latent"] = std::to_string(d_latent);
    kv["model.hidden"] = std::to_string(hidden);
    kv["model.layers_enc"] = std::to_string(layers_enc);
    kv["model.layers_denoise"] = std::to_string(layers_denoise);
    kv["model.heads"] = std::to_string(heads);
    kv["model.head_hidden"] = std::to_string(head_hidden);
    kv["model.ball_dim"] = std::to_string(ball_dim);
    kv["model.positional"] = positional ? "true" : "false";
    std::string comps;
    for (std::size_t i = 0; i < gyro_signs.size(); ++i) {
        if (i) comps += ",";
        comps += fmt_double(gyro_signs[i]);
    }
    kv["gyro.components"] = comps;
    kv["gyro.m"] = std::to_string(gyro_m);
    kv["gyro.s"] = fmt_double(gyro_s);
    kv["schedule.T"] = std::to_string(schedule_steps);
    kv["schedule.beta_1"] = fmt_double(beta_1);
    kv["schedule.beta_T"] = fmt_double(beta_t);
    kv["guidance.mode"] = guidance_mode;
    kv["guidance.lambda"] = fmt_double(lambda_g);
    kv["guidance.w"] = fmt_double(cfg_w);
    kv["guidance.p_uncond"] = fmt_double(p_uncond);
    kv["guidance.k"] = std::to_string(kmeans_k);
    kv["guidance.compat"] = guidance_compat ? "true" : "false";
    kv["optim.ae_lr"] = fmt_double(ae_lr);
    kv["optim.ae_weight_decay"] = fmt_double(ae_weight_decay);
    kv["optim.ae_epochs"] = std::to_string(ae_epochs);
    kv["optim.diff_lr"] = fmt_double(diff_lr);
    kv["optim.diff_weight_decay"] = fmt_double(diff_weight_decay);
    kv["optim.diff_epochs"] = std::to_string(diff_epochs);
    kv["optim.batch"] = std::to_string(batch);
    kv["optim.grad_clip"] = fmt_double(grad_clip);
    kv["loss.beta"] = fmt_double(kl_beta);
    kv["sample.count"] = std::to_string(sample_count);
    return kv;
}

std::string RunConfig::serialize() const {
    std::string out;
    for (const auto& [key, value] : to_kv()) {
        out += key;
        out += " = ";
        out += value;
        out += "\n";
    }
    return out;
}

void RunConfig::validate() const {
    dtype();
    guidance();
    if (d_latent < 1 || hidden < 1 || layers_enc < 1 || layers_denoise < 1) {
        throw std::invalid_argument("config: model dims must be positive");
    }
    if (hidden % heads != 0) throw std::invalid_argument("config: heads must divide hidden");
    if (gyro_m < 1) throw std::invalid_argument("config: gyro.m must be positive");
    for (double s : gyro_signs) {
        if (s != -1.0 && s != 0.0 && s != 1.0) {
            throw std::invalid_argument("config: gyro.components entries must be -1, 0 or 1");
        }
    }
    if (dataset_kind != "grammar" && dataset_kind != "sbm") {
        throw std::invalid_argument("config: dataset.kind must be grammar or sbm");
    }
    if (schedule_steps < 1 || !(beta_1 > 0.0) || !(beta_t < 1.0) || beta_1 > beta_t) {
        throw std::invalid_argument("config: bad schedule");
    }
    if (lambda_g < 0.0 || lambda_g > 1.0) throw std::invalid_argument("config: guidance.lambda in [0,1]");
    if (p_uncond < 0.0 || p_uncond >= 1.0) throw std::invalid_argument("config: guidance.p_uncond in [0,1)");
    if (batch < 1 || ae_epochs < 0 || diff_epochs < 0) throw std::invalid_argument("config: bad optimizer block");
    if (kmeans_k < 1) throw std::invalid_argument("config: guidance.k must be positive");
    if (sample_count < 0) throw std::invalid_argument("config: sample.count must be >= 0");
}

}  // namespace geomancer
