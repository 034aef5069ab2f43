#include "dmfuse/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dmfuse/digest.hpp"

namespace dmfuse {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string join_ints(const std::vector<int>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

std::vector<int> split_ints(const std::string& s) {
    std::vector<int> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void FusionConfig::validate() const {
    if (resolution < 16 || resolution % 16 != 0)
        throw std::invalid_argument("config: resolution must be a positive multiple of 16");
    if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("config: loss weights must be nonnegative");
    if (schedule_T < 1) throw std::invalid_argument("config: schedule T must be >= 1");
    if (!(beta_start >= 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument("config: betas must satisfy 0 <= start <= end < 1");
    TimeStepSet steps(time_steps);
    if (steps.steps.back() > schedule_T) throw std::invalid_argument("config: time step beyond schedule T");
    if (patch_size <= 0 || patch_stride <= 0 || patch_size > resolution)
        throw std::invalid_argument("config: bad patch geometry");
    recon_arch().validate();
    fusion_arch().validate();
    if (stage1_steps < 0 || stage2_steps < 0) throw std::invalid_argument("config: negative step budget");
    if (train_pairs_per_task < 1 || test_pairs_per_task < 1 || ablate_pairs_per_task < 1)
        throw std::invalid_argument("config: pair counts must be positive");
}

ReconArch FusionConfig::recon_arch() const {
    ReconArch a;
    a.resolution = resolution;
    a.base_width = base_width;
    a.mult = channel_multipliers;
    a.time_embed_dim = time_embed_dim;
    return a;
}

NoiseSchedule FusionConfig::make_schedule() const { return make_linear_schedule(schedule_T, beta_start, beta_end); }

TimeStepSet FusionConfig::step_set() const { return TimeStepSet(time_steps); }

FusionArch FusionConfig::fusion_arch() const {
    FusionArch a = FusionArch::from_recon(recon_arch(), static_cast<int>(time_steps.size()));
    a.shuffle_groups = shuffle_groups;
    a.ca_reduction = ca_reduction;
    return a;
}

std::string FusionConfig::serialize() const {
    std::ostringstream os;
    os << "[data]\n";
    os << "root = " << data_root << "\n";
    os << "resolution = " << resolution << "\n";
    os << "train_pairs_per_task = " << train_pairs_per_task << "\n";
    os << "test_pairs_per_task = " << test_pairs_per_task << "\n";
    os << "\n[schedule]\n";
    os << "T = " << schedule_T << "\n";
    os << "beta_start = " << fmt_double(beta_start) << "\n";
    os << "beta_end = " << fmt_double(beta_end) << "\n";
    os << "\n[fusion]\n";
    os << "time_steps = " << join_ints(time_steps) << "\n";
    os << "\n[loss]\n";
    os << "alpha = " << fmt_double(alpha) << "\n";
    os << "beta = " << fmt_double(beta) << "\n";
    os << "patch_size = " << patch_size << "\n";
    os << "patch_stride = " << patch_stride << "\n";
    os << "\n[model]\n";
    os << "base_width = " << base_width << "\n";
    os << "channel_multipliers = " << channel_multipliers[0];
    for (int i = 1; i < 5; ++i) os << ',' << channel_multipliers[i];
    os << "\n";
    os << "time_embed_dim = " << time_embed_dim << "\n";
    os << "shuffle_groups = " << shuffle_groups << "\n";
    os << "ca_reduction = " << ca_reduction << "\n";
    os << "\n[train]\n";
    os << "stage1_steps = " << stage1_steps << "\n";
    os << "stage2_steps = " << stage2_steps << "\n";
    os << "stage1_lr = " << fmt_double(stage1_lr) << "\n";
    os << "stage2_lr = " << fmt_double(stage2_lr) << "\n";
    os << "adam_beta1 = " << fmt_double(adam_beta1) << "\n";
    os << "adam_beta2 = " << fmt_double(adam_beta2) << "\n";
    os << "\n[ablate]\n";
    os << "stage1_steps = " << ablate_stage1_steps << "\n";
    os << "stage2_steps = " << ablate_stage2_steps << "\n";
    os << "pairs_per_task = " << ablate_pairs_per_task << "\n";
    os << "\n[seeds]\n";
    os << "master = " << seed << "\n";
    return os.str();
}

FusionConfig FusionConfig::parse(const std::string& text) {
    FusionConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = section + "." + trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "data.root") cfg.data_root = val;
            else if (key == "data.resolution") cfg.resolution = std::stoi(val);
            else if (key == "data.train_pairs_per_task") cfg.train_pairs_per_task = std::stoi(val);
            else if (key == "data.test_pairs_per_task") cfg.test_pairs_per_task = std::stoi(val);
            else if (key == "schedule.T") cfg.schedule_T = std::stoi(val);
            else if (key == "schedule.beta_start") cfg.beta_start = std::stod(val);
            else if (key == "schedule.beta_end") cfg.beta_end = std::stod(val);
            else if (key == "fusion.time_steps") cfg.time_steps = split_ints(val);
            else if (key == "loss.alpha") cfg.alpha = std::stod(val);
            else if (key == "loss.beta") cfg.beta = std::stod(val);
            else if (key == "loss.patch_size") cfg.patch_size = std::stoi(val);
            else if (key == "loss.patch_stride") cfg.patch_stride = std::stoi(val);
            else if (key == "model.base_width") cfg.base_width = std::stoi(val);
            else if (key == "model.channel_multipliers") {
                const auto v = split_ints(val);
                if (v.size() != 5) throw std::invalid_argument("need 5 multipliers");
                for (int i = 0; i < 5; ++i) cfg.channel_multipliers[i] = v[i];
            } else if (key == "model.time_embed_dim") cfg.time_embed_dim = std::stoi(val);
            else if (key == "model.shuffle_groups") cfg.shuffle_groups = std::stoi(val);
            else if (key == "model.ca_reduction") cfg.ca_reduction = std::stoi(val);
            else if (key == "train.stage1_steps") cfg.stage1_steps = std::stoi(val);
            else if (key == "train.stage2_steps") cfg.stage2_steps = std::stoi(val);
            else if (key == "train.stage1_lr") cfg.stage1_lr = std::stod(val);
            else if (key == "train.stage2_lr") cfg.stage2_lr = std::stod(val);
            else if (key == "train.adam_beta1") cfg.adam_beta1 = std::stod(val);
            else if (key == "train.adam_beta2") cfg.adam_beta2 = std::stod(val);
            else if (key == "ablate.stage1_steps") cfg.ablate_stage1_steps = std::stoi(val);
            else if (key == "ablate.stage2_steps") cfg.ablate_stage2_steps = std::stoi(val);
            else if (key == "ablate.pairs_per_task") cfg.ablate_pairs_per_task = std::stoi(val);
            else if (key == "seeds.master") cfg.seed = std::stoull(val);
            else throw std::invalid_argument("unknown key");
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + " (" + key + "): " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

FusionConfig FusionConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void FusionConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("config: cannot write " + path);
    out << serialize();
}

std::string FusionConfig::digest() const { return sha256_hex(serialize()); }

std::string FusionConfig::recon_arch_digest() const {
    std::ostringstream os;
    os << "recon;res=" << resolution << ";base=" << base_width << ";mult=";
    for (int i = 0; i < 5; ++i) os << (i ? "," : "") << channel_multipliers[i];
    os << ";emb=" << time_embed_dim;
    return sha256_hex(os.str());
}

std::string FusionConfig::fusion_arch_digest() const {
    std::ostringstream os;
    os << "fusion;recon=" << recon_arch_digest() << ";n_steps=" << time_steps.size()
       << ";groups=" << shuffle_groups << ";ca_r=" << ca_reduction;
    return sha256_hex(os.str());
}

}  // namespace dmfuse
