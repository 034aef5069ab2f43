#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "dmfuse/pipeline.hpp"

namespace {

// exit codes: 1 usage/config, 2 data/io, 3 numeric failure
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

dmfuse::FusionConfig load_config(const std::string& path, bool has_seed, uint64_t seed) {
    dmfuse::FusionConfig cfg = path.empty() ? dmfuse::FusionConfig{} : dmfuse::FusionConfig::load(path);
    if (has_seed) cfg.seed = seed;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dmfuse: two-stage diffusion-trained multimodal image fusion"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", recon_ckpt, fusion_ckpt, pairs_manifest, fused_dir, split = "test",
                mode_name;
    uint64_t seed = 0;
    bool has_seed = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "configuration file (key = value sections)");
        cmd->add_option("--out-dir", out_dir, "output directory")->required();
        cmd->add_option("--seed", seed, "override the master seed")->each([&](const std::string&) { has_seed = true; });
    };

    auto* phantom = app.add_subcommand("phantom", "generate the synthetic phantom datasets");
    add_common(phantom);

    auto* train_recon = app.add_subcommand("train-recon", "Stage I: train the denoising reconstructor");
    add_common(train_recon);

    auto* train_fusion = app.add_subcommand("train-fusion", "Stage II: train the fusion network");
    add_common(train_fusion);
    train_fusion->add_option("--recon", recon_ckpt, "reconstructor checkpoint")->required();

    auto* fuse = app.add_subcommand("fuse", "fuse image pairs with trained checkpoints");
    add_common(fuse);
    fuse->add_option("--recon", recon_ckpt, "reconstructor checkpoint")->required();
    fuse->add_option("--fusion", fusion_ckpt, "fusion checkpoint")->required();
    fuse->add_option("--pairs", pairs_manifest, "pair manifest (manifest.tsv)")->required();
    fuse->add_option("--split", split, "split tag to fuse (default test)");

    auto* eval = app.add_subcommand("eval", "score fused outputs with the nine metrics");
    add_common(eval);
    eval->add_option("--fused-dir", fused_dir, "directory of <pairid>_F.png files")->required();
    eval->add_option("--pairs", pairs_manifest, "pair manifest (manifest.tsv)")->required();
    eval->add_option("--split", split, "split tag to score (default test)");

    auto* ablate = app.add_subcommand("ablate", "run one of the ablation protocols");
    add_common(ablate);
    ablate->add_option("--mode", mode_name, "loss-weights|time-steps|no-diffusion|no-amff|no-msff")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const dmfuse::FusionConfig cfg = load_config(config_path, has_seed, seed);
        if (phantom->parsed()) dmfuse::pipeline::cmd_phantom(cfg, out_dir);
        else if (train_recon->parsed()) dmfuse::pipeline::cmd_train_recon(cfg, out_dir);
        else if (train_fusion->parsed()) dmfuse::pipeline::cmd_train_fusion(cfg, recon_ckpt, out_dir);
        else if (fuse->parsed()) dmfuse::pipeline::cmd_fuse(cfg, recon_ckpt, fusion_ckpt, pairs_manifest, split, out_dir);
        else if (eval->parsed()) dmfuse::pipeline::cmd_eval(cfg, fused_dir, pairs_manifest, split, out_dir);
        else if (ablate->parsed())
            dmfuse::pipeline::cmd_ablate(cfg, dmfuse::pipeline::ablate_mode_from_name(mode_name), out_dir);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::runtime_error& e) {
        const std::string what = e.what();
        std::cerr << "error: " << what << '\n';
        return what.find("non-finite") != std::string::npos ? kExitNumeric : kExitData;
    }
    return 0;
}
