#include "dmfuse/pipeline.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "dmfuse/digest.hpp"

namespace dmfuse::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCodeVersion = "0.1.0";

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

/// Runs fn(i) for i in [0,n) over at most thread_cap() workers; results
/// land in caller-indexed storage so reduction order stays deterministic.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
    const int workers = std::max(1, std::min(thread_cap(), n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (int wi = 0; wi < workers; ++wi) {
        pool.emplace_back([&, wi] {
            try {
                for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                errors[wi] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::vector<data::LoadedPair> load_split(const std::string& manifest_path, const std::string& split) {
    auto pairs = data::load_pairs(manifest_path);
    if (!split.empty()) {
        std::erase_if(pairs, [&](const data::LoadedPair& p) { return p.split != split; });
    }
    return pairs;
}

GrayImage pair_b_luma(const data::LoadedPair& p) { return luma_of(p.b); }

/// Fused output for one pair: gray for gray tasks; color tasks fuse luma
/// and reattach the functional image's chroma.
AnyImage fuse_pair(const Reconstructor& recon, const FusionNet& fusion, const FusionConfig& cfg,
                   const NoiseSchedule& schedule, const TimeStepSet& steps, const data::LoadedPair& pair) {
    const NoisePolicy noise{SplitMix64::derive(cfg.seed, stable_hash64(pair.pair_id))};
    const GrayImage fused_luma = forward_fuse(recon, fusion, pair.a, pair_b_luma(pair), steps, schedule, noise);
    if (const auto* color = std::get_if<ColorImage>(&pair.b)) {
        const YCbCrImage bcc = rgb_to_ycbcr(*color);
        return ycbcr_to_rgb(YCbCrImage(fused_luma, bcc.cb(), bcc.cr()));
    }
    return fused_luma;
}

void write_stage1_csv(const std::string& path, const std::vector<double>& losses) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "step,loss\n" << std::setprecision(12);
    for (size_t i = 0; i < losses.size(); ++i) out << i << ',' << losses[i] << '\n';
}

void write_stage2_csv(const std::string& path, const std::vector<losses::LossBreakdown>& curve) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "step,l_int,l_ssim,l_grad,total\n" << std::setprecision(12);
    for (size_t i = 0; i < curve.size(); ++i)
        out << i << ',' << curve[i].l_int << ',' << curve[i].l_ssim << ',' << curve[i].l_grad << ','
            << curve[i].total << '\n';
}

std::vector<GrayImage> luma_dataset(const std::vector<data::LoadedPair>& pairs) {
    std::vector<GrayImage> imgs;
    imgs.reserve(pairs.size() * 2);
    for (const auto& p : pairs) {
        imgs.push_back(p.a);
        imgs.push_back(pair_b_luma(p));
    }
    return imgs;
}

std::vector<TrainPair> train_pairs_of(const std::vector<data::LoadedPair>& pairs) {
    std::vector<TrainPair> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(TrainPair{p.a, pair_b_luma(p)});
    return out;
}

}  // namespace

RunManifest RunManifest::begin(const std::string& command, const FusionConfig& config) {
    RunManifest m;
    m.command = command;
    m.code_version = kCodeVersion;
    m.config_digest = config.digest();
    m.seed = config.seed;
    m.started = iso_now();
    return m;
}

void RunManifest::add_artifact(const std::string& path) { artifacts.emplace_back(path, sha256_file(path)); }

void RunManifest::finish_and_write(const std::string& out_dir) {
    finished = iso_now();
    json j;
    j["command"] = command;
    j["code_version"] = code_version;
    j["config_digest"] = config_digest;
    j["seed"] = seed;
    j["started"] = started;
    j["finished"] = finished;
    j["artifacts"] = json::array();
    for (const auto& [path, digest] : artifacts) j["artifacts"].push_back({{"path", path}, {"sha256", digest}});
    std::ofstream out(fs::path(out_dir) / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest.json in " + out_dir);
    out << j.dump(2) << '\n';
}

uint64_t stable_hash64(const std::string& s) {
    return std::stoull(sha256_hex(s).substr(0, 16), nullptr, 16);
}

int thread_cap() {
    if (const char* env = std::getenv("DMFUSE_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::min(hw == 0 ? 1u : hw, 4u));
}

void cmd_phantom(const FusionConfig& config, const std::string& out_dir) {
    config.validate();
    ensure_dir(out_dir);
    RunManifest manifest = RunManifest::begin("phantom", config);
    std::vector<data::PairEntry> entries;

    const struct {
        const char* task;
        data::PhantomTask kind;
    } tasks[] = {{"mri-ct", data::PhantomTask::StructuralDense},
                 {"mri-pet", data::PhantomTask::StructuralFunctional},
                 {"mri-spect", data::PhantomTask::StructuralFunctional}};

    for (const auto& t : tasks) {
        for (const std::string split : {"train", "test"}) {
            const int count = split == "train" ? config.train_pairs_per_task : config.test_pairs_per_task;
            ensure_dir((fs::path(out_dir) / t.task / split).string());
            for (int i = 0; i < count; ++i) {
                std::ostringstream id;
                id << t.task << '-' << split << '-' << std::setw(3) << std::setfill('0') << i;
                data::PhantomSpec spec;
                spec.seed = SplitMix64::derive(config.seed, stable_hash64(id.str()));
                spec.size = config.resolution;
                spec.task = t.kind;
                const data::PhantomPair pair = data::gen_phantom_pair(spec);

                const std::string rel_a = std::string(t.task) + "/" + split + "/" + id.str() + "_A.png";
                const std::string rel_b = std::string(t.task) + "/" + split + "/" + id.str() + "_B.png";
                const std::string abs_a = (fs::path(out_dir) / rel_a).string();
                const std::string abs_b = (fs::path(out_dir) / rel_b).string();
                write_png(abs_a, pair.a);
                if (const auto* color = std::get_if<ColorImage>(&pair.b))
                    write_png(abs_b, *color);
                else
                    write_png(abs_b, std::get<GrayImage>(pair.b));

                entries.push_back(data::PairEntry{id.str(), rel_a, rel_b, t.task, split, sha256_file(abs_a),
                                                  sha256_file(abs_b)});
                manifest.add_artifact(abs_a);
                manifest.add_artifact(abs_b);
            }
        }
    }
    const std::string manifest_tsv = (fs::path(out_dir) / "manifest.tsv").string();
    data::write_manifest(manifest_tsv, entries);
    manifest.add_artifact(manifest_tsv);
    manifest.finish_and_write(out_dir);
}

void cmd_train_recon(const FusionConfig& config, const std::string& out_dir) {
    config.validate();
    ensure_dir(out_dir);
    RunManifest manifest = RunManifest::begin("train-recon", config);

    const auto pairs = load_split((fs::path(config.data_root) / "manifest.tsv").string(), "train");
    if (pairs.empty()) throw std::runtime_error("train-recon: no training pairs in " + config.data_root);
    const auto dataset = luma_dataset(pairs);

    Reconstructor net(config.recon_arch(), SplitMix64::derive(config.seed, stable_hash64("recon-init")));
    Stage1Options opt;
    opt.steps = config.stage1_steps;
    opt.learning_rate = config.stage1_lr;
    opt.adam_beta1 = config.adam_beta1;
    opt.adam_beta2 = config.adam_beta2;
    opt.seed = SplitMix64::derive(config.seed, stable_hash64("stage1"));
    const auto curve = train_stage1(net, dataset, config.make_schedule(), opt);

    const std::string ckpt = (fs::path(out_dir) / "recon.ckpt").string();
    const std::string csv = (fs::path(out_dir) / "stage1_loss.csv").string();
    save_reconstructor(ckpt, net, config);
    write_stage1_csv(csv, curve);
    manifest.add_artifact(ckpt);
    manifest.add_artifact(csv);
    manifest.finish_and_write(out_dir);
}

void cmd_train_fusion(const FusionConfig& config, const std::string& recon_ckpt, const std::string& out_dir) {
    config.validate();
    ensure_dir(out_dir);
    RunManifest manifest = RunManifest::begin("train-fusion", config);

    const auto recon = load_reconstructor(recon_ckpt, config);
    const auto pairs = load_split((fs::path(config.data_root) / "manifest.tsv").string(), "train");
    if (pairs.empty()) throw std::runtime_error("train-fusion: no training pairs in " + config.data_root);

    FusionNet fusion(config.fusion_arch(), SplitMix64::derive(config.seed, stable_hash64("fusion-init")));
    Stage2Options opt;
    opt.steps = config.stage2_steps;
    opt.learning_rate = config.stage2_lr;
    opt.adam_beta1 = config.adam_beta1;
    opt.adam_beta2 = config.adam_beta2;
    opt.seed = SplitMix64::derive(config.seed, stable_hash64("stage2"));
    opt.alpha = config.alpha;
    opt.beta = config.beta;
    opt.patch_size = config.patch_size;
    opt.patch_stride = config.patch_stride;
    const auto curve = train_stage2(*recon, fusion, train_pairs_of(pairs), config.step_set(),
                                    config.make_schedule(), opt);

    const std::string ckpt = (fs::path(out_dir) / "fusion.ckpt").string();
    const std::string csv = (fs::path(out_dir) / "stage2_loss.csv").string();
    save_fusion(ckpt, fusion, config);
    write_stage2_csv(csv, curve);
    manifest.add_artifact(ckpt);
    manifest.add_artifact(csv);
    manifest.finish_and_write(out_dir);
}

void cmd_fuse(const FusionConfig& config, const std::string& recon_ckpt, const std::string& fusion_ckpt,
              const std::string& manifest_path, const std::string& split, const std::string& out_dir) {
    config.validate();
    ensure_dir(out_dir);
    RunManifest manifest = RunManifest::begin("fuse", config);

    const auto recon = load_reconstructor(recon_ckpt, config);
    const auto fusion = load_fusion(fusion_ckpt, config);
    const auto pairs = load_split(manifest_path, split);
    if (pairs.empty()) throw std::runtime_error("fuse: no pairs for split '" + split + "' in " + manifest_path);

    const NoiseSchedule schedule = config.make_schedule();
    const TimeStepSet steps = config.step_set();
    std::vector<std::string> outputs(pairs.size());
    parallel_for(static_cast<int>(pairs.size()), [&](int i) {
        const AnyImage fused = fuse_pair(*recon, *fusion, config, schedule, steps, pairs[i]);
        const std::string path = (fs::path(out_dir) / (pairs[i].pair_id + "_F.png")).string();
        if (const auto* color = std::get_if<ColorImage>(&fused))
            write_png(path, *color);
        else
            write_png(path, std::get<GrayImage>(fused));
        outputs[i] = path;
    });
    for (const auto& path : outputs) manifest.add_artifact(path);
    manifest.finish_and_write(out_dir);
}

void cmd_eval(const FusionConfig& config, const std::string& fused_dir, const std::string& manifest_path,
              const std::string& split, const std::string& out_dir) {
    config.validate();
    ensure_dir(out_dir);
    RunManifest manifest = RunManifest::begin("eval", config);

    const auto pairs = load_split(manifest_path, split);
    if (pairs.empty()) throw std::runtime_error("eval: no pairs for split '" + split + "' in " + manifest_path);

    std::vector<std::string> missing;
    for (const auto& p : pairs) {
        const fs::path f = fs::path(fused_dir) / (p.pair_id + "_F.png");
        if (!fs::exists(f)) missing.push_back(f.string());
    }
    if (!missing.empty()) {
        std::string msg = "eval: unmatched pairs, missing fused files:";
        for (const auto& m : missing) msg += "\n  " + m;
        throw std::runtime_error(msg);
    }

    std::vector<metrics::MetricReport> rows(pairs.size());
    parallel_for(static_cast<int>(pairs.size()), [&](int i) {
        const AnyImage fused = read_png((fs::path(fused_dir) / (pairs[i].pair_id + "_F.png")).string());
        rows[i] = metrics::evaluate_pair(pairs[i].pair_id, pairs[i].a, pairs[i].b, fused);
    });

    std::vector<std::string> tasks;
    for (const auto& p : pairs)
        if (std::find(tasks.begin(), tasks.end(), p.task) == tasks.end()) tasks.push_back(p.task);

    std::vector<std::string> labels;
    std::vector<metrics::MetricReport> table_rows;
    for (const auto& task : tasks) {
        std::vector<metrics::MetricReport> task_rows;
        for (size_t i = 0; i < pairs.size(); ++i)
            if (pairs[i].task == task) task_rows.push_back(rows[i]);
        const std::string csv = (fs::path(out_dir) / ("metrics_" + task + ".csv")).string();
        metrics::write_report_csv(csv, task_rows);
        manifest.add_artifact(csv);
        labels.push_back(task);
        table_rows.push_back(metrics::mean_report(task_rows));
    }
    const std::string all_csv = (fs::path(out_dir) / "metrics_all.csv").string();
    metrics::write_report_csv(all_csv, rows);
    manifest.add_artifact(all_csv);
    labels.push_back("all");
    table_rows.push_back(metrics::mean_report(rows));

    const std::string table = metrics::format_report_table("Objective evaluation (mean per task)", labels, table_rows);
    const std::string report = (fs::path(out_dir) / "report.txt").string();
    {
        std::ofstream out(report);
        out << table;
    }
    std::cout << table;
    manifest.add_artifact(report);
    manifest.finish_and_write(out_dir);
}

AblateMode ablate_mode_from_name(const std::string& name) {
    if (name == "loss-weights") return AblateMode::LossWeights;
    if (name == "time-steps") return AblateMode::TimeSteps;
    if (name == "no-diffusion") return AblateMode::NoDiffusion;
    if (name == "no-amff") return AblateMode::NoAmff;
    if (name == "no-msff") return AblateMode::NoMsff;
    throw std::invalid_argument("unknown ablation mode: " + name +
                                " (expected loss-weights|time-steps|no-diffusion|no-amff|no-msff)");
}

std::vector<std::string> ablate_mode_names() {
    return {"loss-weights", "time-steps", "no-diffusion", "no-amff", "no-msff"};
}

namespace {

struct AblateContext {
    FusionConfig cfg;
    NoiseSchedule schedule;
    std::vector<data::LoadedPair> train_pairs, test_pairs;
    std::vector<TrainPair> train_set;
    std::vector<GrayImage> luma_set;
};

AblateContext ablate_setup(const FusionConfig& config, const std::string& out_dir) {
    AblateContext ctx{config, config.make_schedule(), {}, {}, {}, {}};
    FusionConfig data_cfg = config;
    data_cfg.train_pairs_per_task = config.ablate_pairs_per_task;
    data_cfg.test_pairs_per_task = config.ablate_pairs_per_task;
    const std::string data_dir = (fs::path(out_dir) / "data").string();
    cmd_phantom(data_cfg, data_dir);
    const std::string manifest = (fs::path(data_dir) / "manifest.tsv").string();
    ctx.train_pairs = load_split(manifest, "train");
    ctx.test_pairs = load_split(manifest, "test");
    ctx.train_set = train_pairs_of(ctx.train_pairs);
    ctx.luma_set = luma_dataset(ctx.train_pairs);
    return ctx;
}

Reconstructor train_ablate_recon(const AblateContext& ctx, bool use_diffusion) {
    Reconstructor net(ctx.cfg.recon_arch(), SplitMix64::derive(ctx.cfg.seed, stable_hash64("ablate-recon")));
    Stage1Options opt;
    opt.steps = ctx.cfg.ablate_stage1_steps;
    opt.learning_rate = ctx.cfg.stage1_lr;
    opt.adam_beta1 = ctx.cfg.adam_beta1;
    opt.adam_beta2 = ctx.cfg.adam_beta2;
    opt.seed = SplitMix64::derive(ctx.cfg.seed, stable_hash64("ablate-stage1"));
    opt.use_diffusion = use_diffusion;
    train_stage1(net, ctx.luma_set, ctx.schedule, opt);
    return net;
}

struct VariantSpec {
    std::string label;
    std::vector<int> steps = {};     // empty: use config steps
    double alpha = -1.0, beta = -1.0, grad_weight = 1.0;  // negative: config default
    bool use_amff = true, use_msff = true;
};

FusionNet train_ablate_variant(const AblateContext& ctx, const Reconstructor& recon, const VariantSpec& v) {
    const std::vector<int> steps = v.steps.empty() ? ctx.cfg.time_steps : v.steps;
    FusionArch arch = FusionArch::from_recon(ctx.cfg.recon_arch(), static_cast<int>(steps.size()));
    arch.shuffle_groups = ctx.cfg.shuffle_groups;
    arch.ca_reduction = ctx.cfg.ca_reduction;
    arch.use_amff = v.use_amff;
    arch.use_msff = v.use_msff;
    FusionNet fusion(arch, SplitMix64::derive(ctx.cfg.seed, stable_hash64("ablate-fusion-" + v.label)));
    Stage2Options opt;
    opt.steps = ctx.cfg.ablate_stage2_steps;
    opt.learning_rate = ctx.cfg.stage2_lr;
    opt.adam_beta1 = ctx.cfg.adam_beta1;
    opt.adam_beta2 = ctx.cfg.adam_beta2;
    opt.seed = SplitMix64::derive(ctx.cfg.seed, stable_hash64("ablate-stage2-" + v.label));
    opt.alpha = v.alpha < 0.0 ? ctx.cfg.alpha : v.alpha;
    opt.beta = v.beta < 0.0 ? ctx.cfg.beta : v.beta;
    opt.grad_weight = v.grad_weight;
    opt.patch_size = ctx.cfg.patch_size;
    opt.patch_stride = ctx.cfg.patch_stride;
    train_stage2(recon, fusion, ctx.train_set, TimeStepSet(steps), ctx.schedule, opt);
    return fusion;
}

std::vector<metrics::MetricReport> eval_variant(const AblateContext& ctx, const Reconstructor& recon,
                                                const FusionNet& fusion, const std::vector<int>& steps_override) {
    const TimeStepSet steps(steps_override.empty() ? ctx.cfg.time_steps : steps_override);
    std::vector<metrics::MetricReport> rows(ctx.test_pairs.size());
    parallel_for(static_cast<int>(ctx.test_pairs.size()), [&](int i) {
        const auto& pair = ctx.test_pairs[i];
        const AnyImage fused = fuse_pair(recon, fusion, ctx.cfg, ctx.schedule, steps, pair);
        rows[i] = metrics::evaluate_pair(pair.pair_id, pair.a, pair.b, fused);
    });
    return rows;
}

metrics::MetricReport pooled_mean(const std::vector<metrics::MetricReport>& rows) { return metrics::mean_report(rows); }

void emit_ablation(const std::string& out_dir, const std::string& mode, const std::string& title,
                   const std::vector<std::string>& labels, const std::vector<metrics::MetricReport>& rows,
                   RunManifest& manifest) {
    std::vector<metrics::MetricReport> labeled = rows;
    for (size_t i = 0; i < labeled.size(); ++i) labeled[i].pair_id = labels[i];
    const std::string csv = (fs::path(out_dir) / ("ablation_" + mode + ".csv")).string();
    metrics::write_report_csv(csv, labeled);
    const std::string table = metrics::format_report_table(title, labels, rows);
    const std::string txt = (fs::path(out_dir) / ("ablation_" + mode + ".txt")).string();
    {
        std::ofstream out(txt);
        out << table;
    }
    std::cout << table;
    manifest.add_artifact(csv);
    manifest.add_artifact(txt);
}

/// Per-task mean rows for two variants, in paper row order.
void per_task_tables(const AblateContext& ctx, const std::string& out_dir, const std::string& mode,
                     const std::string& variant_label, const std::vector<metrics::MetricReport>& variant_rows,
                     const std::vector<metrics::MetricReport>& proposed_rows, RunManifest& manifest) {
    std::vector<std::string> tasks;
    for (const auto& p : ctx.test_pairs)
        if (std::find(tasks.begin(), tasks.end(), p.task) == tasks.end()) tasks.push_back(p.task);
    std::vector<std::string> labels;
    std::vector<metrics::MetricReport> rows;
    for (const auto& task : tasks) {
        std::vector<metrics::MetricReport> va, pr;
        for (size_t i = 0; i < ctx.test_pairs.size(); ++i) {
            if (ctx.test_pairs[i].task != task) continue;
            va.push_back(variant_rows[i]);
            pr.push_back(proposed_rows[i]);
        }
        labels.push_back(task + " " + variant_label);
        rows.push_back(metrics::mean_report(va));
        labels.push_back(task + " Proposed");
        rows.push_back(metrics::mean_report(pr));
    }
    emit_ablation(out_dir, mode, "Objective evaluation: " + variant_label + " vs Proposed (per task)", labels, rows,
                  manifest);
}

}  // namespace

void cmd_ablate(const FusionConfig& config, AblateMode mode, const std::string& out_dir) {
    config.validate();
    ensure_dir(out_dir);
    RunManifest manifest = RunManifest::begin("ablate", config);
    AblateContext ctx = ablate_setup(config, out_dir);

    switch (mode) {
        case AblateMode::LossWeights: {
            const std::vector<VariantSpec> variants = {
                {"Only L_int", {}, 1.0, 0.0, 0.0},  {"Only L_ssim", {}, 0.0, 1.0, 0.0},
                {"L_int+L_ssim", {}, 1.0, 1.0, 0.0}, {"a=1.0, b=1.0", {}, 1.0, 1.0, 1.0},
                {"a=1.5, b=1.0", {}, 1.5, 1.0, 1.0}, {"a=2.0, b=1.0", {}, 2.0, 1.0, 1.0},
                {"a=1.5, b=0.5", {}, 1.5, 0.5, 1.0}};
            const Reconstructor recon = train_ablate_recon(ctx, true);
            std::vector<std::string> labels;
            std::vector<metrics::MetricReport> rows;
            for (const auto& v : variants) {
                const FusionNet fusion = train_ablate_variant(ctx, recon, v);
                rows.push_back(pooled_mean(eval_variant(ctx, recon, fusion, {})));
                labels.push_back(v.label);
            }
            emit_ablation(out_dir, "loss-weights", "Objective evaluation for loss weights (mean over tasks)", labels,
                          rows, manifest);
            break;
        }
        case AblateMode::TimeSteps: {
            const std::vector<std::vector<int>> sets = {{5}, {5, 10}, {5, 10, 20}};
            const Reconstructor recon = train_ablate_recon(ctx, true);
            std::vector<std::string> labels;
            std::vector<metrics::MetricReport> rows;
            for (const auto& s : sets) {
                VariantSpec v;
                v.steps = s;
                std::ostringstream label;
                label << '(';
                for (size_t i = 0; i < s.size(); ++i) label << (i ? ", " : "") << s[i];
                label << ')';
                v.label = label.str();
                const FusionNet fusion = train_ablate_variant(ctx, recon, v);
                rows.push_back(pooled_mean(eval_variant(ctx, recon, fusion, s)));
                labels.push_back(v.label);
            }
            emit_ablation(out_dir, "time-steps", "Objective evaluation for time-step combinations (mean over tasks)",
                          labels, rows, manifest);
            break;
        }
        case AblateMode::NoDiffusion: {
            const Reconstructor recon_plain = train_ablate_recon(ctx, false);
            VariantSpec v0;
            v0.label = "w/o Dif.";
            v0.steps = {0};
            const FusionNet fusion_plain = train_ablate_variant(ctx, recon_plain, v0);
            const auto rows_plain = eval_variant(ctx, recon_plain, fusion_plain, {0});

            const Reconstructor recon_std = train_ablate_recon(ctx, true);
            VariantSpec v1;
            v1.label = "Proposed";
            const FusionNet fusion_std = train_ablate_variant(ctx, recon_std, v1);
            const auto rows_std = eval_variant(ctx, recon_std, fusion_std, {});
            per_task_tables(ctx, out_dir, "no-diffusion", "w/o Dif.", rows_plain, rows_std, manifest);
            break;
        }
        case AblateMode::NoAmff:
        case AblateMode::NoMsff: {
            const bool amff = mode == AblateMode::NoMsff;  // the other module stays on
            const std::string label = mode == AblateMode::NoAmff ? "w/o AMFF." : "w/o MSFF.";
            const std::string mode_name = mode == AblateMode::NoAmff ? "no-amff" : "no-msff";
            const Reconstructor recon = train_ablate_recon(ctx, true);
            VariantSpec v0;
            v0.label = label;
            v0.use_amff = amff;
            v0.use_msff = !amff;
            const FusionNet fusion_ablated = train_ablate_variant(ctx, recon, v0);
            const auto rows_ablated = eval_variant(ctx, recon, fusion_ablated, {});
            VariantSpec v1;
            v1.label = "Proposed";
            const FusionNet fusion_full = train_ablate_variant(ctx, recon, v1);
            const auto rows_full = eval_variant(ctx, recon, fusion_full, {});
            per_task_tables(ctx, out_dir, mode_name, label, rows_ablated, rows_full, manifest);
            break;
        }
    }
    manifest.finish_and_write(out_dir);
}

}  // namespace dmfuse::pipeline
