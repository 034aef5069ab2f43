#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dmfuse/checkpoint.hpp"
#include "dmfuse/data.hpp"
#include "dmfuse/metrics.hpp"
#include "dmfuse/pipeline.hpp"

namespace py = pybind11;
using namespace dmfuse;

namespace {

using Array2d = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Array3d = py::array_t<double, py::array::c_style | py::array::forcecast>;

RawField field_from(const Array2d& arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    RawField f(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    std::copy(arr.data(), arr.data() + arr.size(), f.v.begin());
    return f;
}

py::array_t<double> field_to(const RawField& f) {
    py::array_t<double> out({f.height, f.width});
    std::copy(f.v.begin(), f.v.end(), out.mutable_data());
    return out;
}

GrayImage gray_from(const Array2d& arr) { return GrayImage(field_from(arr)); }

py::array_t<double> gray_to(const GrayImage& img) { return field_to(img.field()); }

ColorImage color_from(const Array3d& arr) {
    if (arr.ndim() != 3 || arr.shape(2) != 3) throw std::invalid_argument("expected an (h, w, 3) array");
    const int h = static_cast<int>(arr.shape(0)), w = static_cast<int>(arr.shape(1));
    RawField r(h, w), g(h, w), b(h, w);
    const double* p = arr.data();
    for (int i = 0; i < h * w; ++i) {
        r.v[i] = p[3 * i];
        g.v[i] = p[3 * i + 1];
        b.v[i] = p[3 * i + 2];
    }
    return ColorImage(std::move(r), std::move(g), std::move(b));
}

py::array_t<double> color_to(const ColorImage& img) {
    const int h = img.height(), w = img.width();
    py::array_t<double> out({h, w, 3});
    double* p = out.mutable_data();
    for (int i = 0; i < h * w; ++i) {
        p[3 * i] = img.red().v[i];
        p[3 * i + 1] = img.green().v[i];
        p[3 * i + 2] = img.blue().v[i];
    }
    return out;
}

py::array_t<double> tensor_to(const Tensor& t) {
    py::array_t<double> out({t.c, t.h, t.w});
    std::copy(t.v.begin(), t.v.end(), out.mutable_data());
    return out;
}

py::dict report_to(const metrics::MetricReport& r) {
    py::dict d;
    d["pair_id"] = r.pair_id;
    d["sf"] = r.sf;
    d["sd"] = r.sd;
    d["ag"] = r.ag;
    d["q_w"] = r.q_w;
    d["scd"] = r.scd;
    d["viff"] = r.viff;
    d["q_abf"] = r.q_abf;
    d["msssim"] = r.msssim;
    d["fmi_wt"] = r.fmi_wt;
    return d;
}

py::dict breakdown_to(const losses::LossBreakdown& b) {
    py::dict d;
    d["l_int"] = b.l_int;
    d["l_ssim"] = b.l_ssim;
    d["l_grad"] = b.l_grad;
    d["total"] = b.total;
    d["alpha"] = b.alpha;
    d["beta"] = b.beta;
    return d;
}

AnyImage any_from(const py::array& arr) {
    if (arr.ndim() == 2) return gray_from(arr);
    return color_from(arr);
}

}  // namespace

PYBIND11_MODULE(_dmfuse, m) {
    m.doc() = "diffusion-trained multimodal image fusion core";

    // ---- imaging ----
    m.def("rgb_to_ycbcr", [](const Array3d& rgb) {
        const YCbCrImage ycc = rgb_to_ycbcr(color_from(rgb));
        return py::make_tuple(gray_to(ycc.y()), field_to(ycc.cb()), field_to(ycc.cr()));
    });
    m.def("ycbcr_to_rgb", [](const Array2d& y, const Array2d& cb, const Array2d& cr) {
        return color_to(ycbcr_to_rgb(YCbCrImage(gray_from(y), field_from(cb), field_from(cr))));
    });
    m.def("sobel_gradient", [](const Array2d& img) { return field_to(sobel_gradient(field_from(img))); });
    m.def("local_std", [](const Array2d& img, int patch_size, int stride) {
        return field_to(local_std(field_from(img), patch_size, stride));
    });

    // ---- diffusion ----
    py::class_<NoiseSchedule>(m, "NoiseSchedule")
        .def_readonly("T", &NoiseSchedule::T)
        .def_readonly("alphas", &NoiseSchedule::alphas)
        .def_readonly("alpha_bars", &NoiseSchedule::alpha_bars)
        .def("alpha", &NoiseSchedule::alpha)
        .def("alpha_bar", &NoiseSchedule::alpha_bar);
    m.def("make_linear_schedule", &make_linear_schedule, py::arg("T"), py::arg("beta_start"), py::arg("beta_end"));
    m.def("forward_step", [](const Array2d& prev, int t, const NoiseSchedule& s, const Array2d& noise) {
        return field_to(forward_step(field_from(prev), t, s, field_from(noise)));
    });
    m.def("forward_jump", [](const Array2d& clean, int t, const NoiseSchedule& s, const Array2d& noise) {
        return field_to(forward_jump(field_from(clean), t, s, field_from(noise)));
    });
    m.def("stage1_loss", [](const Array2d& pred, const Array2d& truth) {
        return stage1_loss(field_from(pred), field_from(truth));
    });
    m.def("gaussian_field", [](int h, int w, uint64_t seed) { return field_to(gaussian_field(h, w, seed)); });

    // ---- losses ----
    m.def("intensity_loss", [](const Array2d& f, const Array2d& a, const Array2d& b) {
        return losses::intensity_loss(gray_from(f), gray_from(a), gray_from(b));
    });
    m.def("ssim_index", [](const Array2d& x, const Array2d& y) {
        return losses::ssim_index(field_from(x), field_from(y));
    });
    m.def("ssim_std_loss", [](const Array2d& f, const Array2d& a, const Array2d& b, int patch, int stride) {
        return losses::ssim_std_loss(gray_from(f), gray_from(a), gray_from(b), patch, stride);
    });
    m.def("gradient_loss", [](const Array2d& f, const Array2d& a, const Array2d& b) {
        return losses::gradient_loss(gray_from(f), gray_from(a), gray_from(b));
    });
    m.def("total_loss", [](const Array2d& f, const Array2d& a, const Array2d& b, double alpha, double beta,
                           int patch, int stride) {
        return breakdown_to(losses::total_loss(gray_from(f), gray_from(a), gray_from(b), alpha, beta, patch, stride));
    });

    // ---- metrics ----
    m.def("spatial_frequency", [](const Array2d& f) { return metrics::spatial_frequency(gray_from(f)); });
    m.def("standard_deviation", [](const Array2d& f) { return metrics::standard_deviation(gray_from(f)); });
    m.def("average_gradient", [](const Array2d& f) { return metrics::average_gradient(gray_from(f)); });
    m.def("q_w", [](const Array2d& a, const Array2d& b, const Array2d& f) {
        return metrics::q_w(gray_from(a), gray_from(b), gray_from(f));
    });
    m.def("scd", [](const Array2d& a, const Array2d& b, const Array2d& f) {
        return metrics::scd(gray_from(a), gray_from(b), gray_from(f));
    });
    m.def("viff", [](const Array2d& a, const Array2d& b, const Array2d& f) {
        return metrics::viff(gray_from(a), gray_from(b), gray_from(f));
    });
    m.def("q_abf", [](const Array2d& a, const Array2d& b, const Array2d& f) {
        return metrics::q_abf(gray_from(a), gray_from(b), gray_from(f));
    });
    m.def("msssim", [](const Array2d& x, const Array2d& f) { return metrics::msssim(gray_from(x), gray_from(f)); });
    m.def("fmi_wt", [](const Array2d& a, const Array2d& b, const Array2d& f) {
        return metrics::fmi_wt(gray_from(a), gray_from(b), gray_from(f));
    });
    m.def("evaluate_pair", [](const std::string& pair_id, const py::array& a, const py::array& b, const py::array& f) {
        return report_to(metrics::evaluate_pair(pair_id, any_from(a), any_from(b), any_from(f)));
    });

    // ---- data ----
    m.def(
        "gen_phantom_pair",
        [](uint64_t seed, int size, const std::string& task) {
            data::PhantomSpec spec;
            spec.seed = seed;
            spec.size = size;
            spec.task = data::task_from_name(task);
            const data::PhantomPair pair = data::gen_phantom_pair(spec);
            if (const auto* color = std::get_if<ColorImage>(&pair.b))
                return py::make_tuple(gray_to(pair.a), color_to(*color));
            return py::make_tuple(gray_to(pair.a), gray_to(std::get<GrayImage>(pair.b)));
        },
        py::arg("seed"), py::arg("size") = 64, py::arg("task") = "structural-dense");

    // ---- config ----
    py::class_<FusionConfig>(m, "FusionConfig")
        .def(py::init<>())
        .def_static("parse", &FusionConfig::parse)
        .def_static("load", &FusionConfig::load)
        .def("serialize", &FusionConfig::serialize)
        .def("digest", &FusionConfig::digest)
        .def_readwrite("resolution", &FusionConfig::resolution)
        .def_readwrite("base_width", &FusionConfig::base_width)
        .def_readwrite("time_embed_dim", &FusionConfig::time_embed_dim)
        .def_readwrite("schedule_T", &FusionConfig::schedule_T)
        .def_readwrite("time_steps", &FusionConfig::time_steps)
        .def_readwrite("alpha", &FusionConfig::alpha)
        .def_readwrite("beta", &FusionConfig::beta)
        .def_readwrite("stage1_steps", &FusionConfig::stage1_steps)
        .def_readwrite("stage2_steps", &FusionConfig::stage2_steps)
        .def_readwrite("stage1_lr", &FusionConfig::stage1_lr)
        .def_readwrite("stage2_lr", &FusionConfig::stage2_lr)
        .def_readwrite("seed", &FusionConfig::seed)
        .def_readwrite("data_root", &FusionConfig::data_root)
        .def_readwrite("train_pairs_per_task", &FusionConfig::train_pairs_per_task)
        .def_readwrite("test_pairs_per_task", &FusionConfig::test_pairs_per_task);

    // ---- networks ----
    py::class_<ReconArch>(m, "ReconArch")
        .def(py::init<>())
        .def_readwrite("resolution", &ReconArch::resolution)
        .def_readwrite("base_width", &ReconArch::base_width)
        .def_readwrite("time_embed_dim", &ReconArch::time_embed_dim)
        .def("level_channels", &ReconArch::level_channels)
        .def("level_size", &ReconArch::level_size);

    py::class_<Reconstructor>(m, "Reconstructor")
        .def(py::init<const ReconArch&, uint64_t>(), py::arg("arch"), py::arg("seed"))
        .def_property_readonly("seed", &Reconstructor::seed)
        .def_property_readonly("parameter_count",
                               [](const Reconstructor& r) { return r.params().parameter_count(); })
        .def("predict_previous",
             [](const Reconstructor& r, const Array2d& noisy, int t) {
                 return field_to(r.predict_previous(field_from(noisy), t));
             })
        .def("extract_features", [](const Reconstructor& r, const Array2d& noisy, int t) {
            const FeaturePyramid pyr = r.extract_features(field_from(noisy), t);
            py::list out;
            for (const auto& level : pyr.levels) out.append(tensor_to(level));
            return out;
        });

    m.def(
        "train_stage1",
        [](Reconstructor& net, const std::vector<Array2d>& dataset, const NoiseSchedule& schedule, int steps,
           double lr, uint64_t seed, bool use_diffusion) {
            std::vector<GrayImage> imgs;
            imgs.reserve(dataset.size());
            for (const auto& a : dataset) imgs.push_back(gray_from(a));
            Stage1Options opt;
            opt.steps = steps;
            opt.learning_rate = lr;
            opt.seed = seed;
            opt.use_diffusion = use_diffusion;
            return train_stage1(net, imgs, schedule, opt);
        },
        py::arg("net"), py::arg("dataset"), py::arg("schedule"), py::arg("steps"), py::arg("lr") = 1e-4,
        py::arg("seed") = 0, py::arg("use_diffusion") = true);

    py::class_<FusionArch>(m, "FusionArch")
        .def(py::init<>())
        .def_static("from_recon", &FusionArch::from_recon)
        .def_readwrite("n_steps", &FusionArch::n_steps)
        .def_readwrite("use_amff", &FusionArch::use_amff)
        .def_readwrite("use_msff", &FusionArch::use_msff);

    py::class_<FusionNet>(m, "FusionNet")
        .def(py::init<const FusionArch&, uint64_t>(), py::arg("arch"), py::arg("seed"))
        .def_property_readonly("seed", &FusionNet::seed)
        .def_property_readonly("parameter_count", [](const FusionNet& f) { return f.params().parameter_count(); });

    m.def(
        "forward_fuse",
        [](const Reconstructor& recon, const FusionNet& fusion, const Array2d& ia, const Array2d& ib_luma,
           const std::vector<int>& steps, const NoiseSchedule& schedule, uint64_t noise_seed) {
            return gray_to(forward_fuse(recon, fusion, gray_from(ia), gray_from(ib_luma), TimeStepSet(steps),
                                        schedule, NoisePolicy{noise_seed}));
        },
        py::arg("recon"), py::arg("fusion"), py::arg("ia"), py::arg("ib_luma"), py::arg("steps"),
        py::arg("schedule"), py::arg("noise_seed") = 0);

    m.def(
        "train_stage2",
        [](const Reconstructor& recon, FusionNet& fusion, const std::vector<std::pair<Array2d, Array2d>>& pairs,
           const std::vector<int>& steps, const NoiseSchedule& schedule, int train_steps, double lr, double alpha,
           double beta, int patch_size, int patch_stride, uint64_t seed) {
            std::vector<TrainPair> tp;
            tp.reserve(pairs.size());
            for (const auto& [a, b] : pairs) tp.push_back(TrainPair{gray_from(a), gray_from(b)});
            Stage2Options opt;
            opt.steps = train_steps;
            opt.learning_rate = lr;
            opt.alpha = alpha;
            opt.beta = beta;
            opt.patch_size = patch_size;
            opt.patch_stride = patch_stride;
            opt.seed = seed;
            const auto curve = train_stage2(recon, fusion, tp, TimeStepSet(steps), schedule, opt);
            py::list out;
            for (const auto& b : curve) out.append(breakdown_to(b));
            return out;
        },
        py::arg("recon"), py::arg("fusion"), py::arg("pairs"), py::arg("steps"), py::arg("schedule"),
        py::arg("train_steps"), py::arg("lr") = 1e-4, py::arg("alpha") = 1.5, py::arg("beta") = 0.5,
        py::arg("patch_size") = 16, py::arg("patch_stride") = 16, py::arg("seed") = 0);

    // ---- checkpoints & png ----
    m.def("save_reconstructor", &save_reconstructor);
    m.def("load_reconstructor",
          [](const std::string& path, const FusionConfig& cfg) { return load_reconstructor(path, cfg); });
    m.def("save_fusion", &save_fusion);
    m.def("load_fusion", [](const std::string& path, const FusionConfig& cfg) { return load_fusion(path, cfg); });
    m.def("write_png_gray", [](const std::string& path, const Array2d& img) { write_png(path, gray_from(img)); });
    m.def("write_png_rgb", [](const std::string& path, const Array3d& img) { write_png(path, color_from(img)); });
    m.def("read_png", [](const std::string& path) -> py::object {
        const AnyImage img = read_png(path);
        if (const auto* g = std::get_if<GrayImage>(&img)) return gray_to(*g);
        return color_to(std::get<ColorImage>(img));
    });

    // ---- pipeline commands ----
    m.def("cmd_phantom", &pipeline::cmd_phantom);
    m.def("cmd_train_recon", &pipeline::cmd_train_recon);
    m.def("cmd_train_fusion", &pipeline::cmd_train_fusion);
    m.def("cmd_fuse", &pipeline::cmd_fuse);
    m.def("cmd_eval", &pipeline::cmd_eval);
    m.def("cmd_ablate", [](const FusionConfig& cfg, const std::string& mode, const std::string& out_dir) {
        pipeline::cmd_ablate(cfg, pipeline::ablate_mode_from_name(mode), out_dir);
    });
}
