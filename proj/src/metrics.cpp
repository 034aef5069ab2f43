#include "dmfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dmfuse::metrics {

namespace {

using Grid = std::vector<double>;  // row-major h*w on the [0,255] scale

struct Sized {
    int h = 0, w = 0;
    Grid v;
    double at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    double& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
};

Sized to255(const GrayImage& img) {
    Sized s;
    s.h = img.height();
    s.w = img.width();
    s.v.resize(img.values().size());
    for (size_t i = 0; i < s.v.size(); ++i) s.v[i] = img.values()[i] * 255.0;
    return s;
}

void check_same(const GrayImage& a, const GrayImage& b, const GrayImage& f, const char* op) {
    if (a.height() != b.height() || a.width() != b.width() || a.height() != f.height() || a.width() != f.width())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

double mean_of(const Grid& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double variance_of(const Grid& v) {
    const double mu = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return acc / static_cast<double>(v.size());
}

/// Pearson correlation, population moments; 0 when either side is constant.
double pearson(const Grid& x, const Grid& y) {
    const double mx = mean_of(x), my = mean_of(y);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

/// Normalized 2-D Gaussian kernel, n x n.
std::vector<double> gaussian_kernel(int n, double sigma) {
    std::vector<double> k(static_cast<size_t>(n) * n);
    const double c = (n - 1) / 2.0;
    double sum = 0.0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double d2 = (y - c) * (y - c) + (x - c) * (x - c);
            k[static_cast<size_t>(y) * n + x] = std::exp(-d2 / (2.0 * sigma * sigma));
            sum += k[static_cast<size_t>(y) * n + x];
        }
    for (double& v : k) v /= sum;
    return k;
}

/// Valid-region correlation with an n x n kernel.
Sized filter_valid(const Sized& img, const std::vector<double>& kernel, int n) {
    Sized out;
    out.h = img.h - n + 1;
    out.w = img.w - n + 1;
    if (out.h <= 0 || out.w <= 0) {
        out.h = out.w = 0;
        return out;
    }
    out.v.assign(static_cast<size_t>(out.h) * out.w, 0.0);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) {
            double acc = 0.0;
            for (int ky = 0; ky < n; ++ky)
                for (int kx = 0; kx < n; ++kx) acc += kernel[static_cast<size_t>(ky) * n + kx] * img.at(y + ky, x + kx);
            out.at(y, x) = acc;
        }
    return out;
}

Sized elem_mul(const Sized& a, const Sized& b) {
    Sized out = a;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b.v[i];
    return out;
}

Sized decimate2(const Sized& img) {
    Sized out;
    out.h = (img.h + 1) / 2;
    out.w = (img.w + 1) / 2;
    out.v.resize(static_cast<size_t>(out.h) * out.w);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x) out.at(y, x) = img.at(2 * y, 2 * x);
    return out;
}

Sized avgpool2(const Sized& img) {
    Sized out;
    out.h = img.h / 2;
    out.w = img.w / 2;
    out.v.resize(static_cast<size_t>(out.h) * out.w);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            out.at(y, x) = 0.25 * (img.at(2 * y, 2 * x) + img.at(2 * y, 2 * x + 1) + img.at(2 * y + 1, 2 * x) +
                                   img.at(2 * y + 1, 2 * x + 1));
    return out;
}

struct SobelField {
    Grid gx, gy, mag;
};

SobelField sobel_components(const Sized& img) {
    SobelField out;
    out.gx.resize(img.v.size());
    out.gy.resize(img.v.size());
    out.mag.resize(img.v.size());
    auto px = [&](int y, int x) {
        y = std::clamp(y, 0, img.h - 1);
        x = std::clamp(x, 0, img.w - 1);
        return img.at(y, x);
    };
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            const double gx = -px(y - 1, x - 1) + px(y - 1, x + 1) - 2 * px(y, x - 1) + 2 * px(y, x + 1) -
                              px(y + 1, x - 1) + px(y + 1, x + 1);
            const double gy = -px(y - 1, x - 1) - 2 * px(y - 1, x) - px(y - 1, x + 1) + px(y + 1, x - 1) +
                              2 * px(y + 1, x) + px(y + 1, x + 1);
            const size_t i = static_cast<size_t>(y) * img.w + x;
            out.gx[i] = gx;
            out.gy[i] = gy;
            out.mag[i] = std::sqrt(gx * gx + gy * gy);
        }
    return out;
}

}  // namespace

const std::vector<std::string>& MetricReport::column_names() {
    static const std::vector<std::string> cols = {"SF", "SD", "AG", "Q_W", "SCD", "VIFF", "Q_AB/F", "MSSSIM", "FMI_WT"};
    return cols;
}

std::vector<double> MetricReport::values() const { return {sf, sd, ag, q_w, scd, viff, q_abf, msssim, fmi_wt}; }

double spatial_frequency(const GrayImage& f) {
    if (f.height() < 2 || f.width() < 2) throw std::invalid_argument("spatial_frequency: need at least 2x2");
    const Sized s = to255(f);
    double rf = 0.0, cf = 0.0;
    for (int y = 0; y < s.h; ++y)
        for (int x = 1; x < s.w; ++x) {
            const double d = s.at(y, x) - s.at(y, x - 1);
            rf += d * d;
        }
    for (int y = 1; y < s.h; ++y)
        for (int x = 0; x < s.w; ++x) {
            const double d = s.at(y, x) - s.at(y - 1, x);
            cf += d * d;
        }
    rf /= static_cast<double>(s.h) * (s.w - 1);
    cf /= static_cast<double>(s.h - 1) * s.w;
    return std::sqrt(rf + cf);
}

double standard_deviation(const GrayImage& f) { return std::sqrt(variance_of(to255(f).v)); }

double average_gradient(const GrayImage& f) {
    if (f.height() < 2 || f.width() < 2) throw std::invalid_argument("average_gradient: need at least 2x2");
    const Sized s = to255(f);
    double acc = 0.0;
    for (int y = 0; y < s.h - 1; ++y)
        for (int x = 0; x < s.w - 1; ++x) {
            const double dx = s.at(y, x + 1) - s.at(y, x);
            const double dy = s.at(y + 1, x) - s.at(y, x);
            acc += std::sqrt((dx * dx + dy * dy) / 2.0);
        }
    return acc / (static_cast<double>(s.h - 1) * (s.w - 1));
}

double q_w(const GrayImage& a, const GrayImage& b, const GrayImage& f) {
    check_same(a, b, f, "q_w");
    constexpr int kWin = 8;
    if (a.height() < kWin || a.width() < kWin) throw std::invalid_argument("q_w: image smaller than the 8x8 window");
    const Sized sa = to255(a), sb = to255(b), sf = to255(f);
    const double n = static_cast<double>(kWin) * kWin;

    auto window_stats = [&](const Sized& img, int y0, int x0, double& mu, double& var) {
        double s = 0.0, s2 = 0.0;
        for (int y = 0; y < kWin; ++y)
            for (int x = 0; x < kWin; ++x) {
                const double p = img.at(y0 + y, x0 + x);
                s += p;
                s2 += p * p;
            }
        mu = s / n;
        var = std::max(0.0, s2 / n - mu * mu);
    };
    auto window_cov = [&](const Sized& p, const Sized& q, int y0, int x0, double mup, double muq) {
        double s = 0.0;
        for (int y = 0; y < kWin; ++y)
            for (int x = 0; x < kWin; ++x) s += p.at(y0 + y, x0 + x) * q.at(y0 + y, x0 + x);
        return s / n - mup * muq;
    };
    auto uiqi = [](double mux, double muy, double varx, double vary, double cov) {
        const double den = (varx + vary) * (mux * mux + muy * muy);
        if (den == 0.0) return 0.0;
        return 4.0 * cov * mux * muy / den;
    };

    double weighted = 0.0, total_saliency = 0.0;
    for (int y0 = 0; y0 + kWin <= sa.h; ++y0)
        for (int x0 = 0; x0 + kWin <= sa.w; ++x0) {
            double mua, vara, mub, varb, muf, varf;
            window_stats(sa, y0, x0, mua, vara);
            window_stats(sb, y0, x0, mub, varb);
            window_stats(sf, y0, x0, muf, varf);
            const double sal = vara + varb;
            if (sal <= 0.0) continue;
            const double lam = vara / sal;
            const double qa = uiqi(mua, muf, vara, varf, window_cov(sa, sf, y0, x0, mua, muf));
            const double qb = uiqi(mub, muf, varb, varf, window_cov(sb, sf, y0, x0, mub, muf));
            const double cw = std::max(vara, varb);
            weighted += cw * (lam * qa + (1.0 - lam) * qb);
            total_saliency += cw;
        }
    if (total_saliency <= 0.0) return 0.0;
    return std::clamp(weighted / total_saliency, 0.0, 1.0);
}

double scd(const GrayImage& a, const GrayImage& b, const GrayImage& f) {
    check_same(a, b, f, "scd");
    const Sized sa = to255(a), sb = to255(b), sf = to255(f);
    Grid fmb(sa.v.size()), fma(sa.v.size());
    for (size_t i = 0; i < sa.v.size(); ++i) {
        fmb[i] = sf.v[i] - sb.v[i];
        fma[i] = sf.v[i] - sa.v[i];
    }
    return pearson(fmb, sa.v) + pearson(fma, sb.v);
}

namespace {

constexpr double kVifNoiseVar = 2.0;

/// Per-band VIF numerator/denominator sums for one (source, fused) pair.
void vif_band(const Sized& ref, const Sized& dist, const std::vector<double>& win, int n, double& num, double& den) {
    const Sized mu1 = filter_valid(ref, win, n);
    const Sized mu2 = filter_valid(dist, win, n);
    const Sized rr = filter_valid(elem_mul(ref, ref), win, n);
    const Sized dd = filter_valid(elem_mul(dist, dist), win, n);
    const Sized rd = filter_valid(elem_mul(ref, dist), win, n);
    for (size_t i = 0; i < mu1.v.size(); ++i) {
        double s1 = std::max(0.0, rr.v[i] - mu1.v[i] * mu1.v[i]);
        const double s2 = std::max(0.0, dd.v[i] - mu2.v[i] * mu2.v[i]);
        const double s12 = rd.v[i] - mu1.v[i] * mu2.v[i];
        double g = s12 / (s1 + 1e-10);
        double sv = s2 - g * s12;
        if (s1 < 1e-10) {
            g = 0.0;
            sv = s2;
            s1 = 0.0;
        }
        if (s2 < 1e-10) {
            g = 0.0;
            sv = 0.0;
        }
        if (g < 0.0) {
            sv = s2;
            g = 0.0;
        }
        if (sv < 1e-10) sv = 1e-10;
        num += std::log2(1.0 + g * g * s1 / (sv + kVifNoiseVar));
        den += std::log2(1.0 + s1 / kVifNoiseVar);
    }
}

}  // namespace

double viff(const GrayImage& a, const GrayImage& b, const GrayImage& f) {
    check_same(a, b, f, "viff");
    if (std::min(a.height(), a.width()) < 32) throw std::invalid_argument("viff: minimum dimension is 32");
    Sized sa = to255(a), sb = to255(b), sf = to255(f);
    double num = 0.0, den = 0.0;
    for (int scale = 1; scale <= 4; ++scale) {
        const int n = (1 << (5 - scale)) + 1;  // 17, 9, 5, 3
        const auto win = gaussian_kernel(n, n / 5.0);
        if (scale > 1) {
            sa = decimate2(filter_valid(sa, win, n));
            sb = decimate2(filter_valid(sb, win, n));
            sf = decimate2(filter_valid(sf, win, n));
        }
        if (sa.h < n || sa.w < n) break;  // band has no valid window
        vif_band(sa, sf, win, n, num, den);
        vif_band(sb, sf, win, n, num, den);
    }
    if (den <= 0.0) return 0.0;
    return num / den;
}

double q_abf(const GrayImage& a, const GrayImage& b, const GrayImage& f) {
    check_same(a, b, f, "q_abf");
    if (a.height() < 3 || a.width() < 3) throw std::invalid_argument("q_abf: need at least 3x3");
    const SobelField ea = sobel_components(to255(a));
    const SobelField eb = sobel_components(to255(b));
    const SobelField ef = sobel_components(to255(f));

    // canonical Xydeas-Petrovic sigmoid constants
    constexpr double kGammaG = 0.9994, kKappaG = -15.0, kSigmaG = 0.5;
    constexpr double kGammaA = 0.9879, kKappaA = -22.0, kSigmaA = 0.8;

    auto orientation = [](double gx, double gy) {
        if (gx == 0.0 && gy == 0.0) return 0.0;
        double al = std::atan2(gy, gx);
        if (al > M_PI / 2.0) al -= M_PI;
        if (al < -M_PI / 2.0) al += M_PI;
        return al;
    };
    auto preservation = [&](const SobelField& src, size_t i) {
        const double gs = src.mag[i], gf = ef.mag[i];
        double gq;
        if (gs > gf)
            gq = gs > 0.0 ? gf / gs : 0.0;
        else if (gf > gs)
            gq = gf > 0.0 ? gs / gf : 0.0;
        else
            gq = gs == 0.0 ? 0.0 : 1.0;
        const double da = std::abs(orientation(src.gx[i], src.gy[i]) - orientation(ef.gx[i], ef.gy[i]));
        const double aq = 1.0 - da / (M_PI / 2.0);
        const double qg = kGammaG / (1.0 + std::exp(kKappaG * (gq - kSigmaG)));
        const double qa = kGammaA / (1.0 + std::exp(kKappaA * (aq - kSigmaA)));
        return qg * qa;
    };

    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < ea.mag.size(); ++i) {
        num += preservation(ea, i) * ea.mag[i] + preservation(eb, i) * eb.mag[i];
        den += ea.mag[i] + eb.mag[i];
    }
    if (den <= 0.0) return 0.0;
    return std::clamp(num / den, 0.0, 1.0);
}

namespace {

constexpr double kSsimC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kSsimC2 = (0.03 * 255.0) * (0.03 * 255.0);

/// Gaussian-windowed luminance and contrast-structure means for one scale.
void ssim_scale_terms(const Sized& x, const Sized& y, double& lum, double& cs) {
    constexpr int kN = 11;
    static const std::vector<double> win = gaussian_kernel(kN, 1.5);
    const Sized mux = filter_valid(x, win, kN);
    const Sized muy = filter_valid(y, win, kN);
    const Sized xx = filter_valid(elem_mul(x, x), win, kN);
    const Sized yy = filter_valid(elem_mul(y, y), win, kN);
    const Sized xy = filter_valid(elem_mul(x, y), win, kN);
    double lsum = 0.0, csum = 0.0;
    for (size_t i = 0; i < mux.v.size(); ++i) {
        const double vx = std::max(0.0, xx.v[i] - mux.v[i] * mux.v[i]);
        const double vy = std::max(0.0, yy.v[i] - muy.v[i] * muy.v[i]);
        const double cxy = xy.v[i] - mux.v[i] * muy.v[i];
        lsum += (2.0 * mux.v[i] * muy.v[i] + kSsimC1) / (mux.v[i] * mux.v[i] + muy.v[i] * muy.v[i] + kSsimC1);
        csum += (2.0 * cxy + kSsimC2) / (vx + vy + kSsimC2);
    }
    lum = lsum / static_cast<double>(mux.v.size());
    cs = csum / static_cast<double>(mux.v.size());
}

}  // namespace

double msssim(const GrayImage& x, const GrayImage& f) {
    if (x.height() != f.height() || x.width() != f.width()) throw std::invalid_argument("msssim: shape mismatch");
    static const double kW[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    // shrink the scale count until the 11x11 window fits at the coarsest level
    int scales = 5;
    while (scales > 1 && (std::min(x.height(), x.width()) >> (scales - 1)) < 11) --scales;
    if ((std::min(x.height(), x.width())) < 11) throw std::invalid_argument("msssim: image smaller than the 11x11 window");
    double wsum = 0.0;
    for (int s = 0; s < scales; ++s) wsum += kW[s];

    Sized sx = to255(x), sf = to255(f);
    double value = 1.0;
    for (int s = 0; s < scales; ++s) {
        double lum = 0.0, cs = 0.0;
        ssim_scale_terms(sx, sf, lum, cs);
        const double expo = kW[s] / wsum;
        if (s == scales - 1)
            value *= std::pow(std::max(0.0, lum), expo) * std::pow(std::max(0.0, cs), expo);
        else
            value *= std::pow(std::max(0.0, cs), expo);
        if (s + 1 < scales) {
            sx = avgpool2(sx);
            sf = avgpool2(sf);
        }
    }
    return std::clamp(value, 0.0, 1.0);
}

namespace {

/// One-level orthonormal Haar detail coefficients (LH, HL, HH), flattened.
/// Odd dimensions are replicate-padded to even.
Grid haar_details(const Sized& in) {
    Sized img = in;
    if (img.h % 2 != 0 || img.w % 2 != 0) {
        Sized pad;
        pad.h = img.h + img.h % 2;
        pad.w = img.w + img.w % 2;
        pad.v.resize(static_cast<size_t>(pad.h) * pad.w);
        for (int y = 0; y < pad.h; ++y)
            for (int x = 0; x < pad.w; ++x) pad.at(y, x) = img.at(std::min(y, img.h - 1), std::min(x, img.w - 1));
        img = pad;
    }
    const int hh = img.h / 2, hw = img.w / 2;
    Grid out;
    out.reserve(static_cast<size_t>(hh) * hw * 3);
    for (int band = 0; band < 3; ++band)
        for (int y = 0; y < hh; ++y)
            for (int x = 0; x < hw; ++x) {
                const double a = img.at(2 * y, 2 * x), b = img.at(2 * y, 2 * x + 1);
                const double c = img.at(2 * y + 1, 2 * x), d = img.at(2 * y + 1, 2 * x + 1);
                double coef = 0.0;
                if (band == 0) coef = (a - b + c - d) / 2.0;       // LH
                else if (band == 1) coef = (a + b - c - d) / 2.0;  // HL
                else coef = (a - b - c + d) / 2.0;                 // HH
                out.push_back(coef);
            }
    return out;
}

constexpr int kFmiBins = 256;

std::vector<int> bin_indices(const Grid& v) {
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    std::vector<int> idx(v.size(), 0);
    if (*mx > *mn) {
        const double scale = kFmiBins / (*mx - *mn);
        for (size_t i = 0; i < v.size(); ++i)
            idx[i] = std::min(kFmiBins - 1, static_cast<int>((v[i] - *mn) * scale));
    }
    return idx;
}

double entropy_of(const std::vector<int>& idx) {
    std::vector<double> p(kFmiBins, 0.0);
    for (int i : idx) p[i] += 1.0;
    double h = 0.0;
    const double n = static_cast<double>(idx.size());
    for (double c : p)
        if (c > 0.0) h -= (c / n) * std::log2(c / n);
    return h;
}

double mutual_information(const std::vector<int>& xa, const std::vector<int>& xb) {
    std::vector<double> joint(static_cast<size_t>(kFmiBins) * kFmiBins, 0.0);
    for (size_t i = 0; i < xa.size(); ++i) joint[static_cast<size_t>(xa[i]) * kFmiBins + xb[i]] += 1.0;
    const double n = static_cast<double>(xa.size());
    return entropy_of(xa) + entropy_of(xb) -
           [&] {
               double h = 0.0;
               for (double c : joint)
                   if (c > 0.0) h -= (c / n) * std::log2(c / n);
               return h;
           }();
}

double normalized_mi(const Grid& f, const Grid& x) {
    const auto bf = bin_indices(f), bx = bin_indices(x);
    const double hf = entropy_of(bf), hx = entropy_of(bx);
    if (hf + hx <= 0.0) return 0.0;
    return mutual_information(bf, bx) / (hf + hx);
}

}  // namespace

double fmi_wt(const GrayImage& a, const GrayImage& b, const GrayImage& f) {
    check_same(a, b, f, "fmi_wt");
    const Grid fa = haar_details(to255(a));
    const Grid fb = haar_details(to255(b));
    const Grid ff = haar_details(to255(f));
    return normalized_mi(ff, fa) + normalized_mi(ff, fb);
}

MetricReport evaluate_pair(const std::string& pair_id, const AnyImage& a, const AnyImage& b, const AnyImage& f) {
    const GrayImage la = luma_of(a), lb = luma_of(b), lf = luma_of(f);
    MetricReport r;
    r.pair_id = pair_id;
    r.sf = spatial_frequency(lf);
    r.sd = standard_deviation(lf);
    r.ag = average_gradient(lf);
    r.q_w = q_w(la, lb, lf);
    r.scd = scd(la, lb, lf);
    r.viff = viff(la, lb, lf);
    r.q_abf = q_abf(la, lb, lf);
    r.msssim = 0.5 * (msssim(la, lf) + msssim(lb, lf));
    r.fmi_wt = fmi_wt(la, lb, lf);
    return r;
}

MetricReport mean_report(const std::vector<MetricReport>& rows) {
    if (rows.empty()) throw std::invalid_argument("mean_report: no rows");
    MetricReport m;
    m.pair_id = "mean";
    for (const auto& r : rows) {
        m.sf += r.sf;
        m.sd += r.sd;
        m.ag += r.ag;
        m.q_w += r.q_w;
        m.scd += r.scd;
        m.viff += r.viff;
        m.q_abf += r.q_abf;
        m.msssim += r.msssim;
        m.fmi_wt += r.fmi_wt;
    }
    const double n = static_cast<double>(rows.size());
    m.sf /= n;
    m.sd /= n;
    m.ag /= n;
    m.q_w /= n;
    m.scd /= n;
    m.viff /= n;
    m.q_abf /= n;
    m.msssim /= n;
    m.fmi_wt /= n;
    return m;
}

void write_report_csv(const std::string& path, const std::vector<MetricReport>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_report_csv: cannot open " + path);
    out << "pair";
    for (const auto& c : MetricReport::column_names()) out << ',' << c;
    out << '\n';
    out << std::setprecision(12);
    auto emit = [&](const MetricReport& r) {
        out << r.pair_id;
        for (double v : r.values()) out << ',' << v;
        out << '\n';
    };
    for (const auto& r : rows) emit(r);
    if (!rows.empty()) emit(mean_report(rows));
}

std::string format_report_table(const std::string& title, const std::vector<std::string>& row_labels,
                                const std::vector<MetricReport>& rows) {
    if (row_labels.size() != rows.size()) throw std::invalid_argument("format_report_table: label/row mismatch");
    std::ostringstream os;
    os << title << '\n';
    size_t label_w = 12;
    for (const auto& l : row_labels) label_w = std::max(label_w, l.size() + 2);
    os << std::left << std::setw(static_cast<int>(label_w)) << "Experiments";
    for (const auto& c : MetricReport::column_names()) os << std::right << std::setw(10) << c;
    os << '\n';

    std::vector<std::vector<double>> vals;
    for (const auto& r : rows) vals.push_back(r.values());
    const size_t ncols = MetricReport::column_names().size();
    std::vector<size_t> best(ncols, 0);
    for (size_t c = 0; c < ncols; ++c)
        for (size_t r = 1; r < vals.size(); ++r)
            if (vals[r][c] > vals[best[c]][c]) best[c] = r;

    for (size_t r = 0; r < vals.size(); ++r) {
        os << std::left << std::setw(static_cast<int>(label_w)) << row_labels[r];
        for (size_t c = 0; c < ncols; ++c) {
            std::ostringstream cell;
            cell << std::fixed << std::setprecision(3) << vals[r][c];
            if (rows.size() > 1 && best[c] == r) cell << '*';
            os << std::right << std::setw(10) << cell.str();
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace dmfuse::metrics
