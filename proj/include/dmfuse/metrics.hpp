#pragma once

#include <string>
#include <vector>

#include "dmfuse/image.hpp"
#include "dmfuse/png_io.hpp"

namespace dmfuse::metrics {

/// The nine fusion-quality indicators for one image pair. Every metric
/// operates on the [0,255] scale so magnitudes line up with the fusion
/// literature.
struct MetricReport {
    std::string pair_id;
    double sf = 0.0;
    double sd = 0.0;
    double ag = 0.0;
    double q_w = 0.0;
    double scd = 0.0;
    double viff = 0.0;
    double q_abf = 0.0;
    double msssim = 0.0;
    double fmi_wt = 0.0;

    static const std::vector<std::string>& column_names();  // paper column order
    std::vector<double> values() const;
};

/// sqrt(RF^2 + CF^2); mean-square first differences normalized by the
/// number of differences.
double spatial_frequency(const GrayImage& f);

/// Population standard deviation.
double standard_deviation(const GrayImage& f);

/// Mean over interior pixels of sqrt((dx^2 + dy^2) / 2), forward differences.
double average_gradient(const GrayImage& f);

/// Piella's weighted fusion quality Q_W: 8x8 sliding windows, local
/// variance saliency, UIQI similarity. Clamped into [0,1]; all-constant
/// inputs return 0.
double q_w(const GrayImage& a, const GrayImage& b, const GrayImage& f);

/// Sum of correlations of differences: corr(F-B, A) + corr(F-A, B).
/// Zero-variance operands contribute 0.
double scd(const GrayImage& a, const GrayImage& b, const GrayImage& f);

/// Visual information fidelity for fusion over a four-band Gaussian
/// pyramid with noise variance 2.0; both sources pool into one
/// numerator/denominator ratio. Bands too small for a window are skipped.
double viff(const GrayImage& a, const GrayImage& b, const GrayImage& f);

/// Xydeas-Petrovic edge preservation Q_AB/F with the canonical sigmoid
/// constants; returns 0 when both sources carry zero edge energy.
double q_abf(const GrayImage& a, const GrayImage& b, const GrayImage& f);

/// Multiscale SSIM of one image against the fused image; scale count
/// shrinks below 5 when the image is too small for the 11x11 window,
/// with the canonical exponents renormalized.
double msssim(const GrayImage& x, const GrayImage& f);

/// Feature mutual information over one-level Haar detail coefficients,
/// 256-bin histograms; I(F;X)/(H(F)+H(X)) summed over both sources.
double fmi_wt(const GrayImage& a, const GrayImage& b, const GrayImage& f);

/// All nine metrics on luma; color inputs reduce through rgb_to_ycbcr.
MetricReport evaluate_pair(const std::string& pair_id, const AnyImage& a, const AnyImage& b, const AnyImage& f);

/// Mean row over per-pair reports (pair_id "mean").
MetricReport mean_report(const std::vector<MetricReport>& rows);

/// CSV: header, one row per pair, then the mean row.
void write_report_csv(const std::string& path, const std::vector<MetricReport>& rows);

/// Text table mirroring the paper's layout; the best value per metric
/// column is starred.
std::string format_report_table(const std::string& title, const std::vector<std::string>& row_labels,
                                const std::vector<MetricReport>& rows);

}  // namespace dmfuse::metrics
