#pragma once

#include "smokesplat/image.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace smokesplat::eval {

/// -10 log10(MSE / peak^2) over all channels; +infinity when the images match.
double psnr(const Image& a, const Image& b, double peak = 1.0);
double mse(const Image& a, const Image& b);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr double kSsimC1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
inline constexpr double kSsimC2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
const std::array<double, kSsimWindow>& ssim_taps();

/// SSIM of luminance, mean over window centres that need no padding.
/// Throws InvalidArgument when either side is shorter than the window.
double ssim(const Image& a, const Image& b);
double ssim(const GrayMap& a, const GrayMap& b);

/// SSIM together with d SSIM / d a (same shape as `a`).
struct SsimGradient {
    double value = 0.0;
    GrayMap d_first;
};
SsimGradient ssim_with_gradient(const GrayMap& a, const GrayMap& b);

struct MetricRow {
    std::string scene;
    std::string view_id;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

struct SceneSummary {
    std::string scene;
    std::size_t views = 0;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

/// Per-view rows plus arithmetic means. PSNR is averaged in dB per view, not
/// via pooled MSE; the global means run over every row.
struct MetricReport {
    std::vector<MetricRow> rows;
    std::vector<SceneSummary> scenes;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

struct ViewLabel {
    std::string scene;
    std::string view_id;
};

MetricReport evaluate(const std::vector<Image>& rendered, const std::vector<Image>& ground_truth,
                      const std::vector<ViewLabel>& labels);

/// "inf" for infinite PSNR, otherwise fixed-point with `digits` decimals.
std::string format_metric(double v, int digits);

void write_csv(const MetricReport& report, const std::filesystem::path& path);

/// Two Markdown tables: the method summary (Method | PSNR | SSIM | LPIPS, with
/// LPIPS reported as n/a) and the per-scene breakdown with an Average row.
std::string to_markdown(const MetricReport& report, const std::string& method);

}  // namespace smokesplat::eval
