#include "smokesplat/eval.hpp"

#include "smokesplat/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace smokesplat::eval {
namespace {

// Valid-mode separable correlation with the SSIM window.
GrayMap filter_valid(const GrayMap& src) {
    const auto& g = ssim_taps();
    const int ow = src.width - kSsimWindow + 1;
    const int oh = src.height - kSsimWindow + 1;
    GrayMap rows(ow, src.height);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) s += g[k] * src(x + k, y);
            rows(x, y) = s;
        }
    }
    GrayMap out(ow, oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) s += g[k] * rows(x, y + k);
            out(x, y) = s;
        }
    }
    return out;
}

// Adjoint of filter_valid: scatters each window value back onto the pixels it
// covered, producing a map of the original size.
GrayMap filter_valid_adjoint(const GrayMap& centers, int width, int height) {
    const auto& g = ssim_taps();
    GrayMap cols(centers.width, height);
    for (int y = 0; y < centers.height; ++y) {
        for (int x = 0; x < centers.width; ++x) {
            const double v = centers(x, y);
            for (int k = 0; k < kSsimWindow; ++k) cols(x, y + k) += g[k] * v;
        }
    }
    GrayMap out(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < centers.width; ++x) {
            const double v = cols(x, y);
            for (int k = 0; k < kSsimWindow; ++k) out(x + k, y) += g[k] * v;
        }
    }
    return out;
}

struct SsimMoments {
    GrayMap mu_a, mu_b, e_aa, e_bb, e_ab;
};

SsimMoments moments(const GrayMap& a, const GrayMap& b) {
    if (!a.same_shape(b)) throw DimensionMismatch("ssim: image dimensions differ");
    if (a.width < kSsimWindow || a.height < kSsimWindow) {
        throw InvalidArgument("ssim: image smaller than the 11x11 window");
    }
    GrayMap aa(a.width, a.height), bb(a.width, a.height), ab(a.width, a.height);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        aa.values[i] = a.values[i] * a.values[i];
        bb.values[i] = b.values[i] * b.values[i];
        ab.values[i] = a.values[i] * b.values[i];
    }
    return {filter_valid(a), filter_valid(b), filter_valid(aa), filter_valid(bb), filter_valid(ab)};
}

}  // namespace

const std::array<double, kSsimWindow>& ssim_taps() {
    static const std::array<double, kSsimWindow> taps = [] {
        std::array<double, kSsimWindow> t{};
        double sum = 0.0;
        for (int k = 0; k < kSsimWindow; ++k) {
            const double d = k - kSsimWindow / 2;
            t[k] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
            sum += t[k];
        }
        for (double& v : t) v /= sum;
        return t;
    }();
    return taps;
}

double mse(const Image& a, const Image& b) {
    require_same_shape(a, b, "mse");
    const auto da = a.data();
    const auto db = b.data();
    if (da.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        const double d = da[i] - db[i];
        s += d * d;
    }
    return s / static_cast<double>(da.size());
}

double psnr(const Image& a, const Image& b, double peak) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(m / (peak * peak));
}

double ssim(const GrayMap& a, const GrayMap& b) {
    const SsimMoments m = moments(a, b);
    double sum = 0.0;
    for (std::size_t i = 0; i < m.mu_a.values.size(); ++i) {
        const double ma = m.mu_a.values[i];
        const double mb = m.mu_b.values[i];
        const double va = m.e_aa.values[i] - ma * ma;
        const double vb = m.e_bb.values[i] - mb * mb;
        const double cov = m.e_ab.values[i] - ma * mb;
        sum += ((2.0 * ma * mb + kSsimC1) * (2.0 * cov + kSsimC2)) /
               ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
    }
    return sum / static_cast<double>(m.mu_a.values.size());
}

double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    return ssim(luminance(a), luminance(b));
}

SsimGradient ssim_with_gradient(const GrayMap& a, const GrayMap& b) {
    const SsimMoments m = moments(a, b);
    const std::size_t k = m.mu_a.values.size();
    const double inv_k = 1.0 / static_cast<double>(k);

    // Per-window partials with respect to E[a], E[a^2] and E[ab].
    GrayMap d_mu(m.mu_a.width, m.mu_a.height);
    GrayMap d_eaa(m.mu_a.width, m.mu_a.height);
    GrayMap d_eab(m.mu_a.width, m.mu_a.height);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double ma = m.mu_a.values[i];
        const double mb = m.mu_b.values[i];
        const double va = m.e_aa.values[i] - ma * ma;
        const double vb = m.e_bb.values[i] - mb * mb;
        const double cov = m.e_ab.values[i] - ma * mb;
        const double a1 = 2.0 * ma * mb + kSsimC1;
        const double a2 = 2.0 * cov + kSsimC2;
        const double b1 = ma * ma + mb * mb + kSsimC1;
        const double b2 = va + vb + kSsimC2;
        const double den = b1 * b2;
        const double s = a1 * a2 / den;
        sum += s;
        // a1' = 2 mb, a2' = -2 mb, b1' = 2 ma, b2' = -2 ma (through the variance terms).
        d_mu.values[i] = inv_k * ((2.0 * mb * a2 - 2.0 * mb * a1) / den - s * (2.0 * ma * b2 - 2.0 * ma * b1) / den);
        d_eaa.values[i] = inv_k * (-s / b2);
        d_eab.values[i] = inv_k * (2.0 * a1 / den);
    }

    const GrayMap g_mu = filter_valid_adjoint(d_mu, a.width, a.height);
    const GrayMap g_eaa = filter_valid_adjoint(d_eaa, a.width, a.height);
    const GrayMap g_eab = filter_valid_adjoint(d_eab, a.width, a.height);
    SsimGradient out{sum * inv_k, GrayMap(a.width, a.height)};
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        out.d_first.values[i] = g_mu.values[i] + 2.0 * a.values[i] * g_eaa.values[i] + b.values[i] * g_eab.values[i];
    }
    return out;
}

MetricReport evaluate(const std::vector<Image>& rendered, const std::vector<Image>& ground_truth,
                      const std::vector<ViewLabel>& labels) {
    if (rendered.size() != ground_truth.size() || rendered.size() != labels.size()) {
        throw DimensionMismatch("evaluate: rendered, ground-truth and label lists differ in length");
    }
    MetricReport report;
    report.rows.reserve(rendered.size());
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        report.rows.push_back(
            {labels[i].scene, labels[i].view_id, psnr(rendered[i], ground_truth[i]), ssim(rendered[i], ground_truth[i])});
    }
    std::stable_sort(report.rows.begin(), report.rows.end(), [](const MetricRow& x, const MetricRow& y) {
        if (x.scene != y.scene) return x.scene < y.scene;
        return x.view_id < y.view_id;
    });

    std::map<std::string, SceneSummary> per_scene;
    for (const auto& row : report.rows) {
        auto& s = per_scene[row.scene];
        s.scene = row.scene;
        ++s.views;
        s.psnr_db += row.psnr_db;
        s.ssim += row.ssim;
        report.psnr_db += row.psnr_db;
        report.ssim += row.ssim;
    }
    for (auto& [name, s] : per_scene) {
        s.psnr_db /= static_cast<double>(s.views);
        s.ssim /= static_cast<double>(s.views);
        report.scenes.push_back(s);
    }
    if (!report.rows.empty()) {
        report.psnr_db /= static_cast<double>(report.rows.size());
        report.ssim /= static_cast<double>(report.rows.size());
    }
    return report;
}

std::string format_metric(double v, int digits) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

void write_csv(const MetricReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError(IoErrorKind::unwritable, path.string(), "");
    out << "# psnr pooling: arithmetic mean of per-view dB; lpips not computed\n";
    out << "scene,view,psnr_db,ssim,lpips\n";
    for (const auto& r : report.rows) {
        out << r.scene << ',' << r.view_id << ',' << format_metric(r.psnr_db, 6) << ','
            << format_metric(r.ssim, 6) << ",n/a\n";
    }
    for (const auto& s : report.scenes) {
        out << s.scene << ",mean," << format_metric(s.psnr_db, 6) << ',' << format_metric(s.ssim, 6) << ",n/a\n";
    }
    out << "all,mean," << format_metric(report.psnr_db, 6) << ',' << format_metric(report.ssim, 6) << ",n/a\n";
}

std::string to_markdown(const MetricReport& report, const std::string& method) {
    std::ostringstream os;
    os << "PSNR is the arithmetic mean of per-view dB values. LPIPS is not computed.\n\n";
    os << "| Method | PSNR↑ | SSIM↑ | LPIPS↓ |\n";
    os << "|---|---|---|---|\n";
    os << "| " << method << " | " << format_metric(report.psnr_db, 2) << " | " << format_metric(report.ssim, 3)
       << " | n/a |\n\n";
    os << "| Scene | PSNR↑ | SSIM↑ |\n";
    os << "|---|---|---|\n";
    for (const auto& s : report.scenes) {
        os << "| " << s.scene << " | " << format_metric(s.psnr_db, 2) << " | " << format_metric(s.ssim, 3) << " |\n";
    }
    os << "| **Average** | **" << format_metric(report.psnr_db, 2) << "** | **" << format_metric(report.ssim, 3)
       << "** |\n";
    return os.str();
}

}  // namespace smokesplat::eval
