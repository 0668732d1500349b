#include "smokesplat/ensemble.hpp"

#include "smokesplat/error.hpp"
#include "smokesplat/parallel.hpp"
#include "smokesplat/splat/rasterizer.hpp"

#include <cmath>

namespace smokesplat::ensemble {

void EnsembleConfig::validate() const {
    if (n_runs < 1) throw InvalidArgument("ensemble: n_runs must be >= 1");
    if (!seeds.empty() && seeds.size() != n_runs) throw InvalidArgument("ensemble: seed list length != n_runs");
}

std::uint64_t EnsembleConfig::seed_for(std::size_t k) const {
    return seeds.empty() ? base_seed + k : seeds.at(k);
}

void RunSet::validate() const {
    if (views.empty()) throw DimensionMismatch("run set is empty");
    const std::size_t t = views.front().size();
    for (const auto& row : views) {
        if (row.size() != t) throw DimensionMismatch("run set rows differ in length");
        for (std::size_t j = 0; j < t; ++j) require_same_shape(row[j], views.front()[j], "run set view");
    }
}

RunSet run_ensemble(const std::vector<splat::PosedImage>& views, const splat::OptimConfig& opt_cfg,
                    const EnsembleConfig& ens_cfg, const std::vector<CameraView>& targets) {
    ens_cfg.validate();
    if (targets.empty()) throw InvalidArgument("ensemble: no target cameras");
    RunSet set;
    set.views.resize(ens_cfg.n_runs);
    set.seeds.resize(ens_cfg.n_runs);
    if (ens_cfg.keep_scenes) set.scenes.resize(ens_cfg.n_runs);

    parallel_for(ens_cfg.n_runs, ens_cfg.workers, [&](std::size_t k) {
        try {
            splat::OptimConfig cfg = opt_cfg;
            cfg.seed = ens_cfg.seed_for(k);
            const splat::GaussianScene scene = splat::optimize(views, cfg);
            std::vector<Image> rendered;
            rendered.reserve(targets.size());
            for (const auto& cam : targets) rendered.push_back(splat::render(scene, cam, cfg.render));
            set.views[k] = std::move(rendered);
            set.seeds[k] = cfg.seed;
            if (ens_cfg.keep_scenes) set.scenes[k] = scene;
        } catch (const std::exception& e) {
            throw RunError(k, e.what());
        }
    });
    return set;
}

std::vector<Image> average_views(const RunSet& runs) {
    runs.validate();
    const double n = static_cast<double>(runs.runs());
    std::vector<Image> out;
    out.reserve(runs.targets());
    for (std::size_t j = 0; j < runs.targets(); ++j) {
        const Image& first = runs.views.front()[j];
        const std::size_t len = first.data().size();
        std::vector<double> sum(len, 0.0);
        std::vector<double> comp(len, 0.0);
        for (const auto& row : runs.views) {
            const auto d = row[j].data();
            for (std::size_t i = 0; i < len; ++i) {
                const double t = sum[i] + d[i];
                comp[i] += std::abs(sum[i]) >= std::abs(d[i]) ? (sum[i] - t) + d[i] : (d[i] - t) + sum[i];
                sum[i] = t;
            }
        }
        for (std::size_t i = 0; i < len; ++i) sum[i] = (sum[i] + comp[i]) / n;
        out.emplace_back(first.width(), first.height(), std::move(sum));
    }
    return out;
}

VarianceMap variance_map(const RunSet& runs, std::size_t view_index) {
    runs.validate();
    if (runs.runs() < 2) throw InvalidArgument("variance_map: needs at least two runs");
    if (view_index >= runs.targets()) throw InvalidArgument("variance_map: view index out of range");
    const Image& first = runs.views.front()[view_index];
    const std::size_t npix = first.pixel_count();
    const double n = static_cast<double>(runs.runs());
    VarianceMap out{GrayMap(first.width(), first.height()), 0.0};
    for (std::size_t p = 0; p < npix; ++p) {
        double acc = 0.0;
        for (int c = 0; c < 3; ++c) {
            double mean = 0.0;
            for (const auto& row : runs.views) mean += row[view_index].data()[3 * p + c];
            mean /= n;
            double var = 0.0;
            for (const auto& row : runs.views) {
                const double d = row[view_index].data()[3 * p + c] - mean;
                var += d * d;
            }
            acc += var / n;
        }
        out.normalized.values[p] = acc / 3.0;
        out.max_variance = std::max(out.max_variance, acc / 3.0);
    }
    if (out.max_variance > 0.0) {
        for (double& v : out.normalized.values) v /= out.max_variance;
    }
    return out;
}

}  // namespace smokesplat::ensemble
