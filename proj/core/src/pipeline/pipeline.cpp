#include "smokesplat/pipeline/pipeline.hpp"

#include "smokesplat/dataset.hpp"
#include "smokesplat/dehaze.hpp"
#include "smokesplat/enhance.hpp"
#include "smokesplat/ensemble.hpp"
#include "smokesplat/hash.hpp"
#include "smokesplat/image_io.hpp"
#include "smokesplat/parallel.hpp"
#include "smokesplat/splat/checkpoint.hpp"
#include "smokesplat/splat/rasterizer.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

namespace smokesplat::pipeline {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Exclusive, non-blocking ownership of an output directory.
class OutputLock {
public:
    explicit OutputLock(const fs::path& dir) {
        const fs::path path = dir / ".lock";
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0) throw PipelineError("lock", "", "cannot open " + path.string());
        if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
            ::close(fd_);
            throw PipelineError("lock", "", "output directory " + dir.string() + " is in use by another run");
        }
    }
    ~OutputLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    int fd_ = -1;
};

struct NamedImage {
    std::string name;
    Image image;
    std::string hash;
};
using ViewSet = std::vector<NamedImage>;

std::string image_hash(const Image& img) {
    const auto bytes = encode_ppm(img);
    return sha256_hex(bytes);
}

json metric_value(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double metric_from(const json& j) {
    if (j.is_string()) return j.get<std::string>() == "-inf" ? -INFINITY : INFINITY;
    return j.get<double>();
}

json report_to_json(const eval::MetricReport& r) {
    json rows = json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"scene", row.scene}, {"view", row.view_id}, {"psnr_db", metric_value(row.psnr_db)},
                        {"ssim", row.ssim}});
    }
    json scenes = json::array();
    for (const auto& s : r.scenes) {
        scenes.push_back(
            {{"scene", s.scene}, {"views", s.views}, {"psnr_db", metric_value(s.psnr_db)}, {"ssim", s.ssim}});
    }
    return {{"rows", rows}, {"scenes", scenes}, {"psnr_db", metric_value(r.psnr_db)}, {"ssim", r.ssim}};
}

eval::MetricReport report_from_json(const json& j) {
    eval::MetricReport r;
    for (const auto& row : j.at("rows")) {
        r.rows.push_back({row.at("scene").get<std::string>(), row.at("view").get<std::string>(),
                          metric_from(row.at("psnr_db")), row.at("ssim").get<double>()});
    }
    for (const auto& s : j.at("scenes")) {
        r.scenes.push_back({s.at("scene").get<std::string>(), s.at("views").get<std::size_t>(),
                            metric_from(s.at("psnr_db")), s.at("ssim").get<double>()});
    }
    r.psnr_db = metric_from(j.at("psnr_db"));
    r.ssim = j.at("ssim").get<double>();
    return r;
}

std::string relative_to(const fs::path& p, const fs::path& base) {
    return fs::relative(p, base).generic_string();
}

std::string canonical_section(const PipelineConfig& cfg, const std::string& prefix) {
    std::istringstream in(cfg.canonical());
    std::string out;
    for (std::string line; std::getline(in, line);) {
        if (line.rfind(prefix, 0) == 0) out += line + '\n';
    }
    return out;
}

void write_json(const fs::path& path, const json& j) { std::ofstream(path) << j.dump(2) << '\n'; }

json read_json(const fs::path& path) {
    std::ifstream in(path);
    json j;
    in >> j;
    return j;
}

void atomic_write(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        out << text;
        if (!out) throw PipelineError("manifest", "", "cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

// Per-view result of an image stage plus optional diagnostics.
struct ViewResult {
    Image image;
    json meta;
};
using ViewTransform = std::function<ViewResult(const Image&, const std::string&)>;

class Runner {
public:
    explicit Runner(const PipelineConfig& cfg) : cfg_(cfg), cache_(cfg.effective_cache_root()) {}

    RunManifest run();

private:
    StageRecord& begin_stage(const std::string& name) {
        manifest_.stages.reserve(kStageNames.size());
        manifest_.stages.push_back(StageRecord{name, StageStatus::skipped, "", "", {}, {}, 0.0});
        return manifest_.stages.back();
    }

    // Looks up (stage, key) or produces it; records status, dir and outputs.
    StageEntry resolve(StageRecord& rec, const std::string& params,
                       const std::function<void(const fs::path&)>& produce) {
        const auto start = Clock::now();
        rec.key = StageCache::make_key(rec.name, params, rec.inputs);
        std::optional<StageEntry> entry = cache_.lookup(rec.name, rec.key);
        if (entry) {
            rec.status = StageStatus::cached;
            spdlog::info("{}: cached ({})", rec.name, entry->dir.filename().string());
        } else {
            spdlog::info("{}: computing", rec.name);
            entry = cache_.commit(rec.name, rec.key, produce);
            rec.status = StageStatus::computed;
        }
        rec.dir = relative_to(entry->dir, cfg_.output);
        rec.outputs = entry->files;
        rec.seconds = rec.status == StageStatus::computed ? seconds_since(start) : 0.0;
        return *entry;
    }

    ViewSet image_stage(const std::string& name, bool enabled, const std::string& params, const ViewSet& in,
                        std::size_t workers, const ViewTransform& transform) {
        StageRecord& rec = begin_stage(name);
        for (const auto& v : in) rec.inputs[v.name] = v.hash;
        if (!enabled) {
            spdlog::info("{}: skipped", name);
            return in;
        }
        const StageEntry entry = resolve(rec, params, [&](const fs::path& dir) {
            std::vector<json> meta(in.size());
            parallel_for(in.size(), workers, [&](std::size_t i) {
                ViewResult r;
                try {
                    r = transform(in[i].image, in[i].name);
                } catch (const PipelineError&) {
                    throw;
                } catch (const std::exception& e) {
                    throw PipelineError(name, in[i].name, e.what());
                }
                if (!r.image.same_shape(in[i].image)) {
                    throw PipelineError(name, in[i].name, "stage changed the image dimensions");
                }
                save_image(r.image, dir / (in[i].name + ".png"));
                meta[i] = std::move(r.meta);
            });
            json all = json::object();
            for (std::size_t i = 0; i < in.size(); ++i) {
                if (!meta[i].is_null()) all[in[i].name] = meta[i];
            }
            if (!all.empty()) write_json(dir / "views.json", all);
        });
        ViewSet out;
        for (const auto& v : in) {
            const std::string file = v.name + ".png";
            out.push_back({v.name, load_image(entry.file(file)), entry.files.at(file)});
        }
        return out;
    }

    std::unique_ptr<enhance::EnhanceClient> make_client() const {
        switch (cfg_.enhance.mode) {
            case EnhanceMode::mock: return std::make_unique<enhance::MockClient>(cfg_.enhance.mock);
            case EnhanceMode::replay: return std::make_unique<enhance::ReplayClient>(cfg_.enhance.replay_dir);
            case EnhanceMode::http: {
                auto opts = enhance::HttpClientOptions::from_environment();
                if (!cfg_.enhance.endpoint.empty()) opts.endpoint = cfg_.enhance.endpoint;
                if (opts.endpoint.empty()) {
                    throw PipelineError("enhance", "", "no endpoint configured (enhance.endpoint or environment)");
                }
                return std::make_unique<enhance::HttpClient>(opts);
            }
        }
        throw PipelineError("enhance", "", "unknown client mode");
    }

    const PipelineConfig& cfg_;
    StageCache cache_;
    RunManifest manifest_;
};

RunManifest Runner::run() {
    const auto run_start = Clock::now();
    manifest_.tool_version = SMOKESPLAT_VERSION;
    manifest_.config_hash = sha256_hex(cfg_.canonical());
    manifest_.preset = to_string(cfg_.preset);

    Dataset ds;
    try {
        ds = load_dataset(cfg_.dataset);
        ds.validate();
    } catch (const Error& e) {
        throw PipelineError("dataset", "", e.what());
    }
    if (ds.target_views.empty()) throw PipelineError("dataset", "", "the dataset has no target views");

    ViewSet views;
    for (const auto& tv : ds.training_views) views.push_back({tv.name, tv.image, image_hash(tv.image)});

    // Preliminary restoration.
    const auto restore_cfg = cfg_.restore.stage;
    views = image_stage("restore", cfg_.restore.enabled, canonical_section(cfg_, "restore."), views, cfg_.workers,
                        [&](const Image& img, const std::string& name) {
                            try {
                                return ViewResult{enhance::restore_stage(img, restore_cfg, name), nullptr};
                            } catch (const enhance::StageError& e) {
                                throw PipelineError("restore", e.view(), e.what());
                            }
                        });

    // Dark-channel dehazing.
    views = image_stage("dehaze", cfg_.dehaze.enabled, canonical_section(cfg_, "dehaze."), views, cfg_.workers,
                        [&](const Image& img, const std::string&) {
                            const auto r = dehaze::dehaze_detailed(img, cfg_.dehaze.params);
                            return ViewResult{r.image, json{{"airlight", r.airlight.a}}};
                        });

    // Structure-gated enhancement.
    {
        std::unique_ptr<enhance::EnhanceClient> client;
        if (cfg_.enhance.enabled) client = make_client();
        const enhance::EnhancePrompt prompt(cfg_.enhance.prompt);
        std::mutex client_mutex;
        const bool serialize = cfg_.enhance.mode != EnhanceMode::http;
        views = image_stage("enhance", cfg_.enhance.enabled, canonical_section(cfg_, "enhance."), views,
                            cfg_.enhance.concurrency, [&](const Image& img, const std::string&) {
                                std::unique_lock lock(client_mutex, std::defer_lock);
                                if (serialize) lock.lock();
                                const auto out =
                                    enhance::enhance_image(img, prompt, *client, cfg_.enhance.gate, cfg_.enhance.model);
                                return ViewResult{out.image,
                                                  json{{"accepted", out.gate.accepted}, {"ssim", out.gate.ssim}}};
                            });
    }

    // Ensemble of optimization runs and averaging.
    ensemble::EnsembleConfig ens;
    ens.n_runs = cfg_.ensemble.runs;
    ens.base_seed = cfg_.ensemble.base_seed;
    ens.workers = cfg_.ensemble.workers;
    ens.keep_scenes = true;
    for (std::size_t k = 0; k < ens.n_runs; ++k) manifest_.seeds.push_back(ens.seed_for(k));

    StageRecord& ens_rec = begin_stage("ensemble");
    for (const auto& v : views) ens_rec.inputs["train/" + v.name] = v.hash;
    json cameras = json::object();
    for (const auto& tv : ds.training_views) cameras["train/" + tv.name] = camera_to_json(tv.camera);
    for (const auto& tv : ds.target_views) cameras["test/" + tv.name] = camera_to_json(tv.camera);
    ens_rec.inputs["cameras"] = sha256_hex(cameras.dump());
    const std::vector<CameraView> targets = ds.target_cameras();
    const std::size_t n_targets = targets.size();

    const StageEntry ens_entry =
        resolve(ens_rec, canonical_section(cfg_, "optimize.") + canonical_section(cfg_, "ensemble."),
                [&](const fs::path& dir) {
                    std::vector<splat::PosedImage> posed;
                    for (std::size_t i = 0; i < views.size(); ++i) {
                        posed.push_back({views[i].image, ds.training_views[i].camera});
                    }
                    ensemble::RunSet runs;
                    try {
                        runs = ensemble::run_ensemble(posed, cfg_.optimize, ens, targets);
                    } catch (const ensemble::RunError& e) {
                        throw PipelineError("ensemble", "", e.what());
                    }
                    for (std::size_t k = 0; k < runs.runs(); ++k) {
                        const fs::path run_dir = dir / ("run_" + std::to_string(k));
                        fs::create_directories(run_dir);
                        for (std::size_t j = 0; j < n_targets; ++j) {
                            save_image(runs.views[k][j], run_dir / ("view_" + std::to_string(j) + ".png"));
                        }
                        splat::save_checkpoint({runs.scenes[k], static_cast<std::uint64_t>(cfg_.optimize.iterations)},
                                               run_dir / "scene.ckpt");
                    }
                    const auto avg = ensemble::average_views(runs);
                    fs::create_directories(dir / "avg");
                    for (std::size_t j = 0; j < n_targets; ++j) {
                        save_image(avg[j], dir / "avg" / ("view_" + std::to_string(j) + ".png"));
                    }
                    json max_variance = json::object();
                    if (runs.runs() >= 2) {
                        fs::create_directories(dir / "var");
                        for (std::size_t j = 0; j < n_targets; ++j) {
                            const auto var = ensemble::variance_map(runs, j);
                            const std::string name = "view_" + std::to_string(j);
                            save_image(gray_to_image(var.normalized), dir / "var" / (name + ".png"));
                            max_variance[name] = var.max_variance;
                        }
                    }
                    write_json(dir / "max.json", max_variance);
                    json names = json::array();
                    for (const auto& tv : ds.target_views) names.push_back(tv.name);
                    write_json(dir / "targets.json",
                               {{"targets", names}, {"seeds", runs.seeds}, {"averaging", "display-space float mean"}});
                });

    std::vector<NamedImage> averaged;
    for (std::size_t j = 0; j < n_targets; ++j) {
        const std::string file = "avg/view_" + std::to_string(j) + ".png";
        averaged.push_back({ds.target_views[j].name, load_image(ens_entry.file(file)), ens_entry.files.at(file)});
    }

    // Evaluation against held-out ground truth.
    StageRecord& eval_rec = begin_stage("eval");
    std::optional<StageEntry> eval_entry;
    if (cfg_.eval.enabled && ds.has_ground_truth()) {
        std::vector<Image> gt;
        std::vector<eval::ViewLabel> labels;
        for (const auto& tv : ds.target_views) {
            gt.push_back(*tv.ground_truth);
            labels.push_back({ds.scene_name, tv.name});
            eval_rec.inputs["gt/" + tv.name] = image_hash(*tv.ground_truth);
        }
        for (const auto& [rel, hash] : ens_entry.files) {
            if (rel.rfind("run_", 0) == 0 || rel.rfind("avg/", 0) == 0) {
                if (rel.ends_with(".png")) eval_rec.inputs["ensemble/" + rel] = hash;
            }
        }
        eval_entry = resolve(eval_rec, "eval.method=" + cfg_.eval.method + "\n", [&](const fs::path& dir) {
            std::vector<Image> rendered;
            for (const auto& a : averaged) rendered.push_back(a.image);
            const auto report = eval::evaluate(rendered, gt, labels);
            eval::write_csv(report, dir / "report.csv");
            std::ofstream(dir / "report.md") << eval::to_markdown(report, cfg_.eval.method);

            json per_run = json::array();
            for (std::size_t k = 0; k < cfg_.ensemble.runs; ++k) {
                std::vector<Image> run_views;
                for (std::size_t j = 0; j < n_targets; ++j) {
                    run_views.push_back(load_image(
                        ens_entry.file("run_" + std::to_string(k) + "/view_" + std::to_string(j) + ".png")));
                }
                const auto run_report = eval::evaluate(run_views, gt, labels);
                per_run.push_back(
                    {{"run", k}, {"seed", ens.seed_for(k)}, {"report", report_to_json(run_report)}});
            }
            write_json(dir / "metrics.json", {{"average", report_to_json(report)}, {"runs", per_run}});
        });
        const json metrics = read_json(eval_entry->file("metrics.json"));
        manifest_.metrics = report_from_json(metrics.at("average"));
        for (const auto& r : metrics.at("runs")) {
            manifest_.run_psnr_db.push_back(metric_from(r.at("report").at("psnr_db")));
        }
    } else {
        for (const auto& a : averaged) eval_rec.inputs["avg/" + a.name] = a.hash;
        spdlog::info("eval: skipped");
    }

    // Publish final views and reports.
    const fs::path final_dir = cfg_.output / "final";
    fs::remove_all(final_dir);
    fs::create_directories(final_dir);
    for (std::size_t j = 0; j < n_targets; ++j) {
        fs::copy_file(ens_entry.file("avg/view_" + std::to_string(j) + ".png"),
                      final_dir / (averaged[j].name + ".png"));
        manifest_.outputs["final/" + averaged[j].name + ".png"] = averaged[j].hash;
    }
    for (const char* name : {"report.csv", "report.md", "metrics.json"}) {
        const fs::path dst = cfg_.output / name;
        if (eval_entry) {
            fs::copy_file(eval_entry->file(name), dst, fs::copy_options::overwrite_existing);
            manifest_.outputs[name] = eval_entry->files.at(name);
        } else {
            fs::remove(dst);
        }
    }

    manifest_.total_seconds = seconds_since(run_start);
    atomic_write(cfg_.output / kManifestFile, manifest_.to_json().dump(2) + "\n");
    return manifest_;
}

json stage_json(const StageRecord& s, bool with_volatile) {
    json j{{"name", s.name}, {"key", s.key}, {"inputs", s.inputs}, {"outputs", s.outputs}};
    if (with_volatile) {
        j["status"] = to_string(s.status);
        j["dir"] = s.dir;
        j["seconds"] = s.seconds;
    }
    return j;
}

json manifest_core(const RunManifest& m, bool with_volatile) {
    json stages = json::array();
    for (const auto& s : m.stages) stages.push_back(stage_json(s, with_volatile));
    json run_psnr = json::array();
    for (double v : m.run_psnr_db) run_psnr.push_back(metric_value(v));
    return {{"tool", "smokesplat"},
            {"version", m.tool_version},
            {"config_hash", m.config_hash},
            {"preset", m.preset},
            {"seeds", m.seeds},
            {"stages", stages},
            {"outputs", m.outputs},
            {"metrics", m.metrics ? report_to_json(*m.metrics) : json(nullptr)},
            {"run_psnr_db", run_psnr}};
}

}  // namespace

const char* to_string(StageStatus s) {
    switch (s) {
        case StageStatus::computed: return "computed";
        case StageStatus::cached: return "cached";
        case StageStatus::skipped: return "skipped";
    }
    return "?";
}

const StageRecord* RunManifest::stage(const std::string& name) const {
    for (const auto& s : stages) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

std::string RunManifest::fingerprint() const { return sha256_hex(manifest_core(*this, false).dump()); }

json RunManifest::to_json() const {
    json j = manifest_core(*this, true);
    j["total_seconds"] = total_seconds;
    j["fingerprint"] = fingerprint();
    return j;
}

RunManifest run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.output);
    OutputLock lock(cfg.output);
    Runner runner(cfg);
    return runner.run();
}

std::vector<std::string> verify_manifest(const fs::path& output_dir) {
    std::vector<std::string> problems;
    json m;
    try {
        m = read_json(output_dir / kManifestFile);
    } catch (const std::exception& e) {
        return {std::string("unreadable manifest: ") + e.what()};
    }
    auto check = [&](const fs::path& path, const std::string& expected, const std::string& label) {
        if (!fs::is_regular_file(path)) {
            problems.push_back("missing " + label);
        } else if (sha256_file(path) != expected) {
            problems.push_back("hash mismatch for " + label);
        }
    };
    for (const auto& [rel, hash] : m.at("outputs").items()) check(output_dir / rel, hash.get<std::string>(), rel);
    for (const auto& s : m.at("stages")) {
        if (s.at("status") == "skipped") continue;
        const fs::path dir = output_dir / s.at("dir").get<std::string>();
        for (const auto& [rel, hash] : s.at("outputs").items()) {
            check(dir / rel, hash.get<std::string>(), s.at("name").get<std::string>() + ":" + rel);
        }
    }
    return problems;
}

AblationReport ablate(const PipelineConfig& cfg, const std::string& stage) {
    static const std::vector<std::string> ablatable = {"restore", "dehaze", "enhance", "ensemble"};
    if (std::find(ablatable.begin(), ablatable.end(), stage) == ablatable.end()) {
        throw ConfigError("unknown stage '" + stage + "' (expected restore, dehaze, enhance or ensemble)");
    }
    cfg.validate();
    if (!cfg.eval.enabled) throw ConfigError("ablation needs eval.enabled = true");

    PipelineConfig full = cfg;
    full.cache_root = cfg.effective_cache_root();
    const fs::path root = cfg.output / ("ablate_" + stage);
    full.output = root / "full";
    PipelineConfig ablated = full;
    ablated.output = root / "ablated";
    if (stage == "restore") ablated.restore.enabled = false;
    if (stage == "dehaze") ablated.dehaze.enabled = false;
    if (stage == "enhance") ablated.enhance.enabled = false;
    if (stage == "ensemble") ablated.ensemble.runs = 1;

    AblationReport report;
    report.stage = stage;
    report.full_manifest = run_pipeline(full);
    report.ablated_manifest = run_pipeline(ablated);
    if (!report.full_manifest.metrics || !report.ablated_manifest.metrics) {
        throw PipelineError("eval", "", "ablation needs target views with ground truth");
    }
    report.full = *report.full_manifest.metrics;
    report.ablated = *report.ablated_manifest.metrics;
    report.delta_psnr_db = report.full.psnr_db - report.ablated.psnr_db;
    report.delta_ssim = report.full.ssim - report.ablated.ssim;

    std::ofstream(root / "ablation.md") << to_markdown(report);
    write_json(root / "ablation.json", {{"stage", stage},
                                        {"full", report_to_json(report.full)},
                                        {"ablated", report_to_json(report.ablated)},
                                        {"delta_psnr_db", metric_value(report.delta_psnr_db)},
                                        {"delta_ssim", report.delta_ssim}});
    return report;
}

std::string to_markdown(const AblationReport& r) {
    std::ostringstream os;
    os << "# Ablation: " << r.stage << "\n\n"
       << "| Variant | PSNR↑ | SSIM↑ | LPIPS↓ |\n|---|---|---|---|\n"
       << "| full | " << eval::format_metric(r.full.psnr_db, 2) << " | " << eval::format_metric(r.full.ssim, 3)
       << " | n/a |\n"
       << "| without " << r.stage << " | " << eval::format_metric(r.ablated.psnr_db, 2) << " | "
       << eval::format_metric(r.ablated.ssim, 3) << " | n/a |\n"
       << "| delta | " << eval::format_metric(r.delta_psnr_db, 2) << " | " << eval::format_metric(r.delta_ssim, 3)
       << " | n/a |\n";
    return os.str();
}

}  // namespace smokesplat::pipeline
