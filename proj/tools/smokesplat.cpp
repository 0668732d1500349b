#include "smokesplat/dataset.hpp"
#include "smokesplat/dehaze.hpp"
#include "smokesplat/enhance.hpp"
#include "smokesplat/ensemble.hpp"
#include "smokesplat/eval.hpp"
#include "smokesplat/hash.hpp"
#include "smokesplat/image_io.hpp"
#include "smokesplat/pipeline/config.hpp"
#include "smokesplat/pipeline/pipeline.hpp"
#include "smokesplat/pipeline/synth.hpp"
#include "smokesplat/splat/checkpoint.hpp"
#include "smokesplat/splat/loss.hpp"
#include "smokesplat/splat/optimizer.hpp"
#include "smokesplat/splat/rasterizer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace smokesplat;
using json = nlohmann::json;

namespace {

bool is_image_file(const fs::path& p) {
    const auto ext = p.extension().string();
    return ext == ".png" || ext == ".ppm" || ext == ".PNG" || ext == ".PPM";
}

// Expands --in/--out into (input, output) file pairs. A directory input maps
// every image in it to the same name under the output directory.
std::vector<std::pair<fs::path, fs::path>> io_pairs(const fs::path& in, const fs::path& out) {
    std::vector<std::pair<fs::path, fs::path>> pairs;
    if (fs::is_directory(in)) {
        fs::create_directories(out);
        for (const auto& e : fs::directory_iterator(in)) {
            if (e.is_regular_file() && is_image_file(e.path())) pairs.emplace_back(e.path(), out / e.path().filename());
        }
        std::sort(pairs.begin(), pairs.end());
        if (pairs.empty()) throw InvalidArgument("no .png or .ppm images in " + in.string());
    } else {
        if (!fs::exists(in)) throw IoError(IoErrorKind::missing_file, in, "");
        if (out.has_parent_path()) fs::create_directories(out.parent_path());
        pairs.emplace_back(in, out);
    }
    return pairs;
}

void write_json_file(const fs::path& path, const json& j) { std::ofstream(path) << j.dump(2) << '\n'; }

std::vector<splat::PosedImage> posed_views(const Dataset& ds) {
    std::vector<splat::PosedImage> views;
    for (const auto& v : ds.training_views) views.push_back({v.image, v.camera});
    return views;
}

struct OptimizeArgs {
    int iterations = 2000;
    std::size_t budget = 200;
    std::uint64_t seed = 0;
    double lambda = splat::kDefaultLossLambda;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--iterations", iterations, "Optimization iterations")->check(CLI::NonNegativeNumber);
        cmd->add_option("--budget", budget, "Number of Gaussians")->check(CLI::PositiveNumber);
        cmd->add_option("--lambda", lambda, "SSIM weight of the loss")->check(CLI::Range(0.0, 1.0));
    }
    splat::OptimConfig config() const {
        splat::OptimConfig cfg;
        cfg.iterations = iterations;
        cfg.budget = budget;
        cfg.seed = seed;
        cfg.lambda = lambda;
        return cfg;
    }
};

void setup_logging(bool verbose, bool quiet) {
    const bool no_color = std::getenv("NO_COLOR") != nullptr && *std::getenv("NO_COLOR") != '\0';
    auto logger = spdlog::stderr_color_mt("smokesplat", no_color ? spdlog::color_mode::never : spdlog::color_mode::automatic);
    logger->set_pattern("[%H:%M:%S] %^%l%$ %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(quiet ? spdlog::level::warn : verbose ? spdlog::level::debug : spdlog::level::info);
}

int fail(pipeline::ExitCode code, const std::string& message) {
    spdlog::error("{}", message);
    return static_cast<int>(code);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Novel view synthesis from smoke-degraded images"};
    app.set_version_flag("--version", std::string("smokesplat ") + SMOKESPLAT_VERSION);
    app.require_subcommand(1);
    bool verbose = false;
    bool quiet = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");
    app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

    std::function<void()> action;

    // dehaze
    auto* dehaze_cmd = app.add_subcommand("dehaze", "Dark-channel-prior dehazing of an image or directory");
    fs::path dh_in, dh_out, dh_dump;
    dehaze::DehazeParams dh_params;
    dehaze_cmd->add_option("--in", dh_in, "Input image or directory")->required();
    dehaze_cmd->add_option("--out", dh_out, "Output image or directory")->required();
    dehaze_cmd->add_option("--patch-radius", dh_params.patch_radius, "Dark channel window half-size");
    dehaze_cmd->add_option("--omega", dh_params.omega, "Haze retention factor");
    dehaze_cmd->add_option("--airlight-fraction", dh_params.airlight_fraction, "Fraction of pixels for airlight");
    dehaze_cmd->add_option("--t-floor", dh_params.t_floor, "Transmission lower bound");
    dehaze_cmd->add_option("--guided-radius", dh_params.guided_radius, "Guided filter radius");
    dehaze_cmd->add_option("--guided-eps", dh_params.guided_eps, "Guided filter regularizer");
    dehaze_cmd->add_option("--dump-transmission", dh_dump, "Write refined transmission maps here");
    dehaze_cmd->callback([&] {
        action = [&] {
            dh_params.validate();
            if (!dh_dump.empty()) fs::create_directories(dh_dump);
            for (const auto& [in, out] : io_pairs(dh_in, dh_out)) {
                const auto r = dehaze::dehaze_detailed(load_image(in), dh_params);
                save_image(r.image, out);
                if (!dh_dump.empty()) {
                    save_image(gray_to_image(r.refined_transmission.t), dh_dump / (in.stem().string() + ".png"));
                }
                spdlog::info("{} -> {} (airlight {:.3f} {:.3f} {:.3f})", in.string(), out.string(), r.airlight.a[0],
                             r.airlight.a[1], r.airlight.a[2]);
            }
        };
    });

    // restore
    auto* restore_cmd = app.add_subcommand("restore", "Preliminary restoration of an image or directory");
    fs::path rs_in, rs_out;
    std::string rs_kind = "gray_world_stretch";
    std::string rs_command;
    restore_cmd->add_option("--in", rs_in, "Input image or directory")->required();
    restore_cmd->add_option("--out", rs_out, "Output image or directory")->required();
    restore_cmd->add_option("--kind", rs_kind, "identity, gray_world_stretch or external_command");
    restore_cmd->add_option("--command", rs_command, "Shell command for external_command (PNG stdin -> stdout)");
    restore_cmd->callback([&] {
        action = [&] {
            enhance::RestoreStage stage{enhance::restore_kind_from_string(rs_kind), rs_command};
            for (const auto& [in, out] : io_pairs(rs_in, rs_out)) {
                save_image(enhance::restore_stage(load_image(in), stage, in.filename().string()), out);
            }
        };
    });

    // enhance
    auto* enhance_cmd = app.add_subcommand("enhance", "Structure-gated enhancement of an image or directory");
    fs::path en_in, en_out, en_replay, en_record;
    bool en_mock = false;
    enhance::MockParams en_mock_params;
    enhance::GateConfig en_gate;
    std::string en_prompt = enhance::EnhancePrompt::default_prompt().text;
    std::string en_model = enhance::kDefaultModel;
    std::string en_endpoint;
    enhance_cmd->add_option("--in", en_in, "Input image or directory")->required();
    enhance_cmd->add_option("--out", en_out, "Output image or directory")->required();
    enhance_cmd->add_flag("--mock", en_mock, "Use the local tone-mapping mock instead of the service");
    enhance_cmd->add_option("--gamma", en_mock_params.gamma, "Mock gamma")->check(CLI::PositiveNumber);
    enhance_cmd->add_option("--gain", en_mock_params.gain, "Mock gain")->check(CLI::PositiveNumber);
    enhance_cmd->add_option("--threshold", en_gate.ssim_threshold, "Structure gate SSIM threshold");
    enhance_cmd->add_option("--prompt", en_prompt, "Enhancement prompt");
    enhance_cmd->add_option("--model", en_model, "Model name sent to the service");
    enhance_cmd->add_option("--endpoint", en_endpoint, "Service URL (default: SMOKESPLAT_ENHANCE_URL)");
    enhance_cmd->add_option("--replay", en_replay, "Serve recorded responses from this directory");
    enhance_cmd->add_option("--record", en_record, "Record service responses into this directory");
    enhance_cmd->callback([&] {
        action = [&] {
            std::unique_ptr<enhance::EnhanceClient> base;
            if (en_mock) {
                base = std::make_unique<enhance::MockClient>(en_mock_params);
            } else if (!en_replay.empty()) {
                base = std::make_unique<enhance::ReplayClient>(en_replay);
            } else {
                auto opts = enhance::HttpClientOptions::from_environment();
                if (!en_endpoint.empty()) opts.endpoint = en_endpoint;
                if (opts.endpoint.empty()) throw InvalidArgument("no endpoint: pass --endpoint, --mock or --replay");
                base = std::make_unique<enhance::HttpClient>(opts);
            }
            std::unique_ptr<enhance::EnhanceClient> recorder;
            enhance::EnhanceClient* client = base.get();
            if (!en_record.empty()) {
                fs::create_directories(en_record);
                recorder = std::make_unique<enhance::RecordingClient>(*base, en_record);
                client = recorder.get();
            }
            const enhance::EnhancePrompt prompt(en_prompt);
            for (const auto& [in, out] : io_pairs(en_in, en_out)) {
                const auto r = enhance::enhance_image(load_image(in), prompt, *client, en_gate, en_model);
                save_image(r.image, out);
                spdlog::info("{}: gate {} (ssim {:.4f})", in.filename().string(),
                             r.gate.accepted ? "accepted" : "rejected", r.gate.ssim);
            }
        };
    });

    // optimize
    auto* optimize_cmd = app.add_subcommand("optimize", "Fit a Gaussian scene to a dataset's training views");
    fs::path op_dataset, op_checkpoint;
    OptimizeArgs op_args;
    optimize_cmd->add_option("--dataset", op_dataset, "Dataset directory")->required();
    optimize_cmd->add_option("--checkpoint", op_checkpoint, "Output scene checkpoint")->required();
    optimize_cmd->add_option("--seed", op_args.seed, "Random seed");
    op_args.add_to(optimize_cmd);
    optimize_cmd->callback([&] {
        action = [&] {
            const Dataset ds = load_dataset(op_dataset);
            ds.validate();
            const auto cfg = op_args.config();
            const auto scene = splat::optimize(posed_views(ds), cfg, std::nullopt, std::nullopt,
                                               [&](int it, double loss) {
                                                   if (it % 100 == 0 || it == cfg.iterations) {
                                                       spdlog::info("iteration {}/{} loss {:.5f}", it, cfg.iterations,
                                                                    loss);
                                                   }
                                               });
            if (op_checkpoint.has_parent_path()) fs::create_directories(op_checkpoint.parent_path());
            splat::save_checkpoint({scene, static_cast<std::uint64_t>(cfg.iterations)}, op_checkpoint);
        };
    });

    // render
    auto* render_cmd = app.add_subcommand("render", "Render a checkpoint from a dataset's target cameras");
    fs::path rd_dataset, rd_checkpoint, rd_out;
    bool rd_train = false;
    render_cmd->add_option("--checkpoint", rd_checkpoint, "Scene checkpoint")->required();
    render_cmd->add_option("--dataset", rd_dataset, "Dataset directory providing cameras")->required();
    render_cmd->add_option("--out", rd_out, "Output directory")->required();
    render_cmd->add_flag("--train", rd_train, "Render the training cameras instead");
    render_cmd->callback([&] {
        action = [&] {
            const auto ckpt = splat::load_checkpoint(rd_checkpoint);
            const Dataset ds = load_dataset(rd_dataset);
            fs::create_directories(rd_out);
            if (rd_train) {
                for (const auto& v : ds.training_views) {
                    save_image(splat::render(ckpt.scene, v.camera), rd_out / (v.name + ".png"));
                }
            } else {
                for (const auto& v : ds.target_views) {
                    save_image(splat::render(ckpt.scene, v.camera), rd_out / (v.name + ".png"));
                }
            }
        };
    });

    // ensemble
    auto* ensemble_cmd = app.add_subcommand("ensemble", "Average target renders over independently seeded runs");
    fs::path en_dataset, ens_out;
    ensemble::EnsembleConfig ens_cfg;
    OptimizeArgs ens_args;
    ensemble_cmd->add_option("--dataset", en_dataset, "Dataset directory")->required();
    ensemble_cmd->add_option("--out", ens_out, "Output directory")->required();
    ensemble_cmd->add_option("--runs", ens_cfg.n_runs, "Number of runs")->check(CLI::PositiveNumber);
    ensemble_cmd->add_option("--base-seed", ens_cfg.base_seed, "Seed of run 0; run k uses base + k");
    ensemble_cmd->add_option("--workers", ens_cfg.workers, "Concurrent runs")->check(CLI::PositiveNumber);
    ens_args.add_to(ensemble_cmd);
    ensemble_cmd->callback([&] {
        action = [&] {
            const Dataset ds = load_dataset(en_dataset);
            ds.validate();
            ens_cfg.keep_scenes = true;
            const auto runs = ensemble::run_ensemble(posed_views(ds), ens_args.config(), ens_cfg, ds.target_cameras());
            const auto avg = ensemble::average_views(runs);
            json manifest{{"runs", runs.runs()}, {"seeds", runs.seeds}, {"iterations", ens_args.iterations},
                          {"budget", ens_args.budget}, {"files", json::object()}};
            json max_variance = json::object();
            auto record = [&](const fs::path& p) {
                manifest["files"][fs::relative(p, ens_out).generic_string()] = sha256_file(p);
            };
            for (std::size_t k = 0; k < runs.runs(); ++k) {
                const fs::path dir = ens_out / ("run_" + std::to_string(k));
                fs::create_directories(dir);
                for (std::size_t j = 0; j < runs.targets(); ++j) {
                    const fs::path p = dir / ("view_" + std::to_string(j) + ".png");
                    save_image(runs.views[k][j], p);
                    record(p);
                }
                splat::save_checkpoint({runs.scenes[k], static_cast<std::uint64_t>(ens_args.iterations)},
                                       dir / "scene.ckpt");
                record(dir / "scene.ckpt");
            }
            fs::create_directories(ens_out / "avg");
            for (std::size_t j = 0; j < avg.size(); ++j) {
                const fs::path p = ens_out / "avg" / ("view_" + std::to_string(j) + ".png");
                save_image(avg[j], p);
                record(p);
            }
            if (runs.runs() >= 2) {
                fs::create_directories(ens_out / "var");
                for (std::size_t j = 0; j < avg.size(); ++j) {
                    const auto var = ensemble::variance_map(runs, j);
                    const fs::path p = ens_out / "var" / ("view_" + std::to_string(j) + ".png");
                    save_image(gray_to_image(var.normalized), p);
                    record(p);
                    max_variance["view_" + std::to_string(j)] = var.max_variance;
                }
            }
            manifest["max_variance"] = max_variance;
            write_json_file(ens_out / "manifest.json", manifest);
        };
    });

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "PSNR / SSIM of rendered views against ground truth");
    fs::path ev_rendered, ev_gt, ev_out, ev_md;
    std::string ev_method = "smokesplat";
    std::string ev_scene;
    eval_cmd->add_option("--rendered", ev_rendered, "Directory of rendered views")->required();
    eval_cmd->add_option("--gt", ev_gt, "Directory of ground-truth views (matched by file name)")->required();
    eval_cmd->add_option("--out", ev_out, "CSV report path")->required();
    eval_cmd->add_option("--markdown", ev_md, "Markdown report path (default: next to the CSV)");
    eval_cmd->add_option("--method", ev_method, "Method name for the summary table");
    eval_cmd->add_option("--scene", ev_scene, "Scene label (default: ground-truth directory name)");
    eval_cmd->callback([&] {
        action = [&] {
            std::vector<Image> rendered, gt;
            std::vector<eval::ViewLabel> labels;
            const std::string scene = ev_scene.empty() ? fs::absolute(ev_gt).lexically_normal().filename().string()
                                                       : ev_scene;
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(ev_gt)) {
                if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
            if (files.empty()) throw InvalidArgument("no ground-truth images in " + ev_gt.string());
            for (const auto& f : files) {
                gt.push_back(load_image(f));
                rendered.push_back(load_image(ev_rendered / f.filename()));
                labels.push_back({scene, f.stem().string()});
            }
            const auto report = eval::evaluate(rendered, gt, labels);
            if (ev_out.has_parent_path()) fs::create_directories(ev_out.parent_path());
            eval::write_csv(report, ev_out);
            const fs::path md = ev_md.empty() ? fs::path(ev_out).replace_extension(".md") : ev_md;
            std::ofstream(md) << eval::to_markdown(report, ev_method);
            std::cout << eval::to_markdown(report, ev_method);
        };
    });

    // pipeline
    auto* pipeline_cmd = app.add_subcommand("pipeline", "End-to-end orchestration");
    pipeline_cmd->require_subcommand(1);
    fs::path pl_config;
    std::string pl_preset;
    bool pl_mock = false;
    auto load_pipeline_config = [&] {
        std::optional<pipeline::Preset> preset;
        if (!pl_preset.empty()) preset = pipeline::preset_from_string(pl_preset);
        auto cfg = pipeline::load_config(pl_config, preset);
        if (pl_mock) cfg.enhance.mode = pipeline::EnhanceMode::mock;
        return cfg;
    };

    auto* run_cmd = pipeline_cmd->add_subcommand("run", "Run every stage and write the manifest");
    run_cmd->add_option("--config", pl_config, "Pipeline config file")->required();
    run_cmd->add_option("--preset", pl_preset, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    run_cmd->add_flag("--mock-enhance", pl_mock, "Use the local mock instead of the enhancement service");
    run_cmd->callback([&] {
        action = [&] {
            const auto manifest = pipeline::run_pipeline(load_pipeline_config());
            for (const auto& s : manifest.stages) {
                std::cout << s.name << ": " << pipeline::to_string(s.status);
                if (s.status == pipeline::StageStatus::computed) std::cout << " (" << s.seconds << " s)";
                std::cout << '\n';
            }
            if (manifest.metrics) {
                std::cout << "PSNR " << eval::format_metric(manifest.metrics->psnr_db, 2) << " dB, SSIM "
                          << eval::format_metric(manifest.metrics->ssim, 4) << '\n';
            }
        };
    });

    auto* synth_cmd = pipeline_cmd->add_subcommand("synth", "Generate a synthetic smoke dataset");
    fs::path sy_spec, sy_out;
    synth_cmd->add_option("--spec", sy_spec, "Scene spec (JSON); defaults when omitted");
    synth_cmd->add_option("--out", sy_out, "Output directory")->required();
    synth_cmd->callback([&] {
        action = [&] {
            const auto spec = sy_spec.empty() ? pipeline::SynthSceneSpec{} : pipeline::load_synth_spec(sy_spec);
            const auto synth = pipeline::synth_scene(spec);
            pipeline::write_synth(synth, spec, sy_out);
            spdlog::info("wrote {} training and {} test views to {}", synth.smoked.training_views.size(),
                         synth.smoked.target_views.size(), sy_out.string());
        };
    });

    auto* ablate_cmd = pipeline_cmd->add_subcommand("ablate", "Compare the pipeline with and without one stage");
    std::string ab_stage;
    ablate_cmd->add_option("--config", pl_config, "Pipeline config file")->required();
    ablate_cmd->add_option("--stage", ab_stage, "restore, dehaze, enhance or ensemble")->required();
    ablate_cmd->add_option("--preset", pl_preset, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    ablate_cmd->add_flag("--mock-enhance", pl_mock, "Use the local mock instead of the enhancement service");
    ablate_cmd->callback([&] {
        action = [&] { std::cout << pipeline::to_markdown(pipeline::ablate(load_pipeline_config(), ab_stage)); };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(pipeline::ExitCode::config_error);
    }
    setup_logging(verbose, quiet);

    try {
        action();
    } catch (const pipeline::ConfigError& e) {
        return fail(pipeline::ExitCode::config_error, e.what());
    } catch (const pipeline::CacheCorruption& e) {
        return fail(pipeline::ExitCode::cache_corruption, e.what());
    } catch (const InvalidArgument& e) {
        return fail(pipeline::ExitCode::config_error, e.what());
    } catch (const std::exception& e) {
        return fail(pipeline::ExitCode::stage_failure, e.what());
    }
    return 0;
}
