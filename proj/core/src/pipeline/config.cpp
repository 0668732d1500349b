#include "smokesplat/pipeline/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

namespace smokesplat::pipeline {
namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing characters");
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long i = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing characters");
        return i;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
}

std::size_t parse_count(const std::string& key, const std::string& v) {
    const long long i = parse_int(key, v);
    if (i < 0) throw ConfigError(key + ": must be non-negative");
    return static_cast<std::size_t>(i);
}

Eigen::Vector3d parse_rgb(const std::string& key, const std::string& v) {
    std::istringstream in(v);
    Eigen::Vector3d out;
    for (int c = 0; c < 3; ++c) {
        std::string tok;
        if (!(in >> tok)) throw ConfigError(key + ": expected three numbers");
        out[c] = parse_double(key, tok);
    }
    std::string extra;
    if (in >> extra) throw ConfigError(key + ": expected three numbers");
    return out;
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const std::filesystem::path&)>;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& v) {
    const std::filesystem::path p(v);
    return p.is_absolute() ? p : base / p;
}

const std::map<std::string, std::map<std::string, Setter>>& setters() {
    static const std::map<std::string, std::map<std::string, Setter>> table = {
        {"pipeline",
         {
             {"dataset", [](PipelineConfig& c, const std::string& v, const auto& b) { c.dataset = resolve(b, v); }},
             {"output", [](PipelineConfig& c, const std::string& v, const auto& b) { c.output = resolve(b, v); }},
             {"cache", [](PipelineConfig& c, const std::string& v, const auto& b) { c.cache_root = resolve(b, v); }},
             {"preset", [](PipelineConfig&, const std::string&, const auto&) {}},
             {"workers",
              [](PipelineConfig& c, const std::string& v, const auto&) { c.workers = parse_count("pipeline.workers", v); }},
         }},
        {"restore",
         {
             {"enabled",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.restore.enabled = parse_bool("restore.enabled", v);
              }},
             {"kind",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  try {
                      c.restore.stage.kind = enhance::restore_kind_from_string(v);
                  } catch (const InvalidArgument& e) {
                      throw ConfigError(std::string("restore.kind: ") + e.what());
                  }
              }},
             {"command", [](PipelineConfig& c, const std::string& v, const auto&) { c.restore.stage.command = v; }},
         }},
        {"dehaze",
         {
             {"enabled",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.dehaze.enabled = parse_bool("dehaze.enabled", v);
              }},
             {"patch_radius",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.dehaze.params.patch_radius = static_cast<int>(parse_int("dehaze.patch_radius", v));
              }},
             {"omega",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.dehaze.params.omega = parse_double("dehaze.omega", v);
              }},
             {"airlight_fraction",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.dehaze.params.airlight_fraction = parse_double("dehaze.airlight_fraction", v);
              }},
             {"t_floor",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.dehaze.params.t_floor = parse_double("dehaze.t_floor", v);
              }},
             {"guided_radius",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.dehaze.params.guided_radius = static_cast<int>(parse_int("dehaze.guided_radius", v));
              }},
             {"guided_eps",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.dehaze.params.guided_eps = parse_double("dehaze.guided_eps", v);
              }},
         }},
        {"enhance",
         {
             {"enabled",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.enhance.enabled = parse_bool("enhance.enabled", v);
              }},
             {"mode",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  if (v == "mock") c.enhance.mode = EnhanceMode::mock;
                  else if (v == "http") c.enhance.mode = EnhanceMode::http;
                  else if (v == "replay") c.enhance.mode = EnhanceMode::replay;
                  else throw ConfigError("enhance.mode: expected mock, http or replay, got '" + v + "'");
              }},
             {"prompt", [](PipelineConfig& c, const std::string& v, const auto&) { c.enhance.prompt = v; }},
             {"model", [](PipelineConfig& c, const std::string& v, const auto&) { c.enhance.model = v; }},
             {"mock_gamma",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.enhance.mock.gamma = parse_double("enhance.mock_gamma", v);
              }},
             {"mock_gain",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.enhance.mock.gain = parse_double("enhance.mock_gain", v);
              }},
             {"ssim_threshold",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.enhance.gate.ssim_threshold = parse_double("enhance.ssim_threshold", v);
              }},
             {"endpoint", [](PipelineConfig& c, const std::string& v, const auto&) { c.enhance.endpoint = v; }},
             {"replay_dir",
              [](PipelineConfig& c, const std::string& v, const auto& b) { c.enhance.replay_dir = resolve(b, v); }},
             {"concurrency",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.enhance.concurrency = parse_count("enhance.concurrency", v);
              }},
         }},
        {"optimize",
         {
             {"iterations",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.iterations = static_cast<int>(parse_int("optimize.iterations", v));
              }},
             {"budget",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.budget = parse_count("optimize.budget", v);
              }},
             {"lr_position",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.lr.position = parse_double("optimize.lr_position", v);
              }},
             {"lr_position_final",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.lr.position_final = parse_double("optimize.lr_position_final", v);
              }},
             {"lr_log_scale",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.lr.log_scale = parse_double("optimize.lr_log_scale", v);
              }},
             {"lr_rotation",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.lr.rotation = parse_double("optimize.lr_rotation", v);
              }},
             {"lr_opacity",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.lr.opacity = parse_double("optimize.lr_opacity", v);
              }},
             {"lr_color",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.lr.color = parse_double("optimize.lr_color", v);
              }},
             {"lr_background",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.lr.background = parse_double("optimize.lr_background", v);
              }},
             {"relocation_interval",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.relocation_interval = static_cast<int>(parse_int("optimize.relocation_interval", v));
              }},
             {"relocation_until",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.relocation_until = parse_double("optimize.relocation_until", v);
              }},
             {"dead_opacity",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.dead_opacity = parse_double("optimize.dead_opacity", v);
              }},
             {"opacity_reg",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.opacity_reg = parse_double("optimize.opacity_reg", v);
              }},
             {"scale_reg",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.scale_reg = parse_double("optimize.scale_reg", v);
              }},
             {"noise_scale",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.noise_scale = parse_double("optimize.noise_scale", v);
              }},
             {"lambda",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.lambda = parse_double("optimize.lambda", v);
              }},
             {"init_extent",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.init_extent = parse_double("optimize.init_extent", v);
              }},
             {"background",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.initial_background = parse_rgb("optimize.background", v);
              }},
             {"learn_background",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.optimize.learn_background = parse_bool("optimize.learn_background", v);
              }},
         }},
        {"ensemble",
         {
             {"runs",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.ensemble.runs = parse_count("ensemble.runs", v);
              }},
             {"base_seed",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.ensemble.base_seed = static_cast<std::uint64_t>(parse_count("ensemble.base_seed", v));
              }},
             {"workers",
              [](PipelineConfig& c, const std::string& v, const auto&) {
                  c.ensemble.workers = parse_count("ensemble.workers", v);
              }},
         }},
        {"eval",
         {
             {"enabled",
              [](PipelineConfig& c, const std::string& v, const auto&) { c.eval.enabled = parse_bool("eval.enabled", v); }},
             {"method", [](PipelineConfig& c, const std::string& v, const auto&) { c.eval.method = v; }},
         }},
    };
    return table;
}

}  // namespace

const char* to_string(Preset p) { return p == Preset::paper ? "paper" : "desk"; }

Preset preset_from_string(const std::string& name) {
    if (name == "desk") return Preset::desk;
    if (name == "paper") return Preset::paper;
    throw ConfigError("unknown preset '" + name + "' (expected desk or paper)");
}

PresetValues preset_values(Preset p) {
    return p == Preset::paper ? PresetValues{30000, 91} : PresetValues{2000, 8};
}

PipelineConfig default_config(Preset preset) {
    PipelineConfig c;
    c.preset = preset;
    const auto v = preset_values(preset);
    c.optimize.iterations = v.iterations;
    c.ensemble.runs = v.runs;
    return c;
}

void PipelineConfig::validate() const {
    if (dataset.empty()) throw ConfigError("pipeline.dataset is required");
    if (output.empty()) throw ConfigError("pipeline.output is required");
    try {
        dehaze.params.validate();
        optimize.validate();
        if (optimize.iterations < 1) throw ConfigError("optimize.iterations must be >= 1");
        if (ensemble.runs < 1) throw ConfigError("ensemble.runs must be >= 1");
        enhance::EnhancePrompt{enhance.prompt};
        if (!(enhance.mock.gamma > 0.0) || !(enhance.mock.gain > 0.0)) {
            throw ConfigError("enhance.mock_gamma and enhance.mock_gain must be > 0");
        }
        if (!std::isfinite(enhance.gate.ssim_threshold)) throw ConfigError("enhance.ssim_threshold must be finite");
        if (enhance.enabled && enhance.mode == EnhanceMode::replay && enhance.replay_dir.empty()) {
            throw ConfigError("enhance.replay_dir is required in replay mode");
        }
        if (restore.enabled && restore.stage.kind == enhance::RestoreStageKind::external_command &&
            restore.stage.command.empty()) {
            throw ConfigError("restore.command is required for external_command");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

std::string PipelineConfig::canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "restore.enabled=" << restore.enabled << '\n'
       << "restore.kind=" << enhance::to_string(restore.stage.kind) << '\n'
       << "restore.command=" << restore.stage.command << '\n';
    const auto& d = dehaze.params;
    os << "dehaze.enabled=" << dehaze.enabled << '\n'
       << "dehaze.patch_radius=" << d.patch_radius << '\n'
       << "dehaze.omega=" << d.omega << '\n'
       << "dehaze.airlight_fraction=" << d.airlight_fraction << '\n'
       << "dehaze.t_floor=" << d.t_floor << '\n'
       << "dehaze.guided_radius=" << d.guided_radius << '\n'
       << "dehaze.guided_eps=" << d.guided_eps << '\n';
    os << "enhance.enabled=" << enhance.enabled << '\n'
       << "enhance.mode=" << static_cast<int>(enhance.mode) << '\n'
       << "enhance.prompt=" << enhance.prompt << '\n'
       << "enhance.model=" << enhance.model << '\n'
       << "enhance.mock_gamma=" << enhance.mock.gamma << '\n'
       << "enhance.mock_gain=" << enhance.mock.gain << '\n'
       << "enhance.ssim_threshold=" << enhance.gate.ssim_threshold << '\n'
       << "enhance.endpoint=" << enhance.endpoint << '\n';
    const auto& o = optimize;
    os << "optimize.iterations=" << o.iterations << '\n'
       << "optimize.budget=" << o.budget << '\n'
       << "optimize.lr=" << o.lr.position << ',' << o.lr.position_final << ',' << o.lr.log_scale << ','
       << o.lr.rotation << ',' << o.lr.opacity << ',' << o.lr.color << ',' << o.lr.background << '\n'
       << "optimize.relocation=" << o.relocation_interval << ',' << o.relocation_until << ',' << o.dead_opacity
       << ',' << o.noise_scale << '\n'
       << "optimize.reg=" << o.opacity_reg << ',' << o.scale_reg << '\n'
       << "optimize.lambda=" << o.lambda << '\n'
       << "optimize.init_extent=" << o.init_extent << '\n'
       << "optimize.background=" << o.initial_background.x() << ',' << o.initial_background.y() << ','
       << o.initial_background.z() << ',' << o.learn_background << '\n'
       << "optimize.render=" << o.render.alpha_max << ',' << o.render.alpha_min << ',' << o.render.cutoff_sigma
       << ',' << o.render.cov_floor << ',' << o.render.z_near << '\n';
    os << "ensemble.runs=" << ensemble.runs << '\n' << "ensemble.base_seed=" << ensemble.base_seed << '\n';
    os << "eval.enabled=" << eval.enabled << '\n' << "eval.method=" << eval.method << '\n';
    return os.str();
}

std::filesystem::path PipelineConfig::effective_cache_root() const {
    return cache_root ? *cache_root : output / "cache";
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                            std::optional<Preset> preset_override) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }

    const auto& table = setters();
    Preset preset = Preset::desk;
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) throw ConfigError("config: key '" + section + "' is outside any section");
        const auto it = table.find(section);
        if (it == table.end()) throw ConfigError("config: unknown section [" + section + "]");
        for (const auto& [key, value] : body) {
            if (!it->second.contains(key)) throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
            if (section == "pipeline" && key == "preset") preset = preset_from_string(trim(value.data()));
        }
    }
    if (preset_override) preset = *preset_override;

    PipelineConfig cfg = default_config(preset);
    for (const auto& [section, body] : tree) {
        const auto& section_setters = table.at(section);
        for (const auto& [key, value] : body) section_setters.at(key)(cfg, trim(value.data()), base_dir);
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path, std::optional<Preset> preset_override) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_config(text, path.parent_path(), preset_override);
}

}  // namespace smokesplat::pipeline
