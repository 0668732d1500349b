#include "smokesplat/splat/checkpoint.hpp"

#include "smokesplat/error.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <bit>
#include <fstream>
#include <string>

namespace smokesplat::splat {
namespace {

constexpr const char* kFormat = "smokesplat-scene";
constexpr int kVersion = 1;

void put_f64(std::ostream& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    std::array<char, 8> bytes{};
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(bytes.data(), 8);
}

bool get_f64(std::istream& in, double& v) {
    std::array<unsigned char, 8> bytes{};
    if (!in.read(reinterpret_cast<char*>(bytes.data()), 8)) return false;
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
    return true;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::unwritable, path.string(), "");
    const auto& bg = ckpt.scene.background;
    const nlohmann::json header{{"format", kFormat},
                                {"version", kVersion},
                                {"budget", ckpt.scene.budget()},
                                {"background", {bg.x(), bg.y(), bg.z()}},
                                {"iteration", ckpt.iteration}};
    out << header.dump() << '\n';
    std::array<double, Gaussian::kParamCount> rec{};
    for (const auto& g : ckpt.scene.gaussians) {
        g.pack(rec);
        for (double v : rec) put_f64(out, v);
    }
    if (!out) throw IoError(IoErrorKind::unwritable, path.string(), "write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(IoErrorKind::missing_file, path.string(), "");
    std::string line;
    if (!std::getline(in, line)) throw IoError(IoErrorKind::corrupt_header, path.string(), "empty file");
    Checkpoint ckpt;
    std::size_t budget = 0;
    try {
        const auto header = nlohmann::json::parse(line);
        if (header.at("format").get<std::string>() != kFormat) {
            throw IoError(IoErrorKind::unsupported_format, path.string(), "not a scene checkpoint");
        }
        if (header.at("version").get<int>() != kVersion) {
            throw IoError(IoErrorKind::unsupported_format, path.string(), "unknown checkpoint version");
        }
        budget = header.at("budget").get<std::size_t>();
        const auto& bg = header.at("background");
        ckpt.scene.background = {bg.at(0).get<double>(), bg.at(1).get<double>(), bg.at(2).get<double>()};
        ckpt.iteration = header.at("iteration").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(IoErrorKind::corrupt_header, path.string(), e.what());
    }
    ckpt.scene.gaussians.resize(budget);
    std::array<double, Gaussian::kParamCount> rec{};
    for (auto& g : ckpt.scene.gaussians) {
        for (double& v : rec) {
            if (!get_f64(in, v)) throw IoError(IoErrorKind::corrupt_data, path.string(), "truncated record array");
        }
        g = Gaussian::unpack(rec);
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw IoError(IoErrorKind::corrupt_data, path.string(), "trailing bytes after records");
    }
    return ckpt;
}

}  // namespace smokesplat::splat
