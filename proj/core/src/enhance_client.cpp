#include "smokesplat/enhance.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <thread>

namespace smokesplat::enhance {

HttpClientOptions HttpClientOptions::from_environment() {
    HttpClientOptions o;
    if (const char* url = std::getenv("SMOKESPLAT_ENHANCE_URL")) o.endpoint = url;
    if (const char* key = std::getenv("SMOKESPLAT_ENHANCE_KEY")) o.api_key = key;
    return o;
}

HttpClient::HttpClient(HttpClientOptions options) : options_(std::move(options)) {
    const auto scheme_end = options_.endpoint.find("://");
    if (options_.endpoint.empty() || scheme_end == std::string::npos) {
        throw InvalidArgument("enhancement endpoint must be an http(s) URL, got '" + options_.endpoint + "'");
    }
    const auto path_start = options_.endpoint.find('/', scheme_end + 3);
    scheme_host_ = options_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : options_.endpoint.substr(path_start);
}

EnhanceResponse HttpClient::send(const EnhanceRequest& request) {
    httplib::Client client(scheme_host_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    httplib::Headers headers;
    if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);
    const std::string body = request.to_json();

    auto backoff = options_.initial_backoff;
    std::string last_error;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
        if (attempt > 0) {
            spdlog::warn("enhancement request failed ({}); retry {}/{}", last_error, attempt, options_.retries);
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        auto res = client.Post(path_, headers, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            // Client errors may still carry an {error} body; otherwise report the status.
            try {
                auto parsed = EnhanceResponse::from_json(res->body);
                if (parsed.error) return parsed;
            } catch (const EnhanceError&) {
            }
            throw EnhanceError(EnhanceErrorKind::service_error, "HTTP " + std::to_string(res->status));
        }
        return EnhanceResponse::from_json(res->body);
    }
    throw EnhanceError(EnhanceErrorKind::transport, "enhancement request failed: " + last_error);
}

EnhanceResponse ReplayClient::send(const EnhanceRequest& request) {
    const auto path = dir_ / (request_key(request) + ".json");
    std::ifstream in(path);
    if (!in) throw EnhanceError(EnhanceErrorKind::transport, "no recorded response at " + path.string());
    const std::string body{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return EnhanceResponse::from_json(body);
}

EnhanceResponse RecordingClient::send(const EnhanceRequest& request) {
    EnhanceResponse response = inner_.send(request);
    std::filesystem::create_directories(dir_);
    std::ofstream out(dir_ / (request_key(request) + ".json"));
    out << response.to_json();
    return response;
}

}  // namespace smokesplat::enhance
