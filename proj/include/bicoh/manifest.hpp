#pragma once

// Run manifest: what was run, with which inputs, and what it produced.

#include "error.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace bicoh {

inline constexpr const char* tool_version = "1.0.0";

/// Lower-case hex SHA-256 of a file's bytes.
inline std::string sha256_file(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "' for hashing");
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("sha256 init failed");
    std::array<char, 1 << 16> buf{};
    while (f) {
        f.read(buf.data(), buf.size());
        if (f.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(f.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    std::ostringstream hex;
    for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
}

struct ManifestEntry {
    std::string path; // relative to the manifest's directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    std::string command;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    std::uint64_t master_seed = 0;
    nlohmann::ordered_json derived = nlohmann::ordered_json::object();
    std::string started_utc;
    std::string finished_utc;
    std::vector<ManifestEntry> outputs;

    /// Hashes `file` (inside `dir`) and records it.
    void add_output(const std::filesystem::path& dir, const std::filesystem::path& file)
    {
        const auto full = dir / file;
        outputs.push_back({file.generic_string(), sha256_file(full), std::filesystem::file_size(full)});
    }

    [[nodiscard]] nlohmann::ordered_json to_json() const
    {
        nlohmann::ordered_json j;
        j["tool"] = "bicoh";
        j["version"] = tool_version;
        j["command"] = command;
        j["config"] = config;
        j["master_seed"] = master_seed;
        j["derived"] = derived;
        j["started_utc"] = started_utc;
        j["finished_utc"] = finished_utc;
        auto& out = j["outputs"] = nlohmann::ordered_json::array();
        for (const auto& e : outputs) out.push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
        return j;
    }

    static RunManifest from_json(const nlohmann::json& j)
    {
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        m.config = j.at("config");
        m.master_seed = j.at("master_seed").get<std::uint64_t>();
        m.derived = j.at("derived");
        m.started_utc = j.value("started_utc", "");
        m.finished_utc = j.value("finished_utc", "");
        for (const auto& e : j.at("outputs"))
            m.outputs.push_back({e.at("path").get<std::string>(), e.at("sha256").get<std::string>(),
                                 e.at("bytes").get<std::uintmax_t>()});
        return m;
    }
};

inline std::string utc_now()
{
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

inline void write_manifest(const std::filesystem::path& path, const RunManifest& m)
{
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f << m.to_json().dump(2) << '\n';
    if (!f) throw IoError("write to '" + path.string() + "' failed");
}

inline RunManifest read_manifest(const std::filesystem::path& path)
{
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest '" + path.string() + "'");
    try {
        return RunManifest::from_json(nlohmann::json::parse(f));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest '" + path.string() + "': " + e.what());
    }
}

/// Output paths whose current hash differs from the recorded one (missing files included).
inline std::vector<std::string> verify_manifest(const std::filesystem::path& manifest_path)
{
    const auto m = read_manifest(manifest_path);
    const auto dir = manifest_path.parent_path();
    std::vector<std::string> bad;
    for (const auto& e : m.outputs) {
        const auto full = dir / e.path;
        if (!std::filesystem::exists(full) || sha256_file(full) != e.sha256) bad.push_back(e.path);
    }
    return bad;
}

} // namespace bicoh
