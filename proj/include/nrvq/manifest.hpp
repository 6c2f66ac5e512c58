#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nrvq/analysis.hpp"
#include "nrvq/errors.hpp"
#include "nrvq/video_io.hpp"

namespace nrvq {

enum class StreamFormat { y4m, raw };

struct StreamEntry {
    std::string path;
    StreamFormat format = StreamFormat::y4m;
    StreamKey key;
    double bitrate_kbps = 0.0;
    std::optional<VideoGeometry> geometry;  // raw streams only
};

// Measurement grid description: the filesystem cannot carry the
// (video, encoder, use case, bitrate) coordinates, so they are explicit.
struct MeasurementManifest {
    std::vector<StreamEntry> streams;
    std::string model_path;
    std::string output_dir;
    std::optional<int> parallelism;
};

namespace detail {

inline StreamFormat parse_format(const std::string& s) {
    if (s == "y4m") return StreamFormat::y4m;
    if (s == "raw") return StreamFormat::raw;
    throw ManifestError("manifest: unknown stream format '" + s + "' (expected y4m or raw)");
}

inline void validate_label(const std::string& s, const char* what) {
    if (s.empty()) throw ManifestError(std::string("manifest: empty ") + what);
    for (const char c : s)
        if (c == ',' || c == '"' || c == '\n' || c == '\r')
            throw ManifestError(std::string("manifest: ") + what + " '" + s +
                                "' contains a character that breaks csv output");
}

inline void validate_manifest(const MeasurementManifest& m) {
    std::set<std::pair<StreamKey, double>> seen;
    for (const StreamEntry& e : m.streams) {
        if (e.path.empty()) throw ManifestError("manifest: stream with empty path");
        validate_label(e.key.video_id, "video_id");
        validate_label(e.key.encoder_id, "encoder_id");
        validate_label(e.key.use_case, "use_case");
        if (!(e.bitrate_kbps > 0.0))
            throw ManifestError("manifest: bitrate must be positive for " + e.key.label());
        if (!seen.emplace(e.key, e.bitrate_kbps).second)
            throw ManifestError("manifest: duplicate stream key " + e.key.label() + " at " +
                                std::to_string(e.bitrate_kbps) + " kbps");
    }
}

inline MeasurementManifest manifest_from_json(const nlohmann::json& j) {
    MeasurementManifest m;
    try {
        m.model_path = j.value("model", std::string{});
        m.output_dir = j.value("output_dir", std::string{});
        if (j.contains("parallelism")) m.parallelism = j.at("parallelism").get<int>();
        for (const auto& s : j.at("streams")) {
            StreamEntry e;
            e.path = s.at("path").get<std::string>();
            e.format = parse_format(s.value("format", std::string("y4m")));
            e.key.video_id = s.at("video_id").get<std::string>();
            e.key.encoder_id = s.at("encoder_id").get<std::string>();
            e.key.use_case = s.at("use_case").get<std::string>();
            e.bitrate_kbps = s.at("bitrate_kbps").get<double>();
            if (s.contains("width") || s.contains("height")) {
                VideoGeometry g;
                g.width = s.at("width").get<int>();
                g.height = s.at("height").get<int>();
                g.fps_num = s.value("fps_num", std::int64_t{25});
                g.fps_den = s.value("fps_den", std::int64_t{1});
                e.geometry = g;
            }
            m.streams.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ManifestError(std::string("manifest json: ") + ex.what());
    }
    validate_manifest(m);
    return m;
}

inline MeasurementManifest manifest_from_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ManifestError("manifest csv: empty file");
    const auto header = split_csv_line(line);
    const auto find_col = [&header](const char* name) -> std::optional<std::size_t> {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto col = [&find_col](const char* name) {
        const auto c = find_col(name);
        if (!c) throw ManifestError(std::string("manifest csv: missing column ") + name);
        return *c;
    };

    const std::size_t c_path = col("path");
    const std::size_t c_format = col("format");
    const std::size_t c_video = col("video_id");
    const std::size_t c_encoder = col("encoder_id");
    const std::size_t c_use = col("use_case");
    const std::size_t c_bitrate = col("bitrate_kbps");
    const auto c_width = find_col("width");
    const auto c_height = find_col("height");
    const auto c_fps_num = find_col("fps_num");
    const auto c_fps_den = find_col("fps_den");

    MeasurementManifest m;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv_line(line);
        if (fields.size() < header.size())
            throw ManifestError("manifest csv: short row: '" + line + "'");
        StreamEntry e;
        e.path = fields[c_path];
        e.format = parse_format(fields[c_format]);
        e.key = StreamKey{fields[c_video], fields[c_encoder], fields[c_use]};
        e.bitrate_kbps = parse_double_field(fields[c_bitrate], "bitrate_kbps");
        const auto cell = [&fields](const std::optional<std::size_t>& c) -> std::string {
            return c && *c < fields.size() ? fields[*c] : std::string{};
        };
        if (!cell(c_width).empty() || !cell(c_height).empty()) {
            VideoGeometry g;
            g.width = static_cast<int>(parse_double_field(cell(c_width), "width"));
            g.height = static_cast<int>(parse_double_field(cell(c_height), "height"));
            if (!cell(c_fps_num).empty())
                g.fps_num = static_cast<std::int64_t>(parse_double_field(cell(c_fps_num), "fps_num"));
            if (!cell(c_fps_den).empty())
                g.fps_den = static_cast<std::int64_t>(parse_double_field(cell(c_fps_den), "fps_den"));
            e.geometry = g;
        }
        m.streams.push_back(std::move(e));
    }
    validate_manifest(m);
    return m;
}

}  // namespace detail

// Loads a manifest, dispatching on the file extension (.json or .csv).
inline MeasurementManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) throw IoFailure("cannot open manifest: " + path);

    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".json") {
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ManifestError(std::string("manifest json: ") + e.what());
        }
        return detail::manifest_from_json(j);
    }
    if (ext == ".csv") return detail::manifest_from_csv(in);
    throw ManifestError("manifest: unsupported extension '" + ext + "' (expected .json or .csv)");
}

}  // namespace nrvq
