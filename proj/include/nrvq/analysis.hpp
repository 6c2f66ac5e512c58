#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nrvq/core_math.hpp"
#include "nrvq/errors.hpp"
#include "nrvq/pooling.hpp"

namespace nrvq {

struct StreamKey {
    std::string video_id;
    std::string encoder_id;
    std::string use_case;

    auto operator<=>(const StreamKey&) const = default;

    std::string label() const { return video_id + "/" + encoder_id + "/" + use_case; }
};

// One measured stream: grid coordinates plus both pooled scores.
struct StreamRecord {
    StreamKey key;
    double bitrate_kbps = 0.0;
    PooledScore pooled;       // outlier-suppressing weighted average
    PooledScore pooled_mean;  // plain mean baseline
};

// Full per-stream measurement, kept for report emission.
struct StreamMeasurement {
    StreamKey key;
    double bitrate_kbps = 0.0;
    std::string source_path;
    FrameScoreSeries frames;
    PooledScore weighted;
    PooledScore mean;

    StreamRecord record() const { return StreamRecord{key, bitrate_kbps, weighted, mean}; }
};

struct RdPoint {
    double bitrate_kbps = 0.0;
    double score = 0.0;
};

// Lower score = better, so quality got worse with bitrate when the score at
// the higher bitrate exceeds the lower one beyond the tolerance.
struct RdViolation {
    double bitrate_low = 0.0;
    double bitrate_high = 0.0;
    double delta = 0.0;  // score(high) - score(low), positive for violations
};

struct RdCurve {
    StreamKey key;
    std::vector<RdPoint> points;  // strictly ascending bitrate
    std::vector<RdViolation> violations;
};

inline constexpr double kMonotonicityTolerance = 0.05;

// Adjacent-pair monotonicity check at the fixed tolerance.
inline std::vector<RdViolation> check_monotonic(const RdCurve& curve) {
    if (curve.points.size() < 2)
        throw TooFewPoints("check_monotonic: need at least 2 points, curve " + curve.key.label());
    std::vector<RdViolation> out;
    for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
        const double delta = curve.points[i + 1].score - curve.points[i].score;
        if (delta > kMonotonicityTolerance)
            out.push_back(RdViolation{curve.points[i].bitrate_kbps,
                                      curve.points[i + 1].bitrate_kbps, delta});
    }
    return out;
}

// Groups records by (video, encoder, use case), sorts each group by bitrate
// and flags monotonicity violations. Curves come out sorted by key; every
// input record lands in exactly one curve.
inline std::vector<RdCurve> build_rd_curves(const std::vector<StreamRecord>& records) {
    std::map<StreamKey, std::vector<RdPoint>> groups;
    for (const StreamRecord& r : records) {
        auto& points = groups[r.key];
        for (const RdPoint& p : points)
            if (p.bitrate_kbps == r.bitrate_kbps)
                throw DuplicatePoint("duplicate stream at " + r.key.label() + " bitrate " +
                                     std::to_string(r.bitrate_kbps));
        points.push_back(RdPoint{r.bitrate_kbps, r.pooled.score});
    }

    std::vector<RdCurve> out;
    out.reserve(groups.size());
    for (auto& [key, points] : groups) {
        std::sort(points.begin(), points.end(),
                  [](const RdPoint& a, const RdPoint& b) { return a.bitrate_kbps < b.bitrate_kbps; });
        RdCurve curve{key, std::move(points), {}};
        if (curve.points.size() >= 2) curve.violations = check_monotonic(curve);
        out.push_back(std::move(curve));
    }
    return out;
}

// Plot-facing series with scores negated so "higher is better" like the
// familiar metrics. Only ever written to plot data, never to stored scores.
inline std::vector<RdPoint> invert_for_plot(const RdCurve& curve) {
    std::vector<RdPoint> out;
    out.reserve(curve.points.size());
    for (const RdPoint& p : curve.points) out.push_back(RdPoint{p.bitrate_kbps, -p.score});
    return out;
}

struct SubjectiveEntry {
    StreamKey key;
    double bitrate_kbps = 0.0;
    double mos = 0.0;
};

struct VideoCorrelation {
    std::string video_id;
    double r = 0.0;
    std::size_t matched_points = 0;
};

struct CorrelationReport {
    std::vector<VideoCorrelation> per_video;
    double average_r = 0.0;
    std::vector<std::string> skipped_videos;  // under 3 matched points, or degenerate
};

// Pearson correlation against a subjective score table, per video. Metric
// scores are negated first so both axes read higher-is-better. Videos with
// fewer than 3 matched points are skipped and flagged, not silently dropped.
inline CorrelationReport correlate_with_subjective(const std::vector<StreamRecord>& records,
                                                   const std::vector<SubjectiveEntry>& subjective) {
    std::map<std::pair<StreamKey, double>, double> mos_index;
    for (const SubjectiveEntry& e : subjective) {
        const auto key = std::make_pair(e.key, e.bitrate_kbps);
        if (!mos_index.emplace(key, e.mos).second)
            throw DuplicatePoint("duplicate subjective entry at " + e.key.label() + " bitrate " +
                                 std::to_string(e.bitrate_kbps));
    }

    std::map<std::string, std::vector<std::pair<double, double>>> matched;  // video -> (metric, mos)
    std::set<std::string> videos;
    std::vector<StreamRecord> ordered = records;
    std::sort(ordered.begin(), ordered.end(), [](const StreamRecord& a, const StreamRecord& b) {
        return std::tie(a.key, a.bitrate_kbps) < std::tie(b.key, b.bitrate_kbps);
    });
    for (const StreamRecord& r : ordered) {
        videos.insert(r.key.video_id);
        const auto it = mos_index.find(std::make_pair(r.key, r.bitrate_kbps));
        if (it != mos_index.end())
            matched[r.key.video_id].emplace_back(-r.pooled.score, it->second);
    }

    CorrelationReport report;
    long double r_acc = 0.0L;
    for (const std::string& video : videos) {
        const auto it = matched.find(video);
        if (it == matched.end() || it->second.size() < 3) {
            report.skipped_videos.push_back(video);
            continue;
        }
        std::vector<double> metric, mos;
        metric.reserve(it->second.size());
        mos.reserve(it->second.size());
        for (const auto& [m, s] : it->second) {
            metric.push_back(m);
            mos.push_back(s);
        }
        try {
            const double r = pearson(metric, mos);
            report.per_video.push_back(VideoCorrelation{video, r, metric.size()});
            r_acc += r;
        } catch (const DegenerateInput&) {
            report.skipped_videos.push_back(video);
        }
    }
    if (!report.per_video.empty())
        report.average_r = static_cast<double>(r_acc / report.per_video.size());
    return report;
}

// ---------------------------------------------------------------------------
// Report emission. All output is deterministic: fixed column orders, stable
// sort orders, 9-significant-digit decimal formatting.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline std::string sanitize_for_filename(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (const char c : s)
        out.push_back((std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ||
                       c == '_')
                          ? c
                          : '_');
    return out;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            return out;
        }
        out.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline double parse_double_field(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ManifestError(std::string("bad numeric field for ") + what + ": '" + s + "'");
    }
}

}  // namespace detail

inline void write_per_frame_csv(std::ostream& out, const FrameScoreSeries& frames) {
    out << "frame_index,score,weight,dark_frame,outlier\n";
    const auto diags = diagnose_frames(frames);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        out << frames[i].frame_index << ',' << detail::g9(frames[i].score) << ','
            << detail::g9(diags[i].weight) << ',' << (diags[i].dark_frame ? 1 : 0) << ','
            << (diags[i].outlier_score ? 1 : 0) << '\n';
    }
}

inline std::string per_frame_csv_name(const StreamKey& key, double bitrate_kbps) {
    return "frames_" + detail::sanitize_for_filename(key.video_id) + "_" +
           detail::sanitize_for_filename(key.encoder_id) + "_" +
           detail::sanitize_for_filename(key.use_case) + "_" + detail::g9(bitrate_kbps) + ".csv";
}

inline constexpr const char* kSummaryHeader =
    "video_id,encoder_id,use_case,bitrate_kbps,score_weighted,score_mean,fallback_used,"
    "violation_count";

// Summary rows in the order the streams were measured. violation_count marks
// rows that are the worse (higher-bitrate) end of a flagged adjacent pair.
inline void write_summary_csv(std::ostream& out, const std::vector<StreamRecord>& records,
                              const std::vector<RdCurve>& curves) {
    std::map<StreamKey, const RdCurve*> by_key;
    for (const RdCurve& c : curves) by_key[c.key] = &c;

    out << kSummaryHeader << '\n';
    for (const StreamRecord& r : records) {
        int violations = 0;
        if (const auto it = by_key.find(r.key); it != by_key.end())
            for (const RdViolation& v : it->second->violations)
                if (v.bitrate_high == r.bitrate_kbps) ++violations;
        out << r.key.video_id << ',' << r.key.encoder_id << ',' << r.key.use_case << ','
            << detail::g9(r.bitrate_kbps) << ',' << detail::g9(r.pooled.score) << ','
            << detail::g9(r.pooled_mean.score) << ',' << (r.pooled.fallback_used ? 1 : 0) << ','
            << violations << '\n';
    }
}

inline std::vector<StreamRecord> read_summary_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ManifestError("summary csv: empty file");
    const auto header = detail::split_csv_line(line);
    const auto col = [&header](const char* name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw ManifestError(std::string("summary csv: missing column ") + name);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_video = col("video_id");
    const std::size_t c_encoder = col("encoder_id");
    const std::size_t c_use = col("use_case");
    const std::size_t c_bitrate = col("bitrate_kbps");
    const std::size_t c_weighted = col("score_weighted");
    const std::size_t c_mean = col("score_mean");
    const std::size_t c_fallback = col("fallback_used");

    std::vector<StreamRecord> out;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() < header.size())
            throw ManifestError("summary csv: short row: '" + line + "'");
        StreamRecord r;
        r.key = StreamKey{fields[c_video], fields[c_encoder], fields[c_use]};
        r.bitrate_kbps = detail::parse_double_field(fields[c_bitrate], "bitrate_kbps");
        r.pooled.score = detail::parse_double_field(fields[c_weighted], "score_weighted");
        r.pooled.fallback_used = fields[c_fallback] == "1";
        r.pooled_mean.score = detail::parse_double_field(fields[c_mean], "score_mean");
        r.pooled_mean.method = PoolingMethod::mean;
        out.push_back(std::move(r));
    }
    return out;
}

// Subjective score table: video_id, encoder_id, use_case, bitrate_kbps, mos.
inline std::vector<SubjectiveEntry> read_subjective_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ManifestError("subjective csv: empty file");
    const auto header = detail::split_csv_line(line);
    const auto col = [&header](const char* name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw ManifestError(std::string("subjective csv: missing column ") + name);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_video = col("video_id");
    const std::size_t c_encoder = col("encoder_id");
    const std::size_t c_use = col("use_case");
    const std::size_t c_bitrate = col("bitrate_kbps");
    const std::size_t c_mos = col("mos");

    std::vector<SubjectiveEntry> out;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() < header.size())
            throw ManifestError("subjective csv: short row: '" + line + "'");
        SubjectiveEntry e;
        e.key = StreamKey{fields[c_video], fields[c_encoder], fields[c_use]};
        e.bitrate_kbps = detail::parse_double_field(fields[c_bitrate], "bitrate_kbps");
        e.mos = detail::parse_double_field(fields[c_mos], "mos");
        out.push_back(std::move(e));
    }
    return out;
}

inline void write_rd_csv(std::ostream& out, const std::vector<RdCurve>& curves) {
    out << "video_id,encoder_id,use_case,bitrate_kbps,score\n";
    for (const RdCurve& c : curves)
        for (const RdPoint& p : c.points)
            out << c.key.video_id << ',' << c.key.encoder_id << ',' << c.key.use_case << ','
                << detail::g9(p.bitrate_kbps) << ',' << detail::g9(p.score) << '\n';
}

inline void write_plot_csv(std::ostream& out, const std::vector<RdCurve>& curves) {
    out << "video_id,encoder_id,use_case,bitrate_kbps,plot_score\n";
    for (const RdCurve& c : curves)
        for (const RdPoint& p : invert_for_plot(c))
            out << c.key.video_id << ',' << c.key.encoder_id << ',' << c.key.use_case << ','
                << detail::g9(p.bitrate_kbps) << ',' << detail::g9(p.score) << '\n';
}

inline void write_violations_csv(std::ostream& out, const std::vector<RdCurve>& curves) {
    out << "video_id,encoder_id,use_case,bitrate_low_kbps,bitrate_high_kbps,delta\n";
    for (const RdCurve& c : curves)
        for (const RdViolation& v : c.violations)
            out << c.key.video_id << ',' << c.key.encoder_id << ',' << c.key.use_case << ','
                << detail::g9(v.bitrate_low) << ',' << detail::g9(v.bitrate_high) << ','
                << detail::g9(v.delta) << '\n';
}

inline nlohmann::json pooled_to_json(const PooledScore& p) {
    return nlohmann::json{{"score", p.score},
                          {"method", to_string(p.method)},
                          {"total_weight", p.total_weight},
                          {"frames_total", p.frames_total},
                          {"frames_zero_weight", p.frames_zero_weight},
                          {"fallback_used", p.fallback_used}};
}

inline nlohmann::json correlation_to_json(const CorrelationReport& c) {
    nlohmann::json per_video = nlohmann::json::array();
    for (const VideoCorrelation& v : c.per_video)
        per_video.push_back({{"video_id", v.video_id},
                             {"pearson_r", v.r},
                             {"matched_points", v.matched_points}});
    return nlohmann::json{{"per_video", std::move(per_video)},
                          {"average_r", c.average_r},
                          {"skipped_videos", c.skipped_videos}};
}

// A stream that could not be measured; recorded, never silently dropped.
struct StreamFailure {
    StreamKey key;
    double bitrate_kbps = 0.0;
    std::string path;
    std::string message;
};

// Everything a measurement run produced, bundled for emission.
struct AnalysisBundle {
    std::vector<StreamMeasurement> streams;  // measurement order
    std::vector<RdCurve> curves;
    std::optional<CorrelationReport> correlations;
    std::vector<StreamFailure> failures;
    std::string model_settings_hash;
};

inline nlohmann::json report_json(const AnalysisBundle& bundle) {
    nlohmann::json streams = nlohmann::json::array();
    for (const StreamMeasurement& s : bundle.streams) {
        nlohmann::json frames = nlohmann::json::array();
        const auto diags = diagnose_frames(s.frames);
        for (std::size_t i = 0; i < s.frames.size(); ++i) {
            const FrameScore& f = s.frames[i];
            frames.push_back({{"frame_index", f.frame_index},
                              {"score", f.score},
                              {"weight", diags[i].weight},
                              {"dark_frame", diags[i].dark_frame},
                              {"outlier_score", diags[i].outlier_score},
                              {"patch_count", f.patch_count},
                              {"mean_luma", f.mean_luma},
                              {"degenerate_frame", f.degenerate_frame},
                              {"covariance_fallback", f.covariance_fallback}});
        }
        streams.push_back({{"video_id", s.key.video_id},
                           {"encoder_id", s.key.encoder_id},
                           {"use_case", s.key.use_case},
                           {"bitrate_kbps", s.bitrate_kbps},
                           {"source_path", s.source_path},
                           {"pooled_weighted", pooled_to_json(s.weighted)},
                           {"pooled_mean", pooled_to_json(s.mean)},
                           {"frames", std::move(frames)}});
    }

    nlohmann::json curves = nlohmann::json::array();
    for (const RdCurve& c : bundle.curves) {
        nlohmann::json points = nlohmann::json::array();
        for (const RdPoint& p : c.points)
            points.push_back({{"bitrate_kbps", p.bitrate_kbps}, {"score", p.score}});
        nlohmann::json violations = nlohmann::json::array();
        for (const RdViolation& v : c.violations)
            violations.push_back({{"bitrate_low_kbps", v.bitrate_low},
                                  {"bitrate_high_kbps", v.bitrate_high},
                                  {"delta", v.delta}});
        curves.push_back({{"video_id", c.key.video_id},
                          {"encoder_id", c.key.encoder_id},
                          {"use_case", c.key.use_case},
                          {"points", std::move(points)},
                          {"violations", std::move(violations)}});
    }

    nlohmann::json failures = nlohmann::json::array();
    for (const StreamFailure& f : bundle.failures)
        failures.push_back({{"video_id", f.key.video_id},
                            {"encoder_id", f.key.encoder_id},
                            {"use_case", f.key.use_case},
                            {"bitrate_kbps", f.bitrate_kbps},
                            {"path", f.path},
                            {"message", f.message}});

    nlohmann::json j;
    j["format_version"] = 1;
    j["model_settings_hash"] = bundle.model_settings_hash;
    j["streams"] = std::move(streams);
    j["curves"] = std::move(curves);
    j["failures"] = std::move(failures);
    j["correlations"] =
        bundle.correlations ? correlation_to_json(*bundle.correlations) : nlohmann::json();
    return j;
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out.is_open()) throw IoFailure("cannot write: " + path.string());
    return out;
}

}  // namespace detail

// Per-frame CSV per stream, a stream summary CSV and the JSON machine report.
inline void emit_report(const AnalysisBundle& bundle, const std::string& out_dir) {
    const std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoFailure("cannot create output directory: " + out_dir);

    std::vector<StreamRecord> records;
    records.reserve(bundle.streams.size());
    for (const StreamMeasurement& s : bundle.streams) {
        records.push_back(s.record());
        auto out = detail::open_output(dir / per_frame_csv_name(s.key, s.bitrate_kbps));
        write_per_frame_csv(out, s.frames);
        if (!out.good()) throw IoFailure("failed writing per-frame csv for " + s.key.label());
    }

    auto summary = detail::open_output(dir / "summary.csv");
    write_summary_csv(summary, records, bundle.curves);
    if (!summary.good()) throw IoFailure("failed writing summary.csv");

    auto report = detail::open_output(dir / "report.json");
    report << report_json(bundle).dump(2) << '\n';
    if (!report.good()) throw IoFailure("failed writing report.json");
}

}  // namespace nrvq
