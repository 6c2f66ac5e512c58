#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nrvq/analysis.hpp"
#include "nrvq/manifest.hpp"
#include "nrvq/model_io.hpp"
#include "nrvq/niqe.hpp"
#include "nrvq/pooling.hpp"
#include "nrvq/video_io.hpp"

namespace nrvq {

// Scores every frame of a source. Frames are scored concurrently by up to
// `jobs` workers over a bounded queue, results land at their frame index, so
// the output is byte-identical for any job count.
inline FrameScoreSeries score_stream(FrameSource& source, const NiqeModel& model, int jobs) {
    jobs = std::max(jobs, 1);

    if (jobs == 1) {
        FrameScoreSeries out;
        std::int64_t index = 0;
        while (auto plane = source.next()) out.push_back(score_frame(*plane, model, index++));
        return out;
    }

    struct Shared {
        std::mutex mu;
        std::condition_variable space, item;
        std::deque<std::pair<std::int64_t, LumaPlane>> queue;
        bool done = false;
        std::exception_ptr error;
        FrameScoreSeries results;
    } shared;
    const std::size_t capacity = static_cast<std::size_t>(2 * jobs);

    const auto worker = [&shared, &model] {
        for (;;) {
            std::pair<std::int64_t, LumaPlane> task;
            {
                std::unique_lock lock(shared.mu);
                shared.item.wait(lock, [&] {
                    return !shared.queue.empty() || shared.done || shared.error;
                });
                if (shared.error || (shared.queue.empty() && shared.done)) return;
                task = std::move(shared.queue.front());
                shared.queue.pop_front();
            }
            shared.space.notify_one();
            try {
                const FrameScore score = score_frame(task.second, model, task.first);
                std::lock_guard lock(shared.mu);
                if (shared.results.size() <= static_cast<std::size_t>(task.first))
                    shared.results.resize(static_cast<std::size_t>(task.first) + 1);
                shared.results[static_cast<std::size_t>(task.first)] = score;
            } catch (...) {
                std::lock_guard lock(shared.mu);
                if (!shared.error) shared.error = std::current_exception();
                shared.item.notify_all();
                shared.space.notify_all();
                return;
            }
        }
    };

    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(jobs));
    for (int i = 0; i < jobs; ++i) workers.emplace_back(worker);

    std::int64_t index = 0;
    try {
        while (auto plane = source.next()) {
            std::unique_lock lock(shared.mu);
            shared.space.wait(lock,
                              [&] { return shared.queue.size() < capacity || shared.error; });
            if (shared.error) break;
            shared.queue.emplace_back(index++, std::move(*plane));
            lock.unlock();
            shared.item.notify_one();
        }
    } catch (...) {
        std::lock_guard lock(shared.mu);
        if (!shared.error) shared.error = std::current_exception();
    }

    {
        std::lock_guard lock(shared.mu);
        shared.done = true;
    }
    shared.item.notify_all();
    for (auto& t : workers) t.join();

    if (shared.error) std::rethrow_exception(shared.error);
    return shared.results;
}

namespace detail {

// Streaming FNV-1a, used to fingerprint training corpora.
class Fnv1aHasher {
public:
    void update(const std::uint8_t* data, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            hash_ ^= data[i];
            hash_ *= 1099511628211ull;
        }
    }
    std::string hex() const { return hex64(hash_); }

private:
    std::uint64_t hash_ = 1469598103934665603ull;
};

inline bool has_extension(const std::filesystem::path& p, const char* ext) {
    return p.extension().string() == ext;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Command implementations. Each returns a process exit code:
//   0 success (including partial batch success)
//   2 input contract violation
//   3 environment / IO failure
// ---------------------------------------------------------------------------

struct TrainOptions {
    std::string corpus_dir;
    std::string model_path;
    int patch_size = 96;
    double sharpness_fraction = 0.75;
};

inline int run_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
    try {
        std::vector<std::filesystem::path> sources;
        {
            std::error_code ec;
            std::filesystem::directory_iterator it(opt.corpus_dir, ec);
            if (ec) throw IoFailure("cannot read corpus directory: " + opt.corpus_dir);
            for (const auto& entry : it)
                if (entry.is_regular_file() &&
                    (detail::has_extension(entry.path(), ".pgm") ||
                     detail::has_extension(entry.path(), ".y4m")))
                    sources.push_back(entry.path());
        }
        std::sort(sources.begin(), sources.end());
        if (sources.empty())
            throw InsufficientPatches("no .pgm or .y4m sources in " + opt.corpus_dir);

        NiqeSettings settings;
        settings.patch_size = opt.patch_size;
        settings.sharpness_fraction = opt.sharpness_fraction;

        std::vector<FeatureVector> features;
        detail::Fnv1aHasher corpus_hash;
        std::size_t frame_count = 0;
        for (const auto& path : sources) {
            const auto ingest = [&](const LumaPlane& plane) {
                corpus_hash.update(plane.samples.data(), plane.samples.size());
                ++frame_count;
                auto fp =
                    frame_patch_features(plane, settings.patch_size, settings.sharpness_fraction);
                features.insert(features.end(), fp.features.begin(), fp.features.end());
            };
            try {
                if (detail::has_extension(path, ".pgm")) {
                    ingest(read_pgm(path.string()));
                } else {
                    const auto source = open_y4m(path.string());
                    while (auto plane = source->next()) ingest(*plane);
                }
            } catch (const IoFailure&) {
                throw;
            } catch (const Error& e) {
                throw InvalidParameter("corpus file " + path.string() + ": " + e.what());
            }
        }

        const std::string descriptor = "dir=" + opt.corpus_dir +
                                       " files=" + std::to_string(sources.size()) +
                                       " frames=" + std::to_string(frame_count) +
                                       " luma_fnv1a=" + corpus_hash.hex();
        const NiqeModel model = train_model_from_features(features, settings, descriptor);
        save_model(model, opt.model_path);

        out << "model: " << opt.model_path << "\n"
            << "patches: " << features.size() << "\n"
            << "frames: " << frame_count << "\n"
            << "corpus_hash: " << corpus_hash.hex() << "\n"
            << "settings_hash: " << settings_hash(model) << "\n";
        return 0;
    } catch (const IoFailure& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

struct MeasureOptions {
    std::string manifest_path;
    std::string model_path;   // overrides the manifest when set
    std::string out_dir;      // overrides the manifest when set
    std::optional<int> jobs;  // flag > NRVQ_JOBS > manifest > 1
    std::optional<VideoGeometry> default_raw_geometry;
};

namespace detail {

inline int resolve_jobs(const std::optional<int>& flag, const std::optional<int>& manifest_hint) {
    if (flag && *flag >= 1) return *flag;
    if (const char* env = std::getenv("NRVQ_JOBS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
    }
    if (manifest_hint && *manifest_hint >= 1) return *manifest_hint;
    return 1;
}

}  // namespace detail

inline int run_measure(const MeasureOptions& opt, std::ostream& out, std::ostream& err) {
    MeasurementManifest manifest;
    NiqeModel model;
    std::string out_dir;
    try {
        manifest = load_manifest(opt.manifest_path);
        const std::string model_path =
            !opt.model_path.empty() ? opt.model_path : manifest.model_path;
        if (model_path.empty())
            throw ManifestError("no model path given (use --model or the manifest)");
        model = load_model(model_path);
        out_dir = !opt.out_dir.empty() ? opt.out_dir : manifest.output_dir;
        if (out_dir.empty())
            throw ManifestError("no output directory given (use --out-dir or the manifest)");
    } catch (const IoFailure& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    const int jobs = detail::resolve_jobs(opt.jobs, manifest.parallelism);

    AnalysisBundle bundle;
    bundle.model_settings_hash = settings_hash(model);
    for (const StreamEntry& entry : manifest.streams) {
        try {
            std::unique_ptr<FrameSource> source;
            if (entry.format == StreamFormat::y4m) {
                source = open_y4m(entry.path);
            } else {
                std::optional<VideoGeometry> geometry = entry.geometry;
                if (!geometry) geometry = opt.default_raw_geometry;
                if (!geometry)
                    throw ManifestError("raw stream " + entry.key.label() +
                                        " needs geometry (manifest columns or --width/--height)");
                source = open_raw_yuv(entry.path, *geometry);
            }

            StreamMeasurement m;
            m.key = entry.key;
            m.bitrate_kbps = entry.bitrate_kbps;
            m.source_path = entry.path;
            m.frames = score_stream(*source, model, jobs);
            if (m.frames.empty()) throw EmptySeries("stream has no frames: " + entry.path);
            m.weighted = pool_weighted(m.frames);
            m.mean = pool_mean(m.frames);
            bundle.streams.push_back(std::move(m));
        } catch (const Error& e) {
            bundle.failures.push_back(
                StreamFailure{entry.key, entry.bitrate_kbps, entry.path, e.what()});
            err << "stream failed: " << entry.key.label() << " @ "
                << detail::g9(entry.bitrate_kbps) << " kbps: " << e.what() << "\n";
        }
    }

    std::vector<StreamRecord> records;
    records.reserve(bundle.streams.size());
    for (const auto& s : bundle.streams) records.push_back(s.record());
    try {
        bundle.curves = build_rd_curves(records);
        emit_report(bundle, out_dir);
    } catch (const IoFailure& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    out << "streams measured: " << bundle.streams.size() << "\n"
        << "streams failed: " << bundle.failures.size() << "\n"
        << "jobs: " << jobs << "\n"
        << "output: " << out_dir << "\n";
    if (!manifest.streams.empty() && bundle.streams.empty()) {
        err << "error: every stream in the batch failed\n";
        return 3;
    }
    return 0;
}

struct RdOptions {
    std::string summary_path;
    std::string out_dir;
};

inline int run_rd(const RdOptions& opt, std::ostream& out, std::ostream& err) {
    try {
        std::ifstream in(opt.summary_path, std::ios::binary);
        if (!in.is_open()) throw IoFailure("cannot open summary: " + opt.summary_path);
        const auto records = read_summary_csv(in);
        const auto curves = build_rd_curves(records);

        const std::filesystem::path dir(opt.out_dir);
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoFailure("cannot create output directory: " + opt.out_dir);

        auto rd = detail::open_output(dir / "rd.csv");
        write_rd_csv(rd, curves);
        auto plot = detail::open_output(dir / "plotdata.csv");
        write_plot_csv(plot, curves);
        auto violations = detail::open_output(dir / "violations.csv");
        write_violations_csv(violations, curves);

        std::size_t total = 0;
        for (const RdCurve& c : curves) {
            for (const RdViolation& v : c.violations) {
                ++total;
                out << "violation: " << c.key.label() << " " << detail::g9(v.bitrate_low) << " -> "
                    << detail::g9(v.bitrate_high) << " kbps, delta " << detail::g9(v.delta)
                    << "\n";
            }
        }
        out << "curves: " << curves.size() << "\n"
            << "violations: " << total << "\n"
            << "output: " << opt.out_dir << "\n";
        return 0;
    } catch (const IoFailure& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

struct CorrelateOptions {
    std::string summary_path;
    std::string subjective_path;
    std::string out_path;  // JSON report
};

inline int run_correlate(const CorrelateOptions& opt, std::ostream& out, std::ostream& err) {
    try {
        std::ifstream summary_in(opt.summary_path, std::ios::binary);
        if (!summary_in.is_open()) throw IoFailure("cannot open summary: " + opt.summary_path);
        std::ifstream subjective_in(opt.subjective_path, std::ios::binary);
        if (!subjective_in.is_open())
            throw IoFailure("cannot open subjective table: " + opt.subjective_path);

        const auto records = read_summary_csv(summary_in);
        const auto subjective = read_subjective_csv(subjective_in);
        const auto report = correlate_with_subjective(records, subjective);
        if (report.per_video.empty())
            throw InsufficientOverlap("no video has at least 3 matched subjective points");

        for (const VideoCorrelation& v : report.per_video)
            out << v.video_id << ": r = " << detail::g9(v.r) << " (" << v.matched_points
                << " points)\n";
        out << "average_r: " << detail::g9(report.average_r) << "\n";
        for (const auto& skipped : report.skipped_videos)
            out << "skipped (insufficient overlap): " << skipped << "\n";

        auto json_out = detail::open_output(opt.out_path);
        json_out << correlation_to_json(report).dump(2) << '\n';
        if (!json_out.good()) throw IoFailure("failed writing " + opt.out_path);
        return 0;
    } catch (const IoFailure& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace nrvq
