// nrvq: no-reference video quality measurement over NIQE with
// outlier-suppressing temporal pooling and rate-distortion analytics.
//
// Exit codes: 0 success (including partial batch success),
//             2 input contract violation, 3 environment/IO failure.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nrvq/pipeline.hpp"

namespace {

std::optional<nrvq::VideoGeometry> make_raw_geometry(int width, int height,
                                                     const std::string& fps) {
    if (width <= 0 && height <= 0) return std::nullopt;
    nrvq::VideoGeometry g;
    g.width = width;
    g.height = height;
    if (!fps.empty()) {
        const auto colon = fps.find(':');
        try {
            if (colon == std::string::npos) {
                g.fps_num = std::stoll(fps);
                g.fps_den = 1;
            } else {
                g.fps_num = std::stoll(fps.substr(0, colon));
                g.fps_den = std::stoll(fps.substr(colon + 1));
            }
        } catch (const std::exception&) {
            throw CLI::ValidationError("--fps", "expected N or N:D");
        }
    }
    return g;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"no-reference video quality measurement (NIQE + weighted temporal pooling)"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "fit a pristine model from a corpus directory");
    nrvq::TrainOptions train_opt;
    train->add_option("corpus_dir", train_opt.corpus_dir, "directory of .pgm/.y4m sources")
        ->required();
    train->add_option("--model", train_opt.model_path, "output model file (JSON)")->required();
    train->add_option("--patch-size", train_opt.patch_size, "patch size in pixels (even, >= 20)")
        ->capture_default_str();
    train
        ->add_option("--sharpness-fraction", train_opt.sharpness_fraction,
                     "keep patches at or above this fraction of peak sharpness")
        ->capture_default_str();

    // measure
    auto* measure = app.add_subcommand("measure", "score every stream in a manifest");
    nrvq::MeasureOptions measure_opt;
    int raw_width = 0, raw_height = 0;
    std::string raw_fps;
    std::optional<int> jobs_flag;
    measure->add_option("--manifest", measure_opt.manifest_path, "stream manifest (.csv or .json)")
        ->required();
    measure->add_option("--model", measure_opt.model_path, "model file (overrides manifest)");
    measure->add_option("--out-dir", measure_opt.out_dir, "output directory (overrides manifest)");
    measure->add_option("--jobs", jobs_flag,
                        "frame-scoring parallelism (fallback: NRVQ_JOBS, manifest, 1)");
    measure->add_option("--width", raw_width, "default raw YUV width");
    measure->add_option("--height", raw_height, "default raw YUV height");
    measure->add_option("--fps", raw_fps, "default raw YUV frame rate (N or N:D)");

    // rd
    auto* rd = app.add_subcommand("rd", "rate-distortion curves and monotonicity report");
    nrvq::RdOptions rd_opt;
    rd->add_option("summary", rd_opt.summary_path, "summary.csv from measure")->required();
    rd->add_option("--out-dir", rd_opt.out_dir, "output directory")->required();

    // correlate
    auto* correlate =
        app.add_subcommand("correlate", "per-video Pearson correlation against subjective scores");
    nrvq::CorrelateOptions corr_opt;
    correlate->add_option("summary", corr_opt.summary_path, "summary.csv from measure")
        ->required();
    correlate
        ->add_option("subjective", corr_opt.subjective_path,
                     "subjective table csv (video_id,encoder_id,use_case,bitrate_kbps,mos)")
        ->required();
    correlate->add_option("--out", corr_opt.out_path, "output JSON report")
        ->default_val("correlation.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (train->parsed()) return nrvq::run_train(train_opt, std::cout, std::cerr);
    if (measure->parsed()) {
        measure_opt.jobs = jobs_flag;
        try {
            measure_opt.default_raw_geometry = make_raw_geometry(raw_width, raw_height, raw_fps);
        } catch (const CLI::ParseError& e) {
            app.exit(e);
            return 2;
        }
        return nrvq::run_measure(measure_opt, std::cout, std::cerr);
    }
    if (rd->parsed()) return nrvq::run_rd(rd_opt, std::cout, std::cerr);
    if (correlate->parsed()) return nrvq::run_correlate(corr_opt, std::cout, std::cerr);
    return 2;
}
