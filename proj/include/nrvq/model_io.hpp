#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>

#include <json.hpp>

#include "nrvq/errors.hpp"
#include "nrvq/niqe.hpp"

namespace nrvq {

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kModelKind = "nrvq-niqe-model";

namespace detail {

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

inline nlohmann::json settings_json(const NiqeModel& m) {
    return nlohmann::json{
        {"patch_size", m.patch_size},
        {"sharpness_fraction", m.sharpness_fraction},
        {"nss",
         {{"window_half_extent", m.nss.window_half_extent},
          {"window_sigma", m.nss.window_sigma},
          {"normalization_c", m.nss.normalization_c},
          {"border", m.nss.border},
          {"downsample", m.nss.downsample}}}};
}

}  // namespace detail

// Stable fingerprint of everything that makes scores comparable.
inline std::string settings_hash(const NiqeModel& m) {
    return detail::hex64(detail::fnv1a64(detail::settings_json(m).dump()));
}

inline nlohmann::json model_to_json(const NiqeModel& m) {
    nlohmann::json j;
    j["kind"] = kModelKind;
    j["format_version"] = kModelFormatVersion;
    j["corpus_descriptor"] = m.corpus_descriptor;
    j["settings"] = detail::settings_json(m);
    j["sample_count"] = m.mvg.sample_count;

    nlohmann::json mean = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.mvg.mean.size(); ++i) mean.push_back(m.mvg.mean(i));
    j["mean"] = std::move(mean);

    // row-major covariance
    nlohmann::json cov = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.mvg.covariance.rows(); ++r)
        for (Eigen::Index c = 0; c < m.mvg.covariance.cols(); ++c)
            cov.push_back(m.mvg.covariance(r, c));
    j["covariance"] = std::move(cov);
    return j;
}

inline NiqeModel model_from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("kind", std::string{}) != kModelKind)
        throw ModelFormatError("model file: unrecognized document kind");
    if (j.value("format_version", -1) != kModelFormatVersion)
        throw ModelFormatError("model file: unsupported format_version");

    NiqeModel m;
    try {
        const auto& settings = j.at("settings");
        m.patch_size = settings.at("patch_size").get<int>();
        m.sharpness_fraction = settings.at("sharpness_fraction").get<double>();
        const auto& nss = settings.at("nss");
        m.nss.window_half_extent = nss.at("window_half_extent").get<int>();
        m.nss.window_sigma = nss.at("window_sigma").get<double>();
        m.nss.normalization_c = nss.at("normalization_c").get<double>();
        m.nss.border = nss.at("border").get<std::string>();
        m.nss.downsample = nss.at("downsample").get<std::string>();
        m.corpus_descriptor = j.value("corpus_descriptor", std::string{});

        const auto& mean = j.at("mean");
        const auto& cov = j.at("covariance");
        const Eigen::Index dim = static_cast<Eigen::Index>(mean.size());
        if (dim != kFeatureDim)
            throw ModelFormatError("model file: mean must have 36 entries");
        if (static_cast<Eigen::Index>(cov.size()) != dim * dim)
            throw ModelFormatError("model file: covariance size does not match the mean");

        m.mvg.mean.resize(dim);
        for (Eigen::Index i = 0; i < dim; ++i)
            m.mvg.mean(i) = mean.at(static_cast<std::size_t>(i)).get<double>();
        m.mvg.covariance.resize(dim, dim);
        for (Eigen::Index r = 0; r < dim; ++r)
            for (Eigen::Index c = 0; c < dim; ++c)
                m.mvg.covariance(r, c) =
                    cov.at(static_cast<std::size_t>(r * dim + c)).get<double>();
        m.mvg.sample_count = j.at("sample_count").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("model file: ") + e.what());
    }

    // the scoring pipeline is only valid for the settings it was built with
    if (m.nss != NssSettings{})
        throw ModelFormatError("model file: NSS settings do not match this build");
    detail::validate_niqe_settings(m.patch_size, m.sharpness_fraction);

    const double scale = m.mvg.covariance.cwiseAbs().maxCoeff();
    const double asym = (m.mvg.covariance - m.mvg.covariance.transpose()).cwiseAbs().maxCoeff();
    if (scale > 0.0 && asym > 1e-9 * scale)
        throw ModelFormatError("model file: covariance is not symmetric");
    m.mvg.covariance = 0.5 * (m.mvg.covariance + m.mvg.covariance.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.mvg.covariance);
    if (es.eigenvalues().minCoeff() < -1e-9 * m.mvg.covariance.trace())
        throw ModelFormatError("model file: covariance is not positive semidefinite");

    return m;
}

inline void save_model(const NiqeModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out.is_open()) throw IoFailure("cannot write model file: " + path);
    out << model_to_json(m).dump(2) << '\n';
    if (!out.good()) throw IoFailure("failed while writing model file: " + path);
}

inline NiqeModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) throw IoFailure("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("model file: invalid JSON: ") + e.what());
    }
    return model_from_json(j);
}

}  // namespace nrvq
