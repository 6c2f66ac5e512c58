#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nrvq/errors.hpp"
#include "nrvq/image_ops.hpp"

namespace nrvq {

// Only the 4:2:0 family is accepted; everything else is rejected loudly
// rather than mis-sliced.
enum class ChromaFormat { yuv420 };

struct VideoGeometry {
    int width = 0;
    int height = 0;
    std::int64_t fps_num = 25;
    std::int64_t fps_den = 1;
    ChromaFormat chroma = ChromaFormat::yuv420;
    int bit_depth = 8;

    std::size_t luma_bytes() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    std::size_t chroma_bytes() const {
        const std::size_t cw = static_cast<std::size_t>((width + 1) / 2);
        const std::size_t ch = static_cast<std::size_t>((height + 1) / 2);
        return 2 * cw * ch;
    }
    std::size_t frame_bytes() const { return luma_bytes() + chroma_bytes(); }
};

inline void validate_geometry(const VideoGeometry& g) {
    if (g.width <= 0 || g.height <= 0)
        throw MissingDimension("geometry: width and height must be positive");
    if (g.fps_den <= 0 || g.fps_num <= 0)
        throw MissingDimension("geometry: frame rate must be positive");
    if (g.bit_depth != 8)
        throw UnsupportedBitDepth("geometry: only 8-bit video is supported");
}

namespace detail {

inline std::int64_t parse_int(std::string_view text, const char* what) {
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || value <= 0)
        throw MissingDimension(std::string("y4m header: bad ") + what);
    return value;
}

}  // namespace detail

// Parses a YUV4MPEG2 header up to the first newline. Parameters are
// space-separated tags; chroma defaults to 4:2:0 when no C tag is present.
inline VideoGeometry parse_y4m_header(std::string_view bytes) {
    static constexpr std::string_view kMagic = "YUV4MPEG2";
    if (bytes.substr(0, kMagic.size()) != kMagic)
        throw BadSignature("y4m: missing YUV4MPEG2 signature");

    const std::size_t eol = bytes.find('\n');
    if (eol == std::string_view::npos)
        throw BadSignature("y4m: header line is not newline-terminated");

    VideoGeometry g;
    bool have_w = false, have_h = false;

    std::string_view line = bytes.substr(kMagic.size(), eol - kMagic.size());
    while (!line.empty()) {
        if (line.front() == ' ') {
            line.remove_prefix(1);
            continue;
        }
        const std::size_t end = line.find(' ');
        const std::string_view tag = line.substr(0, end);
        line.remove_prefix(end == std::string_view::npos ? line.size() : end);

        switch (tag.front()) {
            case 'W':
                g.width = static_cast<int>(detail::parse_int(tag.substr(1), "width"));
                have_w = true;
                break;
            case 'H':
                g.height = static_cast<int>(detail::parse_int(tag.substr(1), "height"));
                have_h = true;
                break;
            case 'F': {
                const std::string_view body = tag.substr(1);
                const std::size_t colon = body.find(':');
                if (colon == std::string_view::npos)
                    throw MissingDimension("y4m header: bad frame rate");
                g.fps_num = detail::parse_int(body.substr(0, colon), "frame rate");
                g.fps_den = detail::parse_int(body.substr(colon + 1), "frame rate");
                break;
            }
            case 'C': {
                const std::string_view body = tag.substr(1);
                if (body.substr(0, 3) != "420")
                    throw UnsupportedChroma("y4m: only the 4:2:0 family is supported, got C" +
                                            std::string(body));
                const std::string_view variant = body.substr(3);
                if (variant.empty() || variant == "jpeg" || variant == "paldv" ||
                    variant == "mpeg2") {
                    g.chroma = ChromaFormat::yuv420;
                } else if (variant.front() == 'p') {
                    throw UnsupportedBitDepth("y4m: only 8-bit streams are supported, got C" +
                                              std::string(body));
                } else {
                    throw UnsupportedChroma("y4m: unknown chroma tag C" + std::string(body));
                }
                break;
            }
            default:
                break;  // I, A, X tags carry nothing the luma path needs
        }
    }

    if (!have_w || !have_h)
        throw MissingDimension("y4m header: W and H are required");
    validate_geometry(g);
    return g;
}

// Pull-based luma source: frames are produced incrementally in presentation
// order so long streams never need whole-file residency. A single reader
// consumes a source; the planes it hands out are independent values.
class FrameSource {
public:
    virtual ~FrameSource() = default;

    virtual const VideoGeometry& geometry() const = 0;

    // Total frame count when the container makes it knowable up front.
    virtual std::optional<std::size_t> frame_count() const = 0;

    // Next luma plane, or nullopt at a clean end of stream. Malformed input
    // throws a typed error; no partial plane is ever returned.
    virtual std::optional<LumaPlane> next() = 0;
};

namespace detail {

inline void read_exact(std::istream& in, char* dst, std::size_t n, const char* what) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw TruncatedFrame(std::string("unexpected end of stream inside ") + what);
}

inline void skip_exact(std::istream& in, std::size_t n, const char* what) {
    in.ignore(static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw TruncatedFrame(std::string("unexpected end of stream inside ") + what);
}

}  // namespace detail

class Y4mReader final : public FrameSource {
public:
    explicit Y4mReader(std::unique_ptr<std::istream> in) : in_(std::move(in)) {
        std::string header;
        char c = 0;
        while (in_->get(c)) {
            header.push_back(c);
            if (c == '\n') break;
            if (header.size() > kMaxHeaderBytes)
                throw BadSignature("y4m: header line exceeds 4096 bytes");
        }
        geometry_ = parse_y4m_header(header);
    }

    const VideoGeometry& geometry() const override { return geometry_; }

    // Y4M streams do not declare a frame count.
    std::optional<std::size_t> frame_count() const override { return std::nullopt; }

    std::optional<LumaPlane> next() override {
        char c = 0;
        if (!in_->get(c)) return std::nullopt;  // clean end of stream

        // FRAME marker line, optionally carrying parameters until newline
        static constexpr std::string_view kMarker = "FRAME";
        std::string line(1, c);
        while (line.size() < kMarker.size() && in_->get(c)) line.push_back(c);
        if (line != kMarker)
            throw BadFrameMarker("y4m: expected FRAME marker, got '" + line + "'");
        for (;;) {
            if (!in_->get(c)) throw TruncatedFrame("y4m: unterminated FRAME marker line");
            if (c == '\n') break;
            if (line.size() > kMaxHeaderBytes)
                throw BadFrameMarker("y4m: FRAME parameter line exceeds 4096 bytes");
            line.push_back(c);
        }

        LumaPlane plane(geometry_.width, geometry_.height);
        detail::read_exact(*in_, reinterpret_cast<char*>(plane.samples.data()),
                           plane.samples.size(), "luma plane");
        detail::skip_exact(*in_, geometry_.chroma_bytes(), "chroma planes");
        return plane;
    }

private:
    static constexpr std::size_t kMaxHeaderBytes = 4096;

    std::unique_ptr<std::istream> in_;
    VideoGeometry geometry_;
};

// Headerless planar 4:2:0 with caller-supplied geometry. The byte size must
// be an exact multiple of the per-frame size.
class RawYuvReader final : public FrameSource {
public:
    RawYuvReader(std::unique_ptr<std::istream> in, const VideoGeometry& geometry,
                 std::uintmax_t byte_size)
        : in_(std::move(in)), geometry_(geometry) {
        validate_geometry(geometry_);
        const std::uintmax_t per_frame = geometry_.frame_bytes();
        if (byte_size % per_frame != 0)
            throw SizeMismatch("raw yuv: file size " + std::to_string(byte_size) +
                               " is not a multiple of the frame size " + std::to_string(per_frame));
        total_ = static_cast<std::size_t>(byte_size / per_frame);
    }

    const VideoGeometry& geometry() const override { return geometry_; }
    std::optional<std::size_t> frame_count() const override { return total_; }

    std::optional<LumaPlane> next() override {
        if (delivered_ == total_) return std::nullopt;
        LumaPlane plane(geometry_.width, geometry_.height);
        detail::read_exact(*in_, reinterpret_cast<char*>(plane.samples.data()),
                           plane.samples.size(), "luma plane");
        detail::skip_exact(*in_, geometry_.chroma_bytes(), "chroma planes");
        ++delivered_;
        return plane;
    }

private:
    std::unique_ptr<std::istream> in_;
    VideoGeometry geometry_;
    std::size_t total_ = 0;
    std::size_t delivered_ = 0;
};

// Materialized stream for tests and small clips.
struct FrameStream {
    VideoGeometry geometry;
    std::vector<LumaPlane> frames;
};

inline FrameStream drain(FrameSource& source) {
    FrameStream out;
    out.geometry = source.geometry();
    while (auto plane = source.next()) out.frames.push_back(std::move(*plane));
    return out;
}

inline FrameStream read_frames(std::unique_ptr<std::istream> in) {
    Y4mReader reader(std::move(in));
    return drain(reader);
}

inline std::unique_ptr<std::istream> open_binary(const std::string& path) {
    auto in = std::make_unique<std::ifstream>(path, std::ios::binary);
    if (!in->is_open()) throw IoFailure("cannot open file: " + path);
    return in;
}

inline std::unique_ptr<FrameSource> open_y4m(const std::string& path) {
    return std::make_unique<Y4mReader>(open_binary(path));
}

inline std::unique_ptr<FrameSource> open_raw_yuv(const std::string& path,
                                                 const VideoGeometry& geometry) {
    std::error_code ec;
    const std::uintmax_t size = std::filesystem::file_size(path, ec);
    if (ec) throw IoFailure("cannot stat file: " + path);
    return std::make_unique<RawYuvReader>(open_binary(path), geometry, size);
}

inline FrameStream read_raw_yuv(const std::string& path, const VideoGeometry& geometry) {
    auto source = open_raw_yuv(path, geometry);
    return drain(*source);
}

// Binary PGM (P5), maxval 255. Header comments are skipped.
inline LumaPlane read_pgm(std::istream& in) {
    const auto next_token = [&in]() -> std::string {
        std::string token;
        char c = 0;
        while (in.get(c)) {
            if (c == '#') {
                while (in.get(c) && c != '\n') {
                }
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                if (!token.empty()) return token;
                continue;
            }
            token.push_back(c);
        }
        return token;
    };

    const std::string magic = next_token();
    if (magic != "P5")
        throw BadMagic("pgm: expected binary P5, got '" + magic + "'");

    const auto parse_dim = [](const std::string& token, const char* what) {
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (ec != std::errc{} || ptr != token.data() + token.size() || v <= 0)
            throw MissingDimension(std::string("pgm: bad ") + what);
        return v;
    };

    const std::int64_t width = parse_dim(next_token(), "width");
    const std::int64_t height = parse_dim(next_token(), "height");
    const std::int64_t maxval = parse_dim(next_token(), "maxval");
    if (maxval != 255)
        throw UnsupportedMaxval("pgm: only maxval 255 is supported, got " +
                                std::to_string(maxval));

    // exactly one whitespace byte separates the header from the raster
    LumaPlane plane(static_cast<int>(width), static_cast<int>(height));
    detail::read_exact(in, reinterpret_cast<char*>(plane.samples.data()), plane.samples.size(),
                       "pgm raster");
    return plane;
}

inline LumaPlane read_pgm(const std::string& path) {
    const auto in = open_binary(path);
    return read_pgm(*in);
}

}  // namespace nrvq
