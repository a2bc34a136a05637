#include "lytnet/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "lytnet/error.hpp"

namespace lytnet {

namespace {

constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t end = line.find(sep, start);
        fields.push_back(trim(line.substr(start, end - start)));
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return fields;
}

[[noreturn]] void label_error(int line, const std::string& what) {
    throw FormatError("line " + std::to_string(line) + ": " + what);
}

double parse_double(std::string_view field, int line, const char* name) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) {
        label_error(line, std::string("bad number for ") + name + ": '" + std::string(field) + "'");
    }
    return value;
}

std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

void require_rgb(const Tensor& image, const char* op) {
    if (image.channels() != 3) {
        throw ValidationError(std::string(op) + " needs a 3-channel image, got " + to_string(image.shape()));
    }
}

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform_draw(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_draw(rng); }

void check_range(double r, const char* name) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
        throw ValidationError(std::string("jitter range '") + name + "' must be finite and >= 0");
    }
}

// h, s, v in [0, 1].
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    v = mx;
    s = mx > 0.0 ? delta / mx : 0.0;
    if (delta <= 0.0) {
        h = 0.0;
        return;
    }
    double sector;
    if (mx == r) {
        sector = (g - b) / delta;
    } else if (mx == g) {
        sector = 2.0 + (b - r) / delta;
    } else {
        sector = 4.0 + (r - g) / delta;
    }
    h = sector / 6.0;
    h -= std::floor(h);
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    const double scaled = (h - std::floor(h)) * 6.0;
    const int sector = static_cast<int>(scaled) % 6;
    const double f = scaled - std::floor(scaled);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    switch (sector) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

}  // namespace

LabelFile parse_labels(std::string_view text, const std::filesystem::path& base_dir) {
    LabelFile file;
    std::set<std::string> seen;
    int line_no = 0;
    bool header_seen = false;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        const std::string_view line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (!header_seen) {
            const std::vector<std::string_view> expected = {"path", "class", "xs", "ys", "xe", "ye"};
            if (fields != expected) label_error(line_no, "header must be 'path,class,xs,ys,xe,ye'");
            header_seen = true;
            continue;
        }
        if (fields.size() != 6) {
            label_error(line_no, "expected 6 fields, got " + std::to_string(fields.size()));
        }
        if (fields[0].empty()) label_error(line_no, "empty path");
        const auto cls = parse_class(fields[1]);
        if (!cls) label_error(line_no, "unknown class '" + std::string(fields[1]) + "'");
        LabelRecord record;
        record.cls = *cls;
        record.line = line_no;
        const char* names[] = {"xs", "ys", "xe", "ye"};
        for (std::size_t i = 0; i < 4; ++i) {
            record.coords[i] = parse_double(fields[2 + i], line_no, names[i]);
            if (record.coords[i] < 0.0 || record.coords[i] > 1.0) {
                label_error(line_no, std::string(names[i]) + " outside [0, 1]");
            }
        }
        const std::filesystem::path raw{std::string(fields[0])};
        record.image_path = raw.is_absolute() ? raw : base_dir / raw;
        if (!seen.insert(record.image_path.lexically_normal().string()).second) {
            label_error(line_no, "duplicate path '" + std::string(fields[0]) + "'");
        }
        file.records.push_back(std::move(record));
    }
    if (!header_seen) throw FormatError("line 1: missing header 'path,class,xs,ys,xe,ye'");
    return file;
}

LabelFile load_labels(const std::filesystem::path& csv_path) {
    const auto bytes = read_file(csv_path);
    try {
        return parse_labels(std::string_view(bytes.data(), bytes.size()), csv_path.parent_path());
    } catch (const FormatError& e) {
        throw FormatError(csv_path.string() + ": " + e.what());
    }
}

Tensor parse_ppm(std::span<const std::byte> bytes) {
    std::size_t pos = 0;
    const auto peek = [&]() -> int {
        return pos < bytes.size() ? static_cast<int>(bytes[pos]) : -1;
    };
    const auto skip_space_and_comments = [&] {
        while (true) {
            const int c = peek();
            if (c == '#') {
                while (peek() != -1 && peek() != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                ++pos;
            } else {
                return;
            }
        }
    };
    const auto read_int = [&](const char* what) {
        skip_space_and_comments();
        long value = 0;
        int digits = 0;
        while (peek() >= '0' && peek() <= '9') {
            value = value * 10 + (peek() - '0');
            if (value > 1'000'000) throw FormatError(std::string("PPM ") + what + " too large");
            ++pos;
            ++digits;
        }
        if (digits == 0) throw FormatError(std::string("PPM header: missing ") + what);
        return static_cast<int>(value);
    };

    if (bytes.size() < 2 || static_cast<char>(bytes[0]) != 'P' || static_cast<char>(bytes[1]) != '6') {
        throw FormatError("not a binary PPM (P6) image");
    }
    pos = 2;
    const int width = read_int("width");
    const int height = read_int("height");
    const int maxval = read_int("maxval");
    if (width < 1 || height < 1) throw FormatError("PPM dimensions must be positive");
    if (maxval < 1 || maxval > 255) {
        throw FormatError("PPM maxval " + std::to_string(maxval) + " unsupported (8-bit only)");
    }
    const int sep = peek();
    if (sep != ' ' && sep != '\t' && sep != '\n' && sep != '\r') {
        throw FormatError("PPM header must end with a single whitespace byte");
    }
    ++pos;
    const std::size_t pixels = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() - pos < pixels * 3) throw FormatError("PPM pixel data truncated");

    Tensor image(Shape{3, height, width});
    const auto scale = static_cast<float>(maxval);
    for (std::size_t i = 0; i < pixels; ++i) {
        for (int c = 0; c < 3; ++c) {
            const auto value = static_cast<unsigned>(bytes[pos + i * 3 + static_cast<std::size_t>(c)]);
            if (static_cast<int>(value) > maxval) throw FormatError("PPM sample exceeds maxval");
            image.channel(c)[i] = static_cast<float>(value) / scale;
        }
    }
    return image;
}

Tensor load_image(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return parse_ppm(std::as_bytes(std::span<const char>(bytes)));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::vector<std::byte> encode_ppm(const Tensor& image) {
    require_rgb(image, "encode_ppm");
    const std::string header =
        "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
    std::vector<std::byte> out;
    out.reserve(header.size() + image.size());
    for (char c : header) out.push_back(static_cast<std::byte>(c));
    const std::size_t pixels = image.shape().plane();
    for (std::size_t i = 0; i < pixels; ++i) {
        for (int c = 0; c < 3; ++c) {
            const double v = std::clamp(static_cast<double>(image.channel(c)[i]), 0.0, 1.0);
            out.push_back(static_cast<std::byte>(static_cast<unsigned>(std::lround(v * 255.0))));
        }
    }
    return out;
}

void write_ppm(const std::filesystem::path& path, const Tensor& image) {
    const auto bytes = encode_ppm(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Sample crop(const Sample& sample, int x0, int y0, int width, int height) {
    const int src_w = sample.image.width();
    const int src_h = sample.image.height();
    if (width < 1 || height < 1 || width > src_w || height > src_h) {
        throw ValidationError("crop " + std::to_string(width) + "x" + std::to_string(height) +
                              " does not fit source " + std::to_string(src_w) + "x" + std::to_string(src_h));
    }
    if (x0 < 0 || y0 < 0 || x0 + width > src_w || y0 + height > src_h) {
        throw ValidationError("crop window leaves the source image");
    }
    Sample out;
    out.cls = sample.cls;
    out.image = Tensor(Shape{sample.image.channels(), height, width});
    for (int c = 0; c < sample.image.channels(); ++c) {
        for (int y = 0; y < height; ++y) {
            const auto src = sample.image.channel(c).subspan(
                static_cast<std::size_t>(y + y0) * src_w + static_cast<std::size_t>(x0), static_cast<std::size_t>(width));
            std::copy(src.begin(), src.end(),
                      out.image.channel(c).begin() + static_cast<std::ptrdiff_t>(y) * width);
        }
    }
    for (std::size_t i = 0; i < 4; i += 2) {
        out.coords[i] = std::clamp((sample.coords[i] * src_w - x0) / width, 0.0, 1.0);
        out.coords[i + 1] = std::clamp((sample.coords[i + 1] * src_h - y0) / height, 0.0, 1.0);
    }
    return out;
}

Sample random_crop(const Sample& sample, int width, int height, std::uint64_t seed) {
    if (width > sample.image.width() || height > sample.image.height()) {
        throw ValidationError("random_crop target " + std::to_string(width) + "x" + std::to_string(height) +
                              " larger than source " + std::to_string(sample.image.width()) + "x" +
                              std::to_string(sample.image.height()));
    }
    std::mt19937_64 rng(seed);
    const auto span_x = static_cast<std::uint64_t>(sample.image.width() - width) + 1;
    const auto span_y = static_cast<std::uint64_t>(sample.image.height() - height) + 1;
    const int x0 = static_cast<int>(rng() % span_x);
    const int y0 = static_cast<int>(rng() % span_y);
    return crop(sample, x0, y0, width, height);
}

Sample flip_horizontal(const Sample& sample) {
    Sample out = sample;
    const int w = sample.image.width();
    for (int c = 0; c < sample.image.channels(); ++c) {
        for (int y = 0; y < sample.image.height(); ++y) {
            for (int x = 0; x < w; ++x) out.image.at(c, y, x) = sample.image.at(c, y, w - 1 - x);
        }
    }
    out.coords[0] = 1.0 - sample.coords[0];
    out.coords[2] = 1.0 - sample.coords[2];
    return out;
}

Sample random_horizontal_flip(const Sample& sample, double probability, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return unit_draw(rng) < probability ? flip_horizontal(sample) : sample;
}

Tensor adjust_brightness(const Tensor& image, double factor) {
    Tensor out = image;
    for (float& v : out.data()) v = clamp01(v * factor);
    return out;
}

Tensor adjust_contrast(const Tensor& image, double factor) {
    require_rgb(image, "adjust_contrast");
    double luma_sum = 0.0;
    const std::size_t pixels = image.shape().plane();
    for (std::size_t i = 0; i < pixels; ++i) {
        luma_sum += kLumaR * image.channel(0)[i] + kLumaG * image.channel(1)[i] + kLumaB * image.channel(2)[i];
    }
    const double mean = luma_sum / static_cast<double>(pixels);
    Tensor out = image;
    for (float& v : out.data()) v = clamp01((v - mean) * factor + mean);
    return out;
}

Tensor adjust_saturation(const Tensor& image, double factor) {
    require_rgb(image, "adjust_saturation");
    Tensor out = image;
    const std::size_t pixels = image.shape().plane();
    for (std::size_t i = 0; i < pixels; ++i) {
        const double luma =
            kLumaR * image.channel(0)[i] + kLumaG * image.channel(1)[i] + kLumaB * image.channel(2)[i];
        for (int c = 0; c < 3; ++c) {
            out.channel(c)[i] = clamp01(luma + factor * (image.channel(c)[i] - luma));
        }
    }
    return out;
}

Tensor adjust_hue(const Tensor& image, double turns) {
    require_rgb(image, "adjust_hue");
    Tensor out = image;
    const std::size_t pixels = image.shape().plane();
    for (std::size_t i = 0; i < pixels; ++i) {
        double h, s, v, r, g, b;
        rgb_to_hsv(image.channel(0)[i], image.channel(1)[i], image.channel(2)[i], h, s, v);
        hsv_to_rgb(h + turns, s, v, r, g, b);
        out.channel(0)[i] = clamp01(r);
        out.channel(1)[i] = clamp01(g);
        out.channel(2)[i] = clamp01(b);
    }
    return out;
}

JitterFactors draw_jitter(const JitterRanges& ranges, std::uint64_t seed) {
    check_range(ranges.brightness, "brightness");
    check_range(ranges.contrast, "contrast");
    check_range(ranges.saturation, "saturation");
    check_range(ranges.hue, "hue");
    std::mt19937_64 rng(seed);
    JitterFactors f;
    f.brightness = std::max(0.0, uniform_draw(rng, 1.0 - ranges.brightness, 1.0 + ranges.brightness));
    f.contrast = std::max(0.0, uniform_draw(rng, 1.0 - ranges.contrast, 1.0 + ranges.contrast));
    f.saturation = std::max(0.0, uniform_draw(rng, 1.0 - ranges.saturation, 1.0 + ranges.saturation));
    f.hue_turns = uniform_draw(rng, -ranges.hue, ranges.hue);
    return f;
}

Tensor apply_jitter(const Tensor& image, const JitterFactors& f) {
    Tensor out = image;
    if (f.brightness != 1.0) out = adjust_brightness(out, f.brightness);
    if (f.contrast != 1.0) out = adjust_contrast(out, f.contrast);
    if (f.saturation != 1.0) out = adjust_saturation(out, f.saturation);
    if (f.hue_turns != 0.0) out = adjust_hue(out, f.hue_turns);
    return out;
}

Sample color_jitter(const Sample& sample, const JitterRanges& ranges, std::uint64_t seed) {
    Sample out = sample;
    out.image = apply_jitter(sample.image, draw_jitter(ranges, seed));
    return out;
}

Tensor resize_bilinear(const Tensor& image, int width, int height) {
    if (width < 1 || height < 1) throw ValidationError("resize target must be positive");
    Tensor out(Shape{image.channels(), height, width});
    const double sx = static_cast<double>(image.width()) / width;
    const double sy = static_cast<double>(image.height()) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height() - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, image.height() - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width() - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, image.width() - 1);
            const double wx = fx - x0;
            for (int c = 0; c < image.channels(); ++c) {
                const double top = image.at(c, y0, x0) * (1.0 - wx) + image.at(c, y0, x1) * wx;
                const double bottom = image.at(c, y1, x0) * (1.0 - wx) + image.at(c, y1, x1) * wx;
                out.at(c, y, x) = static_cast<float>(top * (1.0 - wy) + bottom * wy);
            }
        }
    }
    return out;
}

Sample augment(const Sample& sample, const AugmentConfig& config, std::uint64_t seed) {
    std::mt19937_64 seeds(seed);
    const std::uint64_t crop_seed = seeds();
    const std::uint64_t flip_seed = seeds();
    const std::uint64_t jitter_seed = seeds();
    Sample out = random_crop(sample, config.crop_width, config.crop_height, crop_seed);
    out = random_horizontal_flip(out, config.flip_probability, flip_seed);
    return color_jitter(out, config.jitter, jitter_seed);
}

}  // namespace lytnet
