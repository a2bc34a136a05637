#include "lytnet/weights.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <set>

#include <json.hpp>

#include "lytnet/classes.hpp"
#include "lytnet/error.hpp"

namespace lytnet {

namespace {

static_assert(std::endian::native == std::endian::little,
              "weight I/O assumes a little-endian host");

constexpr char kMagic[4] = {'L', 'Y', 'T', '2'};
constexpr std::uint8_t kDtypeF32 = 0;

class ByteWriter {
public:
    void raw(const void* src, std::size_t n) {
        const auto* p = static_cast<const std::byte*>(src);
        bytes_.insert(bytes_.end(), p, p + n);
    }
    template <typename T>
    void put(T value) {
        raw(&value, sizeof(T));
    }
    std::vector<std::byte> take() { return std::move(bytes_); }

private:
    std::vector<std::byte> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

    std::span<const std::byte> raw(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) {
            throw FormatError(std::string("weight file truncated while reading ") + what +
                              " at byte " + std::to_string(pos_));
        }
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    template <typename T>
    T get(const char* what) {
        T value;
        std::memcpy(&value, raw(sizeof(T), what).data(), sizeof(T));
        return value;
    }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
    std::size_t position() const noexcept { return pos_; }

private:
    std::span<const std::byte> bytes_;
    std::size_t pos_ = 0;
};

nlohmann::json header_to_json(const WeightHeader& header) {
    nlohmann::json j = nlohmann::json::object();
    j["class_order"] = header.class_order;
    if (header.normalization) {
        j["input_normalization"] = {{"mean", header.normalization->mean},
                                    {"std", header.normalization->stddev}};
    }
    return j;
}

WeightHeader header_from_json(std::string_view text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw FormatError("weight header is not a JSON object");
    WeightHeader header;
    try {
        if (j.contains("class_order")) {
            header.class_order = j.at("class_order").get<std::vector<std::string>>();
        }
        if (j.contains("input_normalization")) {
            const auto& n = j.at("input_normalization");
            InputNormalization norm;
            if (n.contains("mean")) norm.mean = n.at("mean").get<std::array<float, 3>>();
            if (n.contains("std")) norm.stddev = n.at("std").get<std::array<float, 3>>();
            header.normalization = norm;
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("weight header: ") + e.what());
    }
    return header;
}

std::string row_prefix(std::size_t index) { return "layer" + std::to_string(index + 1) + "."; }

void add_conv_slots(std::vector<WeightSlot>& slots, const std::string& name, std::uint32_t out,
                    std::uint32_t in, std::uint32_t k) {
    slots.push_back({name, {out, in, k, k}, true});
    slots.push_back({name + ".scale", {out}, true});
    slots.push_back({name + ".shift", {out}, true});
    slots.push_back({name + ".bias", {out}, false});
}

std::size_t element_count(const std::vector<std::uint32_t>& dims) {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

}  // namespace

std::string dims_to_string(std::span<const std::uint32_t> dims) {
    std::string s = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

std::vector<std::byte> serialize_weights(const WeightFile& weights) {
    ByteWriter w;
    w.raw(kMagic, sizeof(kMagic));
    w.put<std::uint32_t>(kWeightFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(weights.tensors.size()));
    const std::string header = header_to_json(weights.header).dump();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(header.size()));
    w.raw(header.data(), header.size());
    for (const auto& [name, tensor] : weights.tensors) {
        if (name.size() > 0xFFFF) throw FormatError("tensor name too long: " + name.substr(0, 32));
        if (tensor.dims.empty() || tensor.dims.size() > 0xFF) {
            throw FormatError("tensor " + name + " must have 1..255 dims");
        }
        if (element_count(tensor.dims) != tensor.data.size()) {
            throw FormatError("tensor " + name + " data length does not match dims " +
                              dims_to_string(tensor.dims));
        }
        w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
        w.raw(name.data(), name.size());
        w.put<std::uint8_t>(kDtypeF32);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(tensor.dims.size()));
        for (auto d : tensor.dims) w.put<std::uint32_t>(d);
        w.raw(tensor.data.data(), tensor.data.size() * sizeof(float));
    }
    return w.take();
}

WeightFile parse_weights(std::span<const std::byte> bytes) {
    ByteReader r(bytes);
    const auto magic = r.raw(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("bad magic, expected LYT2");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kWeightFormatVersion) {
        throw FormatError("unsupported weight format version " + std::to_string(version));
    }
    const auto count = r.get<std::uint32_t>("tensor count");
    const auto header_len = r.get<std::uint32_t>("header length");
    const auto header_bytes = r.raw(header_len, "header");
    WeightFile file;
    file.header = header_from_json(
        std::string_view(reinterpret_cast<const char*>(header_bytes.data()), header_bytes.size()));

    for (std::uint32_t t = 0; t < count; ++t) {
        const auto name_len = r.get<std::uint16_t>("tensor name length");
        const auto name_bytes = r.raw(name_len, "tensor name");
        std::string name(reinterpret_cast<const char*>(name_bytes.data()), name_bytes.size());
        const auto dtype = r.get<std::uint8_t>("dtype");
        if (dtype != kDtypeF32) {
            throw FormatError("tensor " + name + " has unsupported dtype " + std::to_string(dtype));
        }
        const auto ndim = r.get<std::uint8_t>("ndim");
        if (ndim == 0) throw FormatError("tensor " + name + " has zero dims");
        WeightTensor tensor;
        std::size_t elements = 1;
        for (std::uint8_t d = 0; d < ndim; ++d) {
            const auto dim = r.get<std::uint32_t>("dims");
            if (dim == 0) throw FormatError("tensor " + name + " has a zero dimension");
            tensor.dims.push_back(dim);
            if (elements > r.remaining() / dim) {
                throw FormatError("tensor " + name + " larger than the remaining file");
            }
            elements *= dim;
        }
        const auto payload = r.raw(elements * sizeof(float), "tensor data");
        tensor.data.resize(elements);
        std::memcpy(tensor.data.data(), payload.data(), payload.size());
        if (!file.tensors.emplace(std::move(name), std::move(tensor)).second) {
            throw FormatError("duplicate tensor name in weight file");
        }
    }
    if (r.remaining() != 0) {
        throw FormatError(std::to_string(r.remaining()) + " trailing bytes after last tensor");
    }
    return file;
}

void write_weights(const std::filesystem::path& path, const WeightFile& weights) {
    const auto bytes = serialize_weights(weights);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing " + path.string());
}

WeightFile load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open weight file " + path.string());
    std::vector<char> buffer((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_weights(std::as_bytes(std::span<const char>(buffer)));
}

std::vector<WeightSlot> weight_slots(const NetworkSpec& spec) {
    const auto shapes = propagate_shapes(spec);
    std::vector<WeightSlot> slots;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& layer = spec.layers[i];
        const auto in = static_cast<std::uint32_t>(shapes[i].input.channels);
        const auto out = static_cast<std::uint32_t>(layer.out_channels);
        const std::string p = row_prefix(i);
        switch (layer.kind) {
            case LayerKind::Conv2d:
                add_conv_slots(slots, p + "conv", out, in, static_cast<std::uint32_t>(layer.kernel));
                break;
            case LayerKind::Bottleneck: {
                const auto e = static_cast<std::uint32_t>(layer.expansion);
                add_conv_slots(slots, p + "expand", e, in, 1);
                add_conv_slots(slots, p + "dw", e, 1, static_cast<std::uint32_t>(layer.kernel));
                if (layer.use_se) {
                    const auto r = e / static_cast<std::uint32_t>(spec.se_reduction);
                    slots.push_back({p + "se_reduce", {r, e}, true});
                    slots.push_back({p + "se_reduce.bias", {r}, true});
                    slots.push_back({p + "se_expand", {e, r}, true});
                    slots.push_back({p + "se_expand.bias", {e}, true});
                }
                add_conv_slots(slots, p + "project", out, e, 1);
                break;
            }
            case LayerKind::FullyConnected:
                slots.push_back({p + "fc", {out, in}, true});
                slots.push_back({p + "fc.bias", {out}, true});
                break;
            case LayerKind::MaxPool:
            case LayerKind::AvgPool:
                break;
        }
    }
    return slots;
}

std::string WeightReport::describe() const {
    std::string s;
    if (header_problem) s += "header: " + *header_problem + "\n";
    for (const auto& name : missing) s += "missing: " + name + "\n";
    for (const auto& name : dangling) s += "dangling: " + name + "\n";
    for (const auto& m : mismatched) {
        s += "shape mismatch: " + m.name + " expected " + dims_to_string(m.expected) + " got " +
             dims_to_string(m.actual) + "\n";
    }
    for (const auto& name : non_finite) s += "non-finite values: " + name + "\n";
    return s;
}

WeightReport validate_weights(const WeightFile& weights, const NetworkSpec& spec) {
    WeightReport report;
    if (!weights.header.class_order.empty()) {
        bool matches = weights.header.class_order.size() == kAllClasses.size();
        for (std::size_t i = 0; matches && i < kAllClasses.size(); ++i) {
            matches = weights.header.class_order[i] == class_name(kAllClasses[i]);
        }
        if (!matches) {
            report.header_problem =
                "class_order must be red,green,countdown_green,countdown_blank,none";
        }
    }
    if (weights.header.normalization) {
        for (float s : weights.header.normalization->stddev) {
            if (!(std::isfinite(s) && s > 0.0f)) {
                report.header_problem = "input_normalization std must be positive";
            }
        }
        for (float m : weights.header.normalization->mean) {
            if (!std::isfinite(m)) report.header_problem = "input_normalization mean must be finite";
        }
    }
    std::set<std::string> known;
    for (const WeightSlot& slot : weight_slots(spec)) {
        known.insert(slot.name);
        const auto it = weights.tensors.find(slot.name);
        if (it == weights.tensors.end()) {
            if (slot.required) report.missing.push_back(slot.name);
            continue;
        }
        if (it->second.dims != slot.dims) {
            report.mismatched.push_back({slot.name, slot.dims, it->second.dims});
        } else if (!std::all_of(it->second.data.begin(), it->second.data.end(),
                                [](float v) { return std::isfinite(v); })) {
            report.non_finite.push_back(slot.name);
        }
    }
    for (const auto& [name, tensor] : weights.tensors) {
        if (!known.contains(name)) report.dangling.push_back(name);
    }
    return report;
}

WeightFile make_zero_weights(const NetworkSpec& spec) {
    WeightFile file;
    for (ClassId id : kAllClasses) file.header.class_order.emplace_back(class_name(id));
    for (const WeightSlot& slot : weight_slots(spec)) {
        if (!slot.required) continue;
        file.tensors[slot.name] = WeightTensor{slot.dims, std::vector<float>(element_count(slot.dims))};
    }
    return file;
}

WeightFile make_random_weights(const NetworkSpec& spec, std::uint64_t seed) {
    WeightFile file = make_zero_weights(spec);
    std::mt19937_64 rng(seed);
    const auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    // Iterate slots rather than the map so the draw order follows the network.
    for (const WeightSlot& slot : weight_slots(spec)) {
        if (!slot.required) continue;
        WeightTensor& tensor = file.tensors.at(slot.name);
        const bool is_vector = slot.dims.size() == 1;
        if (is_vector) {
            const bool is_scale = slot.name.ends_with(".scale");
            std::fill(tensor.data.begin(), tensor.data.end(), is_scale ? 1.0f : 0.0f);
            continue;
        }
        std::size_t fan_in = 1;
        for (std::size_t d = 1; d < slot.dims.size(); ++d) fan_in *= slot.dims[d];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (float& v : tensor.data) v = static_cast<float>((2.0 * unit() - 1.0) * bound);
    }
    return file;
}

}  // namespace lytnet
