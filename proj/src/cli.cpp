#include "lytnet/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lytnet/cost.hpp"
#include "lytnet/dataset.hpp"
#include "lytnet/error.hpp"
#include "lytnet/guidance.hpp"
#include "lytnet/metrics.hpp"
#include "lytnet/model.hpp"
#include "lytnet/parallel.hpp"

namespace lytnet::cli {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

class CliError : public std::runtime_error {
public:
    CliError(int code, const std::string& message) : std::runtime_error(message), code_(code) {}
    int code() const noexcept { return code_; }

private:
    int code_;
};

std::string one_line(std::string text) {
    while (!text.empty() && text.back() == '\n') text.pop_back();
    for (std::size_t pos = text.find('\n'); pos != std::string::npos; pos = text.find('\n', pos)) {
        text.replace(pos, 1, "; ");
    }
    return text;
}

std::string read_text(const fs::path& path, int code) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CliError(code, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

Model load_model(const std::string& path) {
    try {
        return Model::build(build_default_spec(), load_weights(path));
    } catch (const Error& e) {
        throw CliError(kBadWeights, "weights " + path + ": " + e.what());
    }
}

Tensor load_network_input(const fs::path& path, const Shape& expected, bool resize) {
    Tensor image;
    try {
        image = load_image(path);
    } catch (const Error& e) {
        throw CliError(kBadImage, e.what());
    }
    if (image.shape() == expected) return image;
    if (!resize) {
        throw CliError(kBadImage, path.string() + ": image is " + std::to_string(image.width()) + "x" +
                                      std::to_string(image.height()) + ", network expects " +
                                      std::to_string(expected.width) + "x" +
                                      std::to_string(expected.height) + " (use --resize)");
    }
    return resize_bilinear(image, expected.width, expected.height);
}

/// Runs forward over `images` in input order; parallel across images when
/// there are several, across channels otherwise.
std::vector<Prediction> predict_all(const Model& model, const std::vector<Tensor>& images, int workers) {
    std::vector<Prediction> predictions(images.size());
    if (images.size() > 1 && workers > 1) {
        parallel_for(static_cast<int>(images.size()), workers,
                     [&](int i) { predictions[static_cast<std::size_t>(i)] = model.forward(images[static_cast<std::size_t>(i)], 1); });
    } else {
        for (std::size_t i = 0; i < images.size(); ++i) predictions[i] = model.forward(images[i], workers);
    }
    return predictions;
}

ojson prediction_json(const std::string& image, const Prediction& p) {
    const auto probs = p.probabilities();
    return ojson{{"image", image},
                 {"class", std::string(class_name(p.predicted_class()))},
                 {"probs", probs},
                 {"coords", p.coords}};
}

// ---------------------------------------------------------------- infer

struct InferOptions {
    std::string weights;
    std::vector<std::string> images;
    bool json = false;
    bool resize = false;
    int workers = 1;
};

int cmd_infer(const InferOptions& opt, std::ostream& out) {
    const Model model = load_model(opt.weights);
    std::vector<Tensor> images;
    images.reserve(opt.images.size());
    for (const auto& path : opt.images) images.push_back(load_network_input(path, model.spec().input, opt.resize));
    const auto predictions = predict_all(model, images, opt.workers);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (opt.json) {
            out << prediction_json(opt.images[i], predictions[i]).dump() << "\n";
            continue;
        }
        const auto probs = predictions[i].probabilities();
        char line[512];
        std::snprintf(line, sizeof(line),
                      "%s: %s  probs=[%.6f %.6f %.6f %.6f %.6f]  coords=[%.6f %.6f %.6f %.6f]",
                      opt.images[i].c_str(), std::string(class_name(predictions[i].predicted_class())).c_str(),
                      probs[0], probs[1], probs[2], probs[3], probs[4], predictions[i].coords[0],
                      predictions[i].coords[1], predictions[i].coords[2], predictions[i].coords[3]);
        out << line << "\n";
    }
    return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalCliOptions {
    std::string weights;
    std::string probs_csv;
    std::string labels;
    std::string out_path;
    bool remap_ptlr = false;
    bool resize = false;
    int workers = 1;
};

/// Stub predictions: CSV `path,red,green,countdown_green,countdown_blank,none,xs,ys,xe,ye`.
std::map<std::string, EvalSample> load_stub_predictions(const fs::path& csv) {
    const std::string text = read_text(csv, kBadImage);
    std::map<std::string, EvalSample> table;
    std::istringstream lines(text);
    std::string line;
    int line_no = 0;
    bool header = false;
    while (std::getline(lines, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<std::string> fields;
        std::stringstream row(line);
        for (std::string field; std::getline(row, field, ',');) fields.push_back(field);
        if (!header) {
            if (line != "path,red,green,countdown_green,countdown_blank,none,xs,ys,xe,ye") {
                throw CliError(kUsage, csv.string() + ":" + std::to_string(line_no) +
                                           ": header must be path,red,green,countdown_green,"
                                           "countdown_blank,none,xs,ys,xe,ye");
            }
            header = true;
            continue;
        }
        if (fields.size() != 10) {
            throw CliError(kUsage, csv.string() + ":" + std::to_string(line_no) + ": expected 10 fields");
        }
        EvalSample sample;
        try {
            for (std::size_t i = 0; i < 5; ++i) sample.probabilities[i] = std::stod(fields[1 + i]);
            for (std::size_t i = 0; i < 4; ++i) sample.coords[i] = std::stod(fields[6 + i]);
        } catch (const std::exception&) {
            throw CliError(kUsage, csv.string() + ":" + std::to_string(line_no) + ": bad number");
        }
        const fs::path raw(fields[0]);
        const fs::path resolved = raw.is_absolute() ? raw : csv.parent_path() / raw;
        table[resolved.lexically_normal().string()] = sample;
    }
    return table;
}

int cmd_eval(const EvalCliOptions& opt, std::ostream& out) {
    if (opt.weights.empty() == opt.probs_csv.empty()) {
        throw CliError(kUsage, "eval needs exactly one of --weights or --probs-from-csv");
    }
    LabelFile labels;
    try {
        labels = load_labels(opt.labels);
    } catch (const FormatError& e) {
        throw CliError(kUsage, e.what());
    }
    if (labels.records.empty()) throw CliError(kEmptyLabels, "label set " + opt.labels + " is empty");

    std::vector<EvalSample> predictions;
    std::vector<GroundTruth> truths;
    for (const auto& record : labels.records) truths.push_back({record.cls, record.coords});

    if (!opt.probs_csv.empty()) {
        const auto stub = load_stub_predictions(opt.probs_csv);
        for (const auto& record : labels.records) {
            const auto it = stub.find(record.image_path.lexically_normal().string());
            if (it == stub.end()) {
                throw CliError(kBadImage, "no stub prediction for " + record.image_path.string());
            }
            predictions.push_back(it->second);
        }
    } else {
        const Model model = load_model(opt.weights);
        std::vector<Tensor> images;
        for (const auto& record : labels.records) {
            images.push_back(load_network_input(record.image_path, model.spec().input, opt.resize));
        }
        for (const Prediction& p : predict_all(model, images, opt.workers)) {
            predictions.push_back({p.probabilities(), p.coordinates()});
        }
    }

    EvalOptions options;
    options.remap_ptlr = opt.remap_ptlr;
    EvalReport report;
    try {
        report = eval_report(predictions, truths, options);
    } catch (const ValidationError& e) {
        throw CliError(kUsage, e.what());
    }
    const std::string text = to_json(report) + "\n";
    if (opt.out_path.empty()) {
        out << text;
    } else {
        std::ofstream file(opt.out_path, std::ios::binary | std::ios::trunc);
        if (!file) throw CliError(kUsage, "cannot write " + opt.out_path);
        file << text;
    }
    return kOk;
}

// ---------------------------------------------------------------- replay

struct ReplayOptions {
    std::string stream;
    std::string config;
    std::string weights;
    bool resize = false;
    int workers = 1;
};

// Frame spacing assumed for lines without t_ms (about 16.4 frames per second).
constexpr std::int64_t kDefaultFramePeriodMs = 61;

struct StreamLine {
    int line = 0;
    std::int64_t t_ms = 0;
    std::optional<fs::path> image;
    ClassProbabilities probs{};
    Coords coords{};
};

std::vector<StreamLine> parse_stream(const fs::path& path) {
    const std::string text = read_text(path, kUsage);
    std::vector<StreamLine> lines;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    const auto bad = [&](const std::string& what) {
        return CliError(kUsage, path.string() + ":" + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, raw)) {
        ++line_no;
        if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
        const nlohmann::json j = nlohmann::json::parse(raw, nullptr, false);
        if (j.is_discarded() || !j.is_object()) throw bad("not a JSON object");
        for (const auto& item : j.items()) {
            if (item.key() != "t_ms" && item.key() != "image" && item.key() != "probs" && item.key() != "coords") {
                throw bad("unknown key '" + item.key() + "'");
            }
        }
        if (j.contains("t_ms") && !j["t_ms"].is_number_integer()) throw bad("t_ms must be an integer");
        const bool has_image = j.contains("image");
        const bool has_probs = j.contains("probs");
        if (has_image == has_probs) throw bad("exactly one of 'image' or 'probs' is required");
        StreamLine line;
        line.line = line_no;
        if (j.contains("t_ms")) {
            line.t_ms = j["t_ms"].get<std::int64_t>();
        } else {
            line.t_ms = lines.empty() ? 0 : lines.back().t_ms + kDefaultFramePeriodMs;
        }
        try {
            if (has_image) {
                if (j.contains("coords")) throw bad("'coords' only accompanies 'probs'");
                const fs::path image(j["image"].get<std::string>());
                line.image = image.is_absolute() ? image : path.parent_path() / image;
            } else {
                if (!j.contains("coords")) throw bad("'probs' lines need 'coords'");
                line.probs = j["probs"].get<ClassProbabilities>();
                line.coords = j["coords"].get<Coords>();
            }
        } catch (const nlohmann::json::exception&) {
            throw bad("probs needs 5 numbers, coords 4, image a string");
        }
        if (!lines.empty() && line.t_ms <= lines.back().t_ms) {
            throw CliError(kBadStream, path.string() + ":" + std::to_string(line_no) + ": t_ms " +
                                           std::to_string(line.t_ms) + " does not exceed previous " +
                                           std::to_string(lines.back().t_ms));
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

int cmd_replay(const ReplayOptions& opt, std::ostream& out, std::ostream& err) {
    GuidanceConfig config;
    if (!opt.config.empty()) {
        try {
            config = GuidanceConfig::from_json(read_text(opt.config, kUsage));
        } catch (const FormatError& e) {
            throw CliError(kUsage, opt.config + ": " + e.what());
        }
    }
    const auto lines = parse_stream(opt.stream);
    std::optional<Model> model;
    for (const auto& line : lines) {
        if (line.image && !model) {
            if (opt.weights.empty()) {
                throw CliError(kBadWeights, opt.stream + ":" + std::to_string(line.line) +
                                                ": image frames need --weights");
            }
            model = load_model(opt.weights);
        }
    }

    GuidanceSession session(config);
    std::array<int, static_cast<std::size_t>(EventKind::LightNone) + 1> counts{};
    for (const auto& line : lines) {
        FrameObservation obs;
        obs.t_ms = line.t_ms;
        if (line.image) {
            Tensor image;
            try {
                image = load_image(*line.image);
            } catch (const Error& e) {
                throw CliError(kBadImage, e.what());
            }
            obs.image_width = image.width();
            obs.image_height = image.height();
            image = load_network_input(*line.image, model->spec().input, opt.resize);
            const Prediction p = model->forward(image, opt.workers);
            obs.probabilities = p.probabilities();
            obs.coords = p.coordinates();
        } else {
            obs.probabilities = line.probs;
            obs.coords = line.coords;
        }
        std::vector<GuidanceEvent> events;
        try {
            events = session.process(obs);
        } catch (const SessionError& e) {
            throw CliError(kBadStream, opt.stream + ":" + std::to_string(line.line) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw CliError(kUsage, opt.stream + ":" + std::to_string(line.line) + ": " + e.what());
        }
        for (const auto& event : events) {
            out << to_json_line(event) << "\n";
            ++counts[static_cast<std::size_t>(event.kind)];
        }
    }
    err << "summary: frames=" << lines.size();
    for (std::size_t k = 0; k < counts.size(); ++k) {
        err << " " << to_string(static_cast<EventKind>(k)) << "=" << counts[k];
    }
    err << "\n";
    return kOk;
}

// ---------------------------------------------------------------- inspect

struct InspectOptions {
    bool spec = false;
    bool macs = false;
    bool params = false;
    bool bench = false;
    bool json = false;
    int workers = 1;
    std::uint64_t seed = 1;
};

std::string nl_label(const LayerSpec& layer) {
    if (layer.kind == LayerKind::Conv2d || layer.kind == LayerKind::Bottleneck) {
        return std::string(to_string(layer.nonlinearity));
    }
    return "-";
}

std::string shape_label(const Shape& s) {
    if (s.height == 1 && s.width == 1) return std::to_string(s.channels);
    return std::to_string(s.width) + "x" + std::to_string(s.height) + "x" + std::to_string(s.channels);
}

int cmd_inspect(InspectOptions opt, std::ostream& out) {
    if (!opt.spec && !opt.macs && !opt.params && !opt.bench) opt.spec = true;
    const NetworkSpec spec = build_default_spec();
    const auto shapes = propagate_shapes(spec);
    const CostReport cost = count_params_and_macs(spec);

    std::optional<double> bench_ms;
    if (opt.bench) {
        const Model model = Model::build(spec, make_random_weights(spec, opt.seed));
        Tensor input(spec.input);
        std::uint64_t state = opt.seed;
        for (float& v : input.data()) {
            state = state * 6364136223846793005ULL + 1442695040888963407ULL;
            v = static_cast<float>(state >> 40) / static_cast<float>(1 << 24);
        }
        const auto start = std::chrono::steady_clock::now();
        const Prediction p = model.forward(input, opt.workers);
        const auto stop = std::chrono::steady_clock::now();
        bench_ms = std::chrono::duration<double, std::milli>(stop - start).count();
        (void)p;
    }

    if (opt.json) {
        ojson j;
        ojson rows = ojson::array();
        for (std::size_t i = 0; i < spec.layers.size(); ++i) {
            const LayerSpec& l = spec.layers[i];
            const LayerCost& c = cost.layers[i];
            ojson row{{"row", shapes[i].row},
                      {"operator", std::string(to_string(l.kind))},
                      {"input", {shapes[i].input.channels, shapes[i].input.height, shapes[i].input.width}},
                      {"output", {shapes[i].output.channels, shapes[i].output.height, shapes[i].output.width}},
                      {"k", l.kernel},
                      {"e", l.expansion},
                      {"c", l.out_channels},
                      {"se", l.use_se},
                      {"nl", nl_label(l)},
                      {"s", l.stride},
                      {"residual", shapes[i].residual},
                      {"params", c.params},
                      {"macs", c.macs}};
            row["separable_ratio"] = c.separable_ratio ? ojson(*c.separable_ratio) : ojson(nullptr);
            rows.push_back(row);
        }
        j["layers"] = rows;
        j["total_params"] = cost.total_params;
        j["total_macs"] = cost.total_macs;
        if (bench_ms) j["bench"] = {{"forward_ms", *bench_ms}, {"fps", 1000.0 / *bench_ms}, {"workers", opt.workers}};
        out << j.dump(2) << "\n";
        return kOk;
    }

    char buf[256];
    if (opt.spec) {
        std::snprintf(buf, sizeof(buf), "%-4s %-12s %-8s %3s %4s %5s %3s %-3s %2s  %-12s\n", "row", "input",
                      "operator", "k", "e", "c", "SE", "NL", "s", "output");
        out << buf;
        for (std::size_t i = 0; i < spec.layers.size(); ++i) {
            const LayerSpec& l = spec.layers[i];
            const auto dash = [](int v) { return v > 0 ? std::to_string(v) : std::string("-"); };
            std::string c = dash(l.out_channels);
            if (l.kind == LayerKind::FullyConnected) c = std::to_string(spec.num_classes) + "," + std::to_string(spec.num_coords);
            const bool pooled = l.kind == LayerKind::AvgPool;
            std::snprintf(buf, sizeof(buf), "%-4d %-12s %-8s %3s %4s %5s %3s %-3s %2s  %-12s\n", shapes[i].row,
                          shape_label(shapes[i].input).c_str(), std::string(to_string(l.kind)).c_str(),
                          pooled ? "-" : dash(l.kernel).c_str(), dash(l.expansion).c_str(), c.c_str(),
                          l.use_se ? "SE" : "-", nl_label(l).c_str(), pooled || l.kind == LayerKind::FullyConnected ? "-" : dash(l.stride).c_str(),
                          shape_label(shapes[i].output).c_str());
            out << buf;
        }
    }
    if (opt.params || opt.macs) {
        std::snprintf(buf, sizeof(buf), "%-4s %-8s %12s %14s %10s\n", "row", "operator", "params", "macs",
                      "sep_ratio");
        out << buf;
        for (const LayerCost& c : cost.layers) {
            std::string ratio = "-";
            if (c.separable_ratio) {
                char r[32];
                std::snprintf(r, sizeof(r), "%.4f", *c.separable_ratio);
                ratio = r;
            }
            std::snprintf(buf, sizeof(buf), "%-4d %-8s %12llu %14llu %10s\n", c.row,
                          std::string(to_string(c.kind)).c_str(), static_cast<unsigned long long>(c.params),
                          static_cast<unsigned long long>(c.macs), ratio.c_str());
            out << buf;
        }
        out << "total params=" << cost.total_params << " macs=" << cost.total_macs << "\n";
    }
    if (bench_ms) {
        std::snprintf(buf, sizeof(buf), "bench: forward_ms=%.2f fps=%.2f workers=%d\n", *bench_ms,
                      1000.0 / *bench_ms, opt.workers);
        out << buf;
    }
    return kOk;
}

// ---------------------------------------------------------------- make-weights

struct MakeWeightsOptions {
    std::string out;
    std::uint64_t seed = 1;
    bool zero = false;
};

int cmd_make_weights(const MakeWeightsOptions& opt, std::ostream& out) {
    const NetworkSpec spec = build_default_spec();
    const WeightFile weights = opt.zero ? make_zero_weights(spec) : make_random_weights(spec, opt.seed);
    write_weights(opt.out, weights);
    out << "wrote " << weights.tensors.size() << " tensors to " << opt.out << "\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"LytNetV2 pedestrian-light / crossing inference and guidance replay", "lytnet"};
    app.require_subcommand(1);

    InferOptions infer;
    auto* infer_cmd = app.add_subcommand("infer", "Classify images and predict the crossing midline");
    infer_cmd->add_option("--weights", infer.weights, "Weight file (.lyt2)")->required();
    infer_cmd->add_option("images", infer.images, "PPM (P6) images")->required();
    infer_cmd->add_flag("--json", infer.json, "One JSON object per image");
    infer_cmd->add_flag("--resize", infer.resize, "Bilinear-resize nonconforming images to 768x576");
    infer_cmd->add_option("--workers", infer.workers, "Worker threads")->check(CLI::PositiveNumber);

    EvalCliOptions eval;
    auto* eval_cmd = app.add_subcommand("eval", "Score predictions against a label CSV");
    eval_cmd->add_option("labels", eval.labels, "Label CSV (path,class,xs,ys,xe,ye)")->required();
    eval_cmd->add_option("--weights", eval.weights, "Weight file (.lyt2)");
    eval_cmd->add_option("--probs-from-csv", eval.probs_csv, "Stub predictions instead of a network");
    eval_cmd->add_flag("--remap-ptlr", eval.remap_ptlr, "Map countdown predictions to none before scoring");
    eval_cmd->add_option("--out", eval.out_path, "Write the report here instead of stdout");
    eval_cmd->add_flag("--resize", eval.resize, "Bilinear-resize nonconforming images to 768x576");
    eval_cmd->add_option("--workers", eval.workers, "Worker threads")->check(CLI::PositiveNumber);

    ReplayOptions replay;
    auto* replay_cmd = app.add_subcommand("replay", "Run the guidance state machine over a JSONL stream");
    replay_cmd->add_option("stream", replay.stream, "Replay stream (JSON Lines)")->required();
    replay_cmd->add_option("--config", replay.config, "Guidance config JSON");
    replay_cmd->add_option("--weights", replay.weights, "Weight file, needed for image frames");
    replay_cmd->add_flag("--resize", replay.resize, "Bilinear-resize nonconforming images to 768x576");
    replay_cmd->add_option("--workers", replay.workers, "Worker threads for inference")->check(CLI::PositiveNumber);

    InspectOptions inspect;
    auto* inspect_cmd = app.add_subcommand("inspect", "Print the architecture and its cost model");
    inspect_cmd->add_flag("--spec", inspect.spec, "Layer table");
    inspect_cmd->add_flag("--macs", inspect.macs, "Per-layer multiply-accumulates");
    inspect_cmd->add_flag("--params", inspect.params, "Per-layer parameter counts");
    inspect_cmd->add_flag("--bench", inspect.bench, "Time one forward pass with random weights");
    inspect_cmd->add_flag("--json", inspect.json, "Machine-readable output");
    inspect_cmd->add_option("--workers", inspect.workers, "Worker threads for --bench")->check(CLI::PositiveNumber);
    inspect_cmd->add_option("--seed", inspect.seed, "Seed for --bench weights and input");

    MakeWeightsOptions make;
    auto* make_cmd = app.add_subcommand("make-weights", "Write a toy weight file for the default network");
    make_cmd->add_option("--out", make.out, "Output path")->required();
    make_cmd->add_option("--seed", make.seed, "Random seed");
    make_cmd->add_flag("--zero", make.zero, "All-zero weights (scales 0)");

    std::vector<const char*> argv{"lytnet"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << one_line(e.what()) << "\n";
        return kUsage;
    }

    try {
        if (*infer_cmd) return cmd_infer(infer, out);
        if (*eval_cmd) return cmd_eval(eval, out);
        if (*replay_cmd) return cmd_replay(replay, out, err);
        if (*inspect_cmd) return cmd_inspect(inspect, out);
        if (*make_cmd) return cmd_make_weights(make, out);
    } catch (const CliError& e) {
        err << "error: " << one_line(e.what()) << "\n";
        return e.code();
    } catch (const std::exception& e) {
        err << "error: " << one_line(e.what()) << "\n";
        return kUsage;
    }
    return kUsage;
}

}  // namespace lytnet::cli
