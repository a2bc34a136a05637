// Acceptance suite: one [PASS]/[FAIL] line per criterion; exits nonzero if any
// gating criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lytnet/cli.hpp"
#include "lytnet/cost.hpp"
#include "lytnet/dataset.hpp"
#include "lytnet/error.hpp"
#include "lytnet/guidance.hpp"
#include "lytnet/metrics.hpp"
#include "lytnet/model.hpp"
#include "lytnet/ops.hpp"
#include "lytnet/weights.hpp"
#include "oracles.hpp"

namespace {

namespace fs = std::filesystem;
using namespace lytnet;

// Pinned tolerances.
constexpr double kConvRelTol = 1e-5;
constexpr double kConvTimeLimitS = 60.0;
constexpr int kConvCases = 250;
constexpr double kCeTol = 1e-9;
constexpr double kLossTol = 1e-12;
constexpr double kAngleTol = 1e-6;
constexpr double kRatioTol = 1e-9;
constexpr double kMetricTol = 1e-12;
constexpr int kFuzzStreams = 1000;

struct Outcome {
    bool ok = true;
    std::string detail;
};

Outcome fail(const std::string& why) { return {false, why}; }

fs::path scratch_dir() {
    static const fs::path dir = [] {
        std::random_device rd;
        fs::path d = fs::temp_directory_path() / ("lytnet_acceptance_" + std::to_string(rd()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

// ---------------------------------------------------------------- criteria

Outcome conv_oracle() {
    std::mt19937_64 rng(20240601);
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int i = 0; i < kConvCases; ++i) {
        const oracle::ConvCase cc = oracle::random_conv_case(rng);
        const std::vector<double> expected = oracle::reference_conv(cc.input, cc.params);
        const Tensor fast = cc.params.depthwise ? depthwise_conv2d(cc.input, cc.params) : conv2d(cc.input, cc.params);
        const Tensor threaded = conv2d(cc.input, cc.params, 3);
        const Tensor naive = naive_conv2d(cc.input, cc.params);
        const double err = std::max({oracle::max_relative_error(fast.data(), expected),
                                     oracle::max_relative_error(threaded.data(), expected),
                                     oracle::max_relative_error(naive.data(), expected)});
        worst = std::max(worst, err);
        if (err > kConvRelTol) {
            return fail("case " + std::to_string(i) + " " + to_string(cc.input.shape()) + " k=" +
                        std::to_string(cc.params.kernel_h) + " s=" + std::to_string(cc.params.stride) +
                        " rel err " + std::to_string(err));
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d cases, max rel err %.3g (tol %.0e), %.2f s (limit %.0f s)", kConvCases,
                  worst, kConvRelTol, secs, kConvTimeLimitS);
    return {secs < kConvTimeLimitS, buf};
}

Outcome shape_chain() {
    const std::vector<Shape> expected = {
        {16, 288, 384}, {16, 144, 192}, {16, 144, 192}, {24, 72, 96}, {24, 72, 96}, {40, 36, 48},
        {40, 36, 48},   {80, 18, 24},   {80, 18, 24},   {112, 18, 24}, {160, 9, 12}, {160, 9, 12},
        {320, 9, 12},   {960, 9, 12},   {960, 1, 1},    {1280, 1, 1},  {9, 1, 1},
    };
    const NetworkSpec spec = build_default_spec();
    const Model model = Model::build(spec, make_random_weights(spec, 7));
    std::vector<Shape> trace;
    const Prediction p = model.forward(Tensor(Shape{3, 576, 768}, 0.5f), 1, &trace);
    if (trace != expected) {
        std::string got;
        for (const Shape& s : trace) got += to_string(s) + " ";
        return fail("trace " + got);
    }
    if (p.logits.size() != 5 || p.coords.size() != 4) return fail("head split is not (5,4)");
    return {true, "17 rows (3,576,768) -> ... -> (1280,1,1) -> (5,4), exact"};
}

Outcome cost_model() {
    const CostReport report = count_params_and_macs(build_default_spec());
    const oracle::ClosedFormCost closed = oracle::closed_form_cost();
    for (std::size_t i = 0; i < report.layers.size(); ++i) {
        if (report.layers[i].params != closed.params[i] || report.layers[i].macs != closed.macs[i]) {
            return fail("row " + std::to_string(i + 1) + " params " + std::to_string(report.layers[i].params) +
                        " vs " + std::to_string(closed.params[i]) + ", macs " +
                        std::to_string(report.layers[i].macs) + " vs " + std::to_string(closed.macs[i]));
        }
    }
    if (report.total_params != closed.total_params || report.total_macs != closed.total_macs) {
        return fail("totals differ");
    }
    const double ratio = separable_cost_ratio(3, 64);
    const double mac_ratio = static_cast<double>(standard_conv_macs(56, 56, 3, 32, 64)) /
                             static_cast<double>(separable_conv_macs(56, 56, 3, 32, 64));
    const double target = 576.0 / 73.0;
    if (std::abs(ratio - target) > kRatioTol || std::abs(mac_ratio - target) > kRatioTol) {
        return fail("ratio " + std::to_string(ratio) + " / " + std::to_string(mac_ratio));
    }
    return {true, "params " + std::to_string(report.total_params) + ", MACs " + std::to_string(report.total_macs) +
                      " match closed form; k=3 d_j=64 ratio = 576/73"};
}

Outcome loss_metrics() {
    const std::array<double, 5> uniform{0.2, 0.2, 0.2, 0.2, 0.2};
    for (int c = 0; c < 5; ++c) {
        if (std::abs(cross_entropy(uniform, c) - std::log(5.0)) > kCeTol) return fail("CE(uniform) != ln 5");
    }
    const ClassProbabilities probs{0.1, 0.6, 0.1, 0.1, 0.1};
    const Coords pred{0.2, 0.9, 0.6, 0.1}, truth{0.3, 0.8, 0.5, 0.2};
    const double ce = -std::log(0.6);
    const double m = (0.01 + 0.01 + 0.01 + 0.01) / 4.0;
    if (std::abs(combined_loss(probs, pred, ClassId::Green, truth, {0.0}) - m) > kLossTol) return fail("lambda=0");
    if (std::abs(combined_loss(probs, pred, ClassId::Green, truth, {1.0}) - ce) > kLossTol) return fail("lambda=1");

    const std::pair<Coords, double> trivial[] = {
        {{0.5, 0.5, 0.5, 0.0}, 0.0}, {{0.5, 0.5, 1.0, 0.0}, 45.0}, {{0.5, 0.5, 1.0, 0.5}, 90.0}};
    const Coords up{0.5, 0.5, 0.5, 0.0};
    for (const auto& [c, deg] : trivial) {
        if (std::abs(angle_error_deg(c, up) - deg) > kAngleTol) return fail("angle case " + std::to_string(deg));
    }
    std::mt19937_64 rng(99);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const DirectionVector a{oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1)};
        const DirectionVector b{oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1)};
        const double sa = std::exp(oracle::uniform(rng, -6, 6)), sb = std::exp(oracle::uniform(rng, -6, 6));
        const double base = angle_between_deg(a, b);
        const double scaled = angle_between_deg({a.dx * sa, a.dy * sa}, {b.dx * sb, b.dy * sb});
        worst = std::max(worst, std::abs(base - scaled));
    }
    if (worst > kAngleTol) return fail("scale invariance off by " + std::to_string(worst));
    char buf[160];
    std::snprintf(buf, sizeof(buf), "CE(uniform)=ln5, lambda endpoints, 0/45/90 deg, 1000 scaled pairs (max %.2g deg)",
                  worst);
    return {true, buf};
}

bool same(const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || std::abs(*a - *b) <= kMetricTol;
}

Outcome eval_oracle() {
    std::mt19937_64 rng(4242);
    std::vector<EvalSample> preds;
    std::vector<GroundTruth> truths;
    std::vector<ClassProbabilities> probs;
    std::vector<int> labels;
    for (int i = 0; i < 20; ++i) {
        ClassProbabilities p{};
        double sum = 0;
        for (double& v : p) sum += (v = oracle::uniform(rng, 0.01, 1.0));
        for (double& v : p) v /= sum;
        const int truth = static_cast<int>(rng() % 5);
        preds.push_back({p, {0.5, 0.9, 0.5, 0.2}});
        truths.push_back({class_from_index(truth), {0.5, 0.9, 0.4, 0.2}});
        probs.push_back(p);
        labels.push_back(truth);
    }
    for (bool remap : {false, true}) {
        EvalOptions opt;
        opt.remap_ptlr = remap;
        const EvalReport r = eval_report(preds, truths, opt);
        const oracle::Tally t = oracle::brute_force_tally(probs, labels, remap);
        for (int a = 0; a < 5; ++a)
            for (int b = 0; b < 5; ++b)
                if (r.confusion[a][b] != t.confusion[a][b]) return fail("confusion cell mismatch");
        if (std::abs(r.accuracy - static_cast<double>(t.correct) / t.total) > kMetricTol) return fail("accuracy");
        for (int c = 0; c < 5; ++c) {
            if (!same(r.per_class[c].precision, t.precision[c]) || !same(r.per_class[c].recall, t.recall[c]) ||
                !same(r.per_class[c].f1, t.f1[c])) {
                return fail("per-class metrics for " + std::string(class_name(class_from_index(c))));
            }
        }
    }
    for (ClassId c : kAllClasses) {
        if (ptlr_remap(ptlr_remap(c)) != ptlr_remap(c)) return fail("remap not idempotent");
    }
    // Scoring already-remapped predictions with the remap on changes nothing.
    EvalOptions opt;
    opt.remap_ptlr = true;
    const EvalReport once = eval_report(preds, truths, opt);
    std::vector<EvalSample> remapped = preds;
    for (EvalSample& s : remapped) {
        const int p = index_of(ptlr_remap(s.predicted_class()));
        s.probabilities = oracle::one_hot(p);
    }
    const EvalReport twice = eval_report(remapped, truths, opt);
    if (once.confusion != twice.confusion || once.accuracy != twice.accuracy) return fail("remap twice differs");
    return {true, "20 samples, confusion/accuracy/P/R/F1 equal brute-force tally, remap idempotent"};
}

std::string render(const oracle::Log& log) {
    std::string s;
    for (const auto& [t, k] : log) s += k + "@" + std::to_string(t) + " ";
    return s;
}

oracle::Log run_script(const std::vector<oracle::Frame>& frames) {
    GuidanceSession session;
    oracle::Log log;
    for (const auto& f : frames) {
        FrameObservation obs;
        obs.t_ms = f.t_ms;
        obs.probabilities = f.probs;
        obs.coords = f.coords;
        for (const auto& ev : session.process(obs)) log.emplace_back(ev.t_ms, std::string(to_string(ev.kind)));
    }
    return log;
}

Outcome guidance_timing() {
    const std::tuple<const char*, std::vector<oracle::Frame>, oracle::Log> scripts[] = {
        {"drift-left", oracle::drift_left_stream(), oracle::drift_left_expected()},
        {"in-range red", oracle::in_range_red_stream(), oracle::in_range_red_expected()},
        {"red->green flip", oracle::red_green_flip_stream(), oracle::red_green_flip_expected()},
    };
    for (const auto& [name, frames, expected] : scripts) {
        const oracle::Log got = run_script(frames);
        if (got != expected) return fail(std::string(name) + ": got " + render(got) + "expected " + render(expected));
    }
    std::mt19937_64 rng(777);
    std::size_t events = 0;
    for (int s = 0; s < kFuzzStreams; ++s) {
        const auto frames = oracle::fuzz_stream(rng);
        GuidanceSession session;
        std::vector<oracle::FrameRecord> records;
        for (const auto& f : frames) {
            FrameObservation obs;
            obs.t_ms = f.t_ms;
            obs.probabilities = f.probs;
            obs.coords = f.coords;
            const Stage before = session.state().stage;
            auto evs = session.process(obs);
            events += evs.size();
            records.push_back({before, session.state().stage, std::move(evs)});
        }
        const std::string violation = oracle::check_invariants(frames, records);
        if (!violation.empty()) return fail("fuzz stream " + std::to_string(s) + ": " + violation);
    }
    return {true, "3 scripted logs exact; " + std::to_string(kFuzzStreams) + " fuzzed streams (" +
                      std::to_string(events) + " events) keep spacing, stage order and window gating"};
}

WeightFile small_weight_file() {
    WeightFile w;
    w.header.class_order = {"red", "green", "countdown_green", "countdown_blank", "none"};
    w.header.normalization = InputNormalization{{0.485f, 0.456f, 0.406f}, {0.229f, 0.224f, 0.225f}};
    w.tensors["a"] = {{2, 1, 3, 3}, std::vector<float>(18)};
    for (std::size_t i = 0; i < 18; ++i) w.tensors["a"].data[i] = 0.25f * static_cast<float>(i) - 1.0f;
    w.tensors["b.scale"] = {{2}, {1.5f, -0.0f}};
    return w;
}

Outcome format_suite() {
    // Weight round trip through bytes and through a file.
    const NetworkSpec spec = build_default_spec();
    const WeightFile random = make_random_weights(spec, 11);
    const auto bytes = serialize_weights(random);
    if (serialize_weights(parse_weights(bytes)) != bytes) return fail("round trip bytes differ");
    const fs::path file = scratch_dir() / "roundtrip.lyt2";
    write_weights(file, random);
    if (load_weights(file) != random) return fail("file round trip differs");

    const auto small = serialize_weights(small_weight_file());
    for (std::size_t n = 0; n < small.size(); ++n) {
        try {
            parse_weights(std::span<const std::byte>(small.data(), n));
            return fail("truncation to " + std::to_string(n) + " bytes accepted");
        } catch (const FormatError&) {
        }
    }
    if (!(parse_weights(small) == small_weight_file())) return fail("small file does not parse back");

    // CSV fixture.
    const fs::path fixtures = LYTNET_FIXTURE_DIR;
    const LabelFile labels = load_labels(fixtures / "labels.csv");
    if (labels.records.size() != 2) return fail("labels.csv row count");
    const auto& r0 = labels.records[0];
    const auto& r1 = labels.records[1];
    if (r0.image_path != fixtures / "img/a.ppm" || r0.cls != ClassId::Red || r0.coords != Coords{0.5, 0.9, 0.5, 0.3} ||
        r1.cls != ClassId::CountdownGreen || r1.coords != Coords{0.25, 1.0, 0.75, 0.0}) {
        return fail("labels.csv values");
    }
    try {
        parse_labels("path,class,xs,ys,xe,ye\na.ppm,red,0,0,0,0\nb.ppm,blue,0,0,0,0\n");
        return fail("class 'blue' accepted");
    } catch (const FormatError& e) {
        if (std::string(e.what()).find("line 3") == std::string::npos) return fail("blue row error lacks line 3");
    }

    // PPM fixture: 2x2 with bytes (0,51,102) (153,204,255) / (10,20,30) (255,0,128).
    const Tensor img = load_image(fixtures / "tiny.ppm");
    const float expected[3][4] = {{0, 153, 10, 255}, {51, 204, 20, 0}, {102, 255, 30, 128}};
    if (img.shape() != Shape{3, 2, 2}) return fail("tiny.ppm shape");
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 4; ++i)
            if (img.at(c, i / 2, i % 2) != expected[c][i] / 255.0f) return fail("tiny.ppm value");
    return {true, "weights round-trip bit-identical; all " + std::to_string(small.size()) +
                      " truncations rejected; CSV and PPM fixtures exact"};
}

void write_stream(const fs::path& path, const std::vector<oracle::Frame>& frames) {
    std::ofstream out(path);
    for (const auto& f : frames) {
        nlohmann::json j{{"t_ms", f.t_ms}, {"probs", f.probs}, {"coords", f.coords}};
        out << j.dump() << "\n";
    }
}

Outcome determinism() {
    const fs::path dir = scratch_dir();
    const fs::path weights = dir / "det.lyt2";
    if (cli({"make-weights", "--out", weights.string(), "--seed", "5"}).code != 0) return fail("make-weights");

    std::mt19937_64 rng(31337);
    std::vector<std::string> infer_args{"infer", "--weights", weights.string(), "--json"};
    for (int i = 0; i < 3; ++i) {
        Tensor image(Shape{3, 576, 768});
        for (float& v : image.data()) v = static_cast<float>(rng() % 256) / 255.0f;
        const fs::path p = dir / ("frame" + std::to_string(i) + ".ppm");
        write_ppm(p, image);
        infer_args.push_back(p.string());
    }
    std::vector<std::string> runs;
    for (const char* workers : {"1", "1", "3", "4"}) {
        auto args = infer_args;
        args.insert(args.end(), {"--workers", workers});
        const CliRun r = cli(args);
        if (r.code != 0) return fail("infer exit " + std::to_string(r.code) + ": " + r.err);
        runs.push_back(r.out);
    }
    for (const auto& r : runs)
        if (r != runs[0]) return fail("infer output differs between runs or worker counts");

    std::mt19937_64 fuzz(8);
    const fs::path stream = dir / "stream.jsonl";
    auto frames = oracle::drift_left_stream();
    const auto extra = oracle::fuzz_stream(fuzz);
    for (const auto& f : extra) frames.push_back({f.t_ms + 100000, f.probs, f.coords});
    write_stream(stream, frames);
    const CliRun a = cli({"replay", stream.string()});
    const CliRun b = cli({"replay", stream.string()});
    if (a.code != 0 || a.out != b.out || a.err != b.err) return fail("replay output differs");

    // Image frames through the network, 1 vs N workers.
    const fs::path image_stream = dir / "images.jsonl";
    {
        std::ofstream out(image_stream);
        for (int i = 0; i < 3; ++i) out << "{\"t_ms\":" << 61 * i << ",\"image\":\"frame" << i << ".ppm\"}\n";
    }
    const CliRun c = cli({"replay", image_stream.string(), "--weights", weights.string(), "--workers", "1"});
    const CliRun d = cli({"replay", image_stream.string(), "--weights", weights.string(), "--workers", "3"});
    if (c.code != 0 || c.out != d.out || c.err != d.err) return fail("image replay differs across workers: " + c.err);
    return {true, "infer identical over 2 runs and 1/3/4 workers; replay identical over 2 runs and 1/3 workers"};
}

Outcome bench() {
    const CliRun r = cli({"inspect", "--bench"});
    if (r.code != 0) return fail("inspect --bench exit " + std::to_string(r.code));
    std::string line = r.out;
    while (!line.empty() && line.back() == '\n') line.pop_back();
    return {true, line + " (non-gating)"};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"conv-oracle", conv_oracle},
        {"shape-chain", shape_chain},
        {"cost-model", cost_model},
        {"loss-metrics", loss_metrics},
        {"eval-oracle", eval_oracle},
        {"guidance-timing", guidance_timing},
        {"format", format_suite},
        {"determinism", determinism},
        {"throughput", bench},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        if (!o.ok) ++failures;
        std::cout << (o.ok ? "[PASS] " : "[FAIL] ") << name << ": " << o.detail << std::endl;
    }
    std::error_code ec;
    fs::remove_all(scratch_dir(), ec);
    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
              << " criteria passed" << std::endl;
    return failures == 0 ? 0 : 1;
}
