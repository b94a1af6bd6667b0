// mvlab: desk-scale laboratory for multi-view subject-conditioned video
// diffusion. Subcommands: train, sample, eval, curate, layout-inspect,
// report, ablate.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mvlab/ablate.hpp"
#include "mvlab/common.hpp"
#include "mvlab/curation.hpp"
#include "mvlab/io.hpp"
#include "mvlab/layout.hpp"
#include "mvlab/metrics.hpp"
#include "mvlab/model.hpp"
#include "mvlab/report.hpp"
#include "mvlab/sampler.hpp"
#include "mvlab/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mvlab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

/// Every run leaves a reproducibility trail: the resolved options and seed.
void write_run_snapshot(const std::string& out_dir, const std::string& command,
                        const json& resolved, std::uint64_t seed) {
    fs::create_directories(out_dir);
    json snapshot = resolved;
    snapshot["command"] = command;
    snapshot["seed"] = seed;
    write_text_file((fs::path(out_dir) / "run_config.json").string(), snapshot.dump(2) + "\n");
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    return json::parse(read_text_file(path));
}

LayoutScheme scheme_from_options(const std::string& scheme, int delta) {
    LayoutScheme out;
    out.kind = parse_scheme(scheme);
    out.ts_delta = delta;
    return out;
}

struct TrainOptions {
    std::string config_path;
    std::string out_dir = "runs/train";
    std::uint64_t seed = 0;
    std::string scheme = "ts";
    int delta = 16;
    int steps = 200;
};

int cmd_train(const TrainOptions& opt) {
    const json file = load_config_file(opt.config_path);
    const json model_json = file.value("model", json::object());
    const json train_json = file.value("train", json::object());
    const json data_json = file.value("data", json::object());

    DenoiserConfig model_cfg;
    model_cfg.layers = model_json.value("layers", 1);
    model_cfg.heads = model_json.value("heads", 2);
    model_cfg.head_dim = model_json.value("head_dim", 12);
    model_cfg.ffn_dim = model_json.value("ffn_dim", 0);
    model_cfg.channels = model_json.value("channels", 4);
    model_cfg.vocab_size = model_json.value("vocab_size", 64);
    model_cfg.cond_dropout = model_json.value("cond_dropout", model_cfg.cond_dropout);
    model_cfg.scheme = scheme_from_options(model_json.value("scheme", opt.scheme),
                                           model_json.value("delta", opt.delta));

    TrainConfig train_cfg;
    train_cfg.lr = train_json.value("lr", 1e-2);
    train_cfg.lr_min_frac = train_json.value("lr_min_frac", 1.0);
    train_cfg.view_drop_prob = train_json.value("view_drop_prob", 0.0);
    train_cfg.view_shuffle = train_json.value("view_shuffle", false);
    const int steps = train_json.value("steps", opt.steps);

    LatentGrid grid;
    grid.temporal_len = data_json.value("t", 2);
    grid.height = data_json.value("height", 4);
    grid.width = data_json.value("width", 4);
    grid.channels = model_cfg.channels;
    const int count = data_json.value("samples", 8);
    const int views = data_json.value("views", 2);
    const double sigma = data_json.value("sigma", 3.0);

    const std::vector<TrainSample> batch =
        synthetic_overfit_batch(grid, count, views, sigma, model_cfg.vocab_size, opt.seed);
    Denoiser model(model_cfg, opt.seed);

    json resolved{{"model", json::parse(config_to_json(model_cfg))},
                  {"train",
                   {{"lr", train_cfg.lr},
                    {"lr_min_frac", train_cfg.lr_min_frac},
                    {"steps", steps},
                    {"view_drop_prob", train_cfg.view_drop_prob},
                    {"view_shuffle", train_cfg.view_shuffle}}},
                  {"data",
                   {{"t", grid.temporal_len},
                    {"height", grid.height},
                    {"width", grid.width},
                    {"samples", count},
                    {"views", views},
                    {"sigma", sigma}}}};
    write_run_snapshot(opt.out_dir, "train", resolved, opt.seed);

    const std::vector<double> losses = train_loop(model, batch, train_cfg, steps, opt.seed);

    std::string csv = "step,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i, losses[i]);
        csv += buf;
    }
    write_text_file((fs::path(opt.out_dir) / "loss.csv").string(), csv);
    save_checkpoint((fs::path(opt.out_dir) / "checkpoint.safetensors").string(), model);
    if (!losses.empty()) {
        std::cout << "trained " << losses.size() << " steps, loss " << losses.front() << " -> "
                  << losses.back() << "\n";
    }
    std::cout << "checkpoint: " << (fs::path(opt.out_dir) / "checkpoint.safetensors").string()
              << "\n";
    return kExitOk;
}

struct SampleOptions {
    std::string checkpoint;
    std::string out_dir = "runs/sample";
    std::uint64_t seed = 0;
    int steps = 50;
    double omega_ref = 2.5;
    double omega_text = 7.5;
    int t = 2;
    int hw = 4;
    int views = 2;
    bool no_refs = false;
    std::string prompt_text = "the most salient subject";
};

int cmd_sample(const SampleOptions& opt) {
    Denoiser model = load_checkpoint(opt.checkpoint);
    LatentGrid grid;
    grid.temporal_len = opt.t;
    grid.height = opt.hw;
    grid.width = opt.hw;
    grid.channels = model.config().channels;
    grid.validate();

    GuidanceConfig guidance;
    guidance.omega_ref = opt.omega_ref;
    guidance.omega_text = opt.omega_text;
    guidance.steps = opt.steps;
    guidance.seed = opt.seed;

    // Reference views come from a deterministic mock render keyed by the
    // seed, so a bare checkpoint is enough to exercise conditioning.
    ReferenceSet refs;
    if (!opt.no_refs) {
        AssetSpec spec;
        spec.id = "sample";
        spec.category = "subject";
        const Image scene = mock_clients().s2i(spec, 32, 32, opt.seed);
        const std::vector<Image> frames = mock_clients().i2v(scene, spec, opt.views, opt.seed);
        std::vector<ReferenceLatent> subject;
        for (const auto& frame : frames) {
            subject.push_back(
                encode_reference(frame, grid.channels, grid.height, grid.width));
        }
        refs.subjects.push_back(std::move(subject));
    }
    Prompt prompt;
    {
        std::size_t start = 0;
        while (start < opt.prompt_text.size()) {
            std::size_t end = opt.prompt_text.find(' ', start);
            if (end == std::string::npos) end = opt.prompt_text.size();
            if (end > start) {
                prompt.ids.push_back(static_cast<int>(
                    fnv1a64(opt.prompt_text.substr(start, end - start)) %
                    static_cast<std::uint64_t>(model.config().vocab_size)));
            }
            start = end + 1;
        }
    }

    json resolved{{"checkpoint", opt.checkpoint},
                  {"steps", guidance.steps},
                  {"omega_ref", guidance.omega_ref},
                  {"omega_text", guidance.omega_text},
                  {"t", grid.temporal_len},
                  {"hw", opt.hw},
                  {"views", opt.no_refs ? 0 : opt.views},
                  {"prompt", opt.prompt_text}};
    write_run_snapshot(opt.out_dir, "sample", resolved, opt.seed);

    const SampleResult result = sample(model, opt.no_refs ? nullptr : &refs,
                                       prompt.ids.empty() ? nullptr : &prompt, grid, guidance);

    const std::string latent_path = (fs::path(opt.out_dir) / "latent.npy").string();
    save_npy(latent_path,
             {grid.temporal_len, grid.channels, grid.height, grid.width},
             std::vector<double>(result.latent.data.data(),
                                 result.latent.data.data() + result.latent.data.size()));
    for (int t = 0; t < grid.temporal_len; ++t) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "frame_%03d.ppm", t);
        save_image((fs::path(opt.out_dir) / buf).string(),
                   latent_frame_to_image(result.latent, t));
    }
    std::cout << "latent: " << latent_path << " (" << result.denoiser_calls
              << " denoiser calls)\n";
    return kExitOk;
}

struct CurateOptions {
    std::string out_dir = "runs/curate";
    std::uint64_t seed = 0;
    int specs = 10;
    int raw_frames = 12;
    int clip_frames = 6;
    int keyframes = 3;
};

int cmd_curate(const CurateOptions& opt) {
    CurationConfig cfg;
    cfg.raw_frames = opt.raw_frames;
    cfg.clip_frames = opt.clip_frames;
    cfg.keyframes = opt.keyframes;
    cfg.out_dir = opt.out_dir;

    json resolved{{"specs", opt.specs},
                  {"raw_frames", cfg.raw_frames},
                  {"clip_frames", cfg.clip_frames},
                  {"keyframes", cfg.keyframes}};
    write_run_snapshot(opt.out_dir, "curate", resolved, opt.seed);

    const CurationManifest manifest =
        run_pipeline(demo_specs(opt.specs), mock_clients(), cfg, opt.seed);
    const std::string manifest_path = (fs::path(opt.out_dir) / "manifest.jsonl").string();
    std::cout << "manifest: " << manifest_path << "\n";
    std::cout << "records: " << manifest.records.size() << ", training view: "
              << training_view(manifest).size() << "\n";
    std::cout << "digest: " << file_digest_hex(manifest_path) << "\n";
    return kExitOk;
}

struct EvalOptions {
    std::string manifest_path;
    std::string out_dir = "runs/eval";
    std::uint64_t seed = 0;
};

int cmd_eval(const EvalOptions& opt) {
    const std::vector<EvalRecord> records = load_eval_manifest(opt.manifest_path);
    MV_CHECK(!records.empty(), "eval manifest has no records");
    const fs::path base = fs::path(opt.manifest_path).parent_path();
    const MetricBackends backends = toy_backends();

    json resolved{{"manifest", opt.manifest_path}, {"records", records.size()}};
    write_run_snapshot(opt.out_dir, "eval", resolved, opt.seed);

    MetricTable table;
    for (const auto& rec : records) {
        ViewSet gen, ref;
        for (const auto& p : rec.gen_paths) gen.images.push_back(load_image((base / p).string()));
        for (const auto& p : rec.ref_paths) ref.images.push_back(load_image((base / p).string()));
        const ConsistencyReport report = evaluate(gen, ref, backends);
        for (const auto& err : report.errors) {
            std::cerr << "warning: " << rec.sample_id << ": " << err << "\n";
        }
        const auto named = report.named_values();
        if (table.columns.empty()) {
            for (const auto& [name, value] : named) table.columns.push_back(name);
        }
        MetricTable::Row row;
        row.id = rec.sample_id;
        row.scene = rec.scene;
        for (const auto& [name, value] : named) row.values.push_back(value);
        table.rows.push_back(std::move(row));
    }
    const std::string table_path = (fs::path(opt.out_dir) / "metrics.csv").string();
    write_metric_table(table_path, table);
    std::cout << "metrics: " << table_path << "\n";
    return kExitOk;
}

struct LayoutOptions {
    std::string scheme = "ts";
    int delta = 16;
    int t = 2;
    int height = 1;
    int width = 1;
    int channels = 4;
    std::vector<int> views;
    std::string out_path;
};

int cmd_layout_inspect(const LayoutOptions& opt) {
    LatentGrid grid;
    grid.temporal_len = opt.t;
    grid.height = opt.height;
    grid.width = opt.width;
    grid.channels = opt.channels;
    ReferenceShape shape;
    shape.views_per_subject = opt.views;
    const TokenLayout layout =
        build_layout(grid, shape, scheme_from_options(opt.scheme, opt.delta));
    const std::string dump = format_layout(layout);
    if (!opt.out_path.empty()) write_text_file(opt.out_path, dump);
    std::cout << dump;
    return kExitOk;
}

struct ReportOptions {
    std::string table_path;
    std::string out_dir = "runs/report";
    std::uint64_t seed = 0;
};

int cmd_report(const ReportOptions& opt) {
    const MetricTable table = read_metric_table(opt.table_path);
    json resolved{{"table", opt.table_path}};
    write_run_snapshot(opt.out_dir, "report", resolved, opt.seed);
    const std::vector<std::string> written = write_report(table, opt.out_dir);
    for (const auto& path : written) std::cout << path << "\n";
    return kExitOk;
}

struct AblateOptions {
    std::string out_dir = "runs/ablate";
    std::uint64_t seed = 0;
    int fixtures = 2;
    int train_steps = 30;
    int sample_steps = 6;
};

int cmd_ablate(const AblateOptions& opt) {
    AblationConfig cfg;
    cfg.out_dir = opt.out_dir;
    cfg.seed = opt.seed;
    cfg.fixtures = opt.fixtures;
    cfg.train_steps = opt.train_steps;
    cfg.sample_steps = opt.sample_steps;

    json resolved{{"fixtures", cfg.fixtures},
                  {"train_steps", cfg.train_steps},
                  {"sample_steps", cfg.sample_steps}};
    write_run_snapshot(opt.out_dir, "ablate", resolved, opt.seed);

    const AblationResult result = run_ablation(cfg);
    std::cout << "scheme table: " << result.scheme_table.rows.size() << " rows x "
              << result.scheme_table.columns.size() << " metrics\n";
    std::cout << "view table: " << result.view_table.rows.size() << " rows x "
              << result.view_table.columns.size() << " metrics\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-view subject-to-video laboratory"};
    app.require_subcommand(1);

    TrainOptions train_opt;
    auto* train_cmd = app.add_subcommand("train", "train a toy denoiser on synthetic fixtures");
    train_cmd->add_option("--config", train_opt.config_path, "JSON config file");
    train_cmd->add_option("--out", train_opt.out_dir, "output directory");
    train_cmd->add_option("--seed", train_opt.seed, "global seed");
    train_cmd->add_option("--scheme", train_opt.scheme, "vanilla, ss, or ts")
        ->check(CLI::IsMember({"vanilla", "ss", "ts"}));
    train_cmd->add_option("--delta", train_opt.delta, "temporal gap for the ts scheme");
    train_cmd->add_option("--steps", train_opt.steps, "optimizer steps");

    SampleOptions sample_opt;
    auto* sample_cmd = app.add_subcommand("sample", "sample a latent video from a checkpoint");
    sample_cmd->add_option("--checkpoint", sample_opt.checkpoint, "checkpoint file")
        ->required();
    sample_cmd->add_option("--out", sample_opt.out_dir, "output directory");
    sample_cmd->add_option("--seed", sample_opt.seed, "global seed");
    sample_cmd->add_option("--steps", sample_opt.steps, "integration steps");
    sample_cmd->add_option("--omega-ref", sample_opt.omega_ref, "reference guidance weight");
    sample_cmd->add_option("--omega-text", sample_opt.omega_text, "text guidance weight");
    sample_cmd->add_option("--t", sample_opt.t, "latent frames");
    sample_cmd->add_option("--hw", sample_opt.hw, "latent height and width");
    sample_cmd->add_option("--views", sample_opt.views, "mock reference views");
    sample_cmd->add_flag("--no-refs", sample_opt.no_refs, "sample without references");
    sample_cmd->add_option("--prompt", sample_opt.prompt_text, "prompt text");

    CurateOptions curate_opt;
    auto* curate_cmd = app.add_subcommand("curate", "run the mock curation pipeline");
    curate_cmd->add_option("--out", curate_opt.out_dir, "output directory");
    curate_cmd->add_option("--seed", curate_opt.seed, "global seed");
    curate_cmd->add_option("--specs", curate_opt.specs, "number of demo asset specs");
    curate_cmd->add_option("--raw-frames", curate_opt.raw_frames, "raw video length");
    curate_cmd->add_option("--clip-frames", curate_opt.clip_frames, "training clip length");
    curate_cmd->add_option("--keyframes", curate_opt.keyframes, "reference keyframes");

    EvalOptions eval_opt;
    auto* eval_cmd = app.add_subcommand("eval", "score generated views against references");
    eval_cmd->add_option("--manifest", eval_opt.manifest_path, "evaluation manifest (jsonl)")
        ->required();
    eval_cmd->add_option("--out", eval_opt.out_dir, "output directory");
    eval_cmd->add_option("--seed", eval_opt.seed, "global seed");

    LayoutOptions layout_opt;
    auto* layout_cmd = app.add_subcommand("layout-inspect", "dump token positions for a scheme");
    layout_cmd->add_option("--scheme", layout_opt.scheme, "vanilla, ss, or ts")
        ->check(CLI::IsMember({"vanilla", "ss", "ts"}));
    layout_cmd->add_option("--delta", layout_opt.delta, "temporal gap for the ts scheme");
    layout_cmd->add_option("--t", layout_opt.t, "latent frames");
    layout_cmd->add_option("--height", layout_opt.height, "latent height");
    layout_cmd->add_option("--width", layout_opt.width, "latent width");
    layout_cmd->add_option("--views", layout_opt.views, "views per subject, repeatable");
    layout_cmd->add_option("--out", layout_opt.out_path, "also write the dump to this file");

    ReportOptions report_opt;
    auto* report_cmd = app.add_subcommand("report", "aggregate a metric table and render figures");
    report_cmd->add_option("--table", report_opt.table_path, "metric table (csv)")->required();
    report_cmd->add_option("--out", report_opt.out_dir, "output directory");
    report_cmd->add_option("--seed", report_opt.seed, "global seed");

    AblateOptions ablate_opt;
    auto* ablate_cmd = app.add_subcommand("ablate", "scheme and view-count sweeps on toy models");
    ablate_cmd->add_option("--out", ablate_opt.out_dir, "output directory");
    ablate_cmd->add_option("--seed", ablate_opt.seed, "global seed");
    ablate_cmd->add_option("--fixtures", ablate_opt.fixtures, "benchmark fixtures");
    ablate_cmd->add_option("--train-steps", ablate_opt.train_steps, "inline training steps");
    ablate_cmd->add_option("--sample-steps", ablate_opt.sample_steps, "integration steps");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_opt);
        if (sample_cmd->parsed()) return cmd_sample(sample_opt);
        if (curate_cmd->parsed()) return cmd_curate(curate_opt);
        if (eval_cmd->parsed()) return cmd_eval(eval_opt);
        if (layout_cmd->parsed()) return cmd_layout_inspect(layout_opt);
        if (report_cmd->parsed()) return cmd_report(report_opt);
        if (ablate_cmd->parsed()) return cmd_ablate(ablate_opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
