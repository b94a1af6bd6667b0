#include "mvlab/ablate.hpp"

#include <cstdio>
#include <filesystem>

#include "mvlab/common.hpp"
#include "mvlab/metrics.hpp"
#include "mvlab/sampler.hpp"
#include "mvlab/train.hpp"

namespace mvlab {

namespace fs = std::filesystem;

std::vector<BenchmarkFixture> make_benchmark(int count, int views, const std::string& asset_dir,
                                             std::uint64_t seed) {
    MV_CHECK_ARG(count >= 1, "make_benchmark: count must be >= 1");
    MV_CHECK_ARG(views >= 1, "make_benchmark: views must be >= 1");
    std::vector<AssetSpec> specs;
    static const char* kCategories[] = {"book", "figurine", "mug", "vase", "camera"};
    for (int i = 0; i < count; ++i) {
        AssetSpec spec;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "bench-%03d", i);
        spec.id = buf;
        spec.category = kCategories[i % 5];
        spec.scene = SceneType::OC;
        specs.push_back(std::move(spec));
    }
    CurationConfig cfg;
    cfg.raw_frames = 2 * views;
    cfg.clip_frames = views;
    cfg.keyframes = views;
    cfg.out_dir = asset_dir;
    const CurationManifest manifest = run_pipeline(specs, mock_clients(), cfg, seed);

    std::vector<BenchmarkFixture> fixtures;
    for (const auto& rec : manifest.records) {
        MV_CHECK(rec.usable && static_cast<int>(rec.refs.size()) == views,
                 "make_benchmark: record " + rec.id + " did not yield " + std::to_string(views) +
                     " reference crops");
        BenchmarkFixture fixture;
        fixture.id = rec.id;
        fixture.category = rec.category;
        for (const auto& crop : rec.refs) {
            fixture.ref_views.push_back(load_image((fs::path(asset_dir) / crop.path).string()));
        }
        fixtures.push_back(std::move(fixture));
    }
    return fixtures;
}

void AblationConfig::validate() const {
    MV_CHECK_ARG(!out_dir.empty(), "AblationConfig: out_dir is required");
    MV_CHECK_ARG(fixtures >= 1, "AblationConfig: fixtures must be >= 1");
    MV_CHECK_ARG(train_steps >= 1, "AblationConfig: train_steps must be >= 1");
    MV_CHECK_ARG(sample_steps >= 1, "AblationConfig: sample_steps must be >= 1");
    MV_CHECK_ARG(grid_t >= 1 && grid_hw >= 1 && channels >= 1, "AblationConfig: bad grid");
    MV_CHECK_ARG(layers >= 1 && heads >= 1 && head_dim >= 2, "AblationConfig: bad model dims");
}

namespace {

constexpr int kBenchViews = 4;
constexpr int kVocab = 64;

Prompt prompt_from_text(const std::string& text) {
    Prompt prompt;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find(' ', start);
        if (end == std::string::npos) end = text.size();
        if (end > start) {
            const std::string word = text.substr(start, end - start);
            prompt.ids.push_back(static_cast<int>(fnv1a64(word) % kVocab));
        }
        start = end + 1;
    }
    return prompt;
}

ReferenceSet refs_from_views(const std::vector<Image>& views, int keep, const LatentGrid& grid) {
    ReferenceSet refs;
    std::vector<ReferenceLatent> subject;
    for (int m = 0; m < keep; ++m) {
        subject.push_back(encode_reference(views[static_cast<std::size_t>(m)], grid.channels,
                                           grid.height, grid.width));
    }
    refs.subjects.push_back(std::move(subject));
    return refs;
}

MetricTable::Row evaluate_variant(const std::string& label, const Denoiser& model,
                                  const std::vector<BenchmarkFixture>& fixtures, int keep_views,
                                  const LatentGrid& grid, int sample_steps, std::uint64_t seed,
                                  const MetricBackends& backends,
                                  std::vector<std::string>& columns) {
    std::vector<double> sums;
    for (std::size_t fi = 0; fi < fixtures.size(); ++fi) {
        const auto& fixture = fixtures[fi];
        const ReferenceSet refs = refs_from_views(fixture.ref_views, keep_views, grid);
        const Prompt prompt = prompt_from_text("the most salient " + fixture.category);
        GuidanceConfig guidance;
        guidance.steps = sample_steps;
        guidance.seed = fnv1a64(fixture.id, seed);
        const SampleResult sampled = sample(model, &refs, &prompt, grid, guidance);

        ViewSet gen;
        for (int t = 0; t < grid.temporal_len; ++t) {
            gen.images.push_back(latent_frame_to_image(sampled.latent, t));
        }
        ViewSet ref;
        ref.images = fixture.ref_views;
        const ConsistencyReport report = evaluate(gen, ref, backends);
        const auto named = report.named_values();
        if (columns.empty()) {
            for (const auto& [name, value] : named) columns.push_back(name);
        }
        if (sums.empty()) sums.assign(named.size(), 0.0);
        for (std::size_t i = 0; i < named.size(); ++i) sums[i] += named[i].second;
    }
    MetricTable::Row row;
    row.id = label;
    row.scene = "OC";
    for (double s : sums) row.values.push_back(s / static_cast<double>(fixtures.size()));
    return row;
}

}  // namespace

AblationResult run_ablation(const AblationConfig& cfg) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    const std::string asset_dir = (fs::path(cfg.out_dir) / "benchmark_assets").string();
    const std::vector<BenchmarkFixture> fixtures =
        make_benchmark(cfg.fixtures, kBenchViews, asset_dir, cfg.seed);

    LatentGrid grid;
    grid.temporal_len = cfg.grid_t;
    grid.height = cfg.grid_hw;
    grid.width = cfg.grid_hw;
    grid.channels = cfg.channels;
    grid.validate();

    // Training data comes from the same curated assets: clip frames as the
    // video, reference crops as views, caption words as the prompt.
    const CurationManifest manifest =
        load_manifest((fs::path(asset_dir) / "manifest.jsonl").string());
    std::vector<TrainSample> samples;
    for (const auto& rec : manifest.records) {
        TrainSample sample;
        std::vector<Image> clip_frames;
        for (int t = 0; t < grid.temporal_len; ++t) {
            const int frame = std::min(rec.clip_start + t, rec.clip_end - 1);
            char buf[32];
            std::snprintf(buf, sizeof(buf), "frame_%03d.ppm", frame);
            clip_frames.push_back(
                load_image((fs::path(asset_dir) / rec.video_handle / buf).string()));
        }
        sample.video = encode_frames(clip_frames, grid);
        std::vector<Image> views;
        for (const auto& crop : rec.refs) {
            views.push_back(load_image((fs::path(asset_dir) / crop.path).string()));
        }
        sample.refs = refs_from_views(views, static_cast<int>(views.size()), grid);
        sample.prompt = prompt_from_text(rec.caption);
        samples.push_back(std::move(sample));
    }
    MV_CHECK(!samples.empty(), "run_ablation: no training samples");

    DenoiserConfig model_cfg;
    model_cfg.layers = cfg.layers;
    model_cfg.heads = cfg.heads;
    model_cfg.head_dim = cfg.head_dim;
    model_cfg.channels = cfg.channels;
    model_cfg.vocab_size = kVocab;
    model_cfg.scheme.ts_delta = cfg.ts_delta;

    TrainConfig train_cfg;
    train_cfg.lr = cfg.lr;

    const MetricBackends backends = toy_backends();
    AblationResult result;

    const SchemeKind schemes[] = {SchemeKind::Vanilla, SchemeKind::SS, SchemeKind::TS};
    Denoiser* ts_model = nullptr;
    std::vector<Denoiser> models;
    models.reserve(3);
    for (const SchemeKind kind : schemes) {
        DenoiserConfig variant_cfg = model_cfg;
        variant_cfg.scheme.kind = kind;
        models.emplace_back(variant_cfg, cfg.seed);
        Denoiser& model = models.back();
        train_loop(model, samples, train_cfg, cfg.train_steps, fnv1a64(scheme_name(kind), cfg.seed));
        result.scheme_table.rows.push_back(
            evaluate_variant(scheme_name(kind), model, fixtures, kBenchViews, grid,
                             cfg.sample_steps, cfg.seed, backends,
                             result.scheme_table.columns));
        if (kind == SchemeKind::TS) ts_model = &model;
    }

    for (int keep = 1; keep <= kBenchViews; ++keep) {
        result.view_table.rows.push_back(evaluate_variant(
            "views=" + std::to_string(keep), *ts_model, fixtures, keep, grid, cfg.sample_steps,
            cfg.seed, backends, result.view_table.columns));
    }

    write_metric_table((fs::path(cfg.out_dir) / "scheme_table.csv").string(),
                       result.scheme_table);
    write_metric_table((fs::path(cfg.out_dir) / "view_table.csv").string(), result.view_table);
    for (std::size_t i = 0; i < models.size(); ++i) {
        save_checkpoint(
            (fs::path(cfg.out_dir) / ("model_" + scheme_name(schemes[i]) + ".safetensors"))
                .string(),
            models[i]);
    }
    return result;
}

}  // namespace mvlab
