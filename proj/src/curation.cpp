#include "mvlab/curation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "mvlab/common.hpp"
#include "mvlab/io.hpp"

namespace mvlab {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string scene_name(SceneType scene) { return scene == SceneType::OC ? "OC" : "HOI"; }

SceneType parse_scene(const std::string& name) {
    if (name == "OC") return SceneType::OC;
    if (name == "HOI") return SceneType::HOI;
    throw std::invalid_argument("unknown scene type: " + name);
}

bool AssetSpec::has_tag(const std::string& tag) const {
    return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

void AugRanges::validate() const {
    MV_CHECK_ARG(scale_lo > 0.0 && scale_lo <= scale_hi, "AugRanges: bad scale range");
    MV_CHECK_ARG(rotate_deg >= 0.0, "AugRanges: rotate_deg must be >= 0");
    MV_CHECK_ARG(shift_frac >= 0.0, "AugRanges: shift_frac must be >= 0");
    MV_CHECK_ARG(brightness >= 0.0, "AugRanges: brightness must be >= 0");
}

void CurationConfig::validate() const {
    MV_CHECK_ARG(raw_frames >= 2, "CurationConfig: raw_frames must be >= 2");
    MV_CHECK_ARG(clip_frames >= 1 && clip_frames < raw_frames,
                 "CurationConfig: clip must be shorter than the raw video");
    MV_CHECK_ARG(keyframes >= 1 && keyframes <= raw_frames,
                 "CurationConfig: keyframes must be in [1, raw_frames]");
    MV_CHECK_ARG(frame_height >= 8 && frame_width >= 8, "CurationConfig: frames too small");
    MV_CHECK_ARG(!out_dir.empty(), "CurationConfig: out_dir is required");
    aug.validate();
}

namespace {

struct Color {
    double r, g, b;
};

Color color_from_hash(std::uint64_t h, double lo, double hi) {
    const double span = hi - lo;
    return {lo + span * ((h >> 0) & 0xff) / 255.0, lo + span * ((h >> 8) & 0xff) / 255.0,
            lo + span * ((h >> 16) & 0xff) / 255.0};
}

void fill(Image& img, const Color& c) {
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            img.at(y, x, 0) = c.r;
            img.at(y, x, 1) = c.g;
            img.at(y, x, 2) = c.b;
        }
}

void draw_disc(Image& img, double cy, double cx, double radius, const Color& c) {
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const double dy = y - cy;
            const double dx = x - cx;
            if (dy * dy + dx * dx <= radius * radius) {
                img.at(y, x, 0) = c.r;
                img.at(y, x, 1) = c.g;
                img.at(y, x, 2) = c.b;
            }
        }
}

void draw_rect(Image& img, int y0, int x0, int h, int w, const Color& c) {
    for (int y = std::max(0, y0); y < std::min(img.height, y0 + h); ++y)
        for (int x = std::max(0, x0); x < std::min(img.width, x0 + w); ++x) {
            img.at(y, x, 0) = c.r;
            img.at(y, x, 1) = c.g;
            img.at(y, x, 2) = c.b;
        }
}

constexpr double kTau = 6.283185307179586477;

Image render_scene(const AssetSpec& spec, int height, int width, std::uint64_t seed) {
    const std::uint64_t h = fnv1a64(spec.category, seed);
    const Color bg = color_from_hash(h, 0.10, 0.35);
    const Color obj = color_from_hash(h >> 24, 0.55, 0.95);
    const Color detail = color_from_hash(h >> 40, 0.0, 0.5);
    Image img = Image::filled(height, width, 3);
    fill(img, bg);
    const double cy = (height - 1) / 2.0;
    const double cx = (width - 1) / 2.0;
    const double radius = std::min(height, width) / 4.0;
    draw_disc(img, cy, cx, radius, obj);
    const int side = std::max(1, static_cast<int>(radius / 3.0));
    draw_rect(img, static_cast<int>(cy) - side / 2,
              static_cast<int>(cx + 0.6 * radius) - side / 2, side, side, detail);
    return img;
}

void stamp_watermark(Image& img) {
    draw_rect(img, 0, 0, 3, 3, Color{1.0, 0.0, 1.0});
}

bool has_watermark(const Image& img) {
    return img.at(1, 1, 0) > 0.9 && img.at(1, 1, 1) < 0.1 && img.at(1, 1, 2) > 0.9;
}

std::vector<Image> render_video(const Image& scene, const AssetSpec& spec, int frames,
                                std::uint64_t seed) {
    MV_CHECK_ARG(frames >= 1, "i2v mock: frame count must be >= 1");
    scene.validate();
    MV_CHECK_ARG(scene.channels == 3, "i2v mock: scene must be a color image");
    const int height = scene.height;
    const int width = scene.width;
    // The palette comes from the scene image, mirroring an image-to-video
    // model keying off its conditioning frame.
    const Color bg{scene.at(height - 1, 0, 0), scene.at(height - 1, 0, 1),
                   scene.at(height - 1, 0, 2)};
    const int mid_y = (height - 1) / 2;
    const int mid_x = (width - 1) / 2;
    const Color obj{scene.at(mid_y, mid_x, 0), scene.at(mid_y, mid_x, 1),
                    scene.at(mid_y, mid_x, 2)};
    const Color detail = color_from_hash(fnv1a64(spec.category, seed) >> 40, 0.0, 0.5);
    const Color hand = color_from_hash(fnv1a64(spec.id, seed), 0.35, 0.6);
    const double phase = kTau * static_cast<double>(seed % 997) / 997.0;
    const double cy = (height - 1) / 2.0;
    const double cx = (width - 1) / 2.0;
    const double radius = std::min(height, width) / 4.0;
    const double amp = std::min(height, width) / 8.0;
    const bool watermark = spec.has_tag("watermark");

    std::vector<Image> out;
    out.reserve(static_cast<std::size_t>(frames));
    for (int f = 0; f < frames; ++f) {
        const double angle = phase + kTau * f / frames;
        Image img = Image::filled(height, width, 3);
        fill(img, bg);
        double ocy = cy;
        double ocx = cx;
        if (spec.scene == SceneType::OC) {
            ocy = cy + amp * std::sin(angle);
            ocx = cx + amp * std::cos(angle);
        } else {
            // Hand holds the object near center; slight sway as it turns.
            ocx = cx + 0.5 * amp * std::sin(angle);
            const int bar_w = std::max(2, width / 6);
            draw_rect(img, static_cast<int>(cy), static_cast<int>(ocx) - bar_w / 2,
                      height - static_cast<int>(cy), bar_w, hand);
        }
        draw_disc(img, ocy, ocx, radius, obj);
        const int side = std::max(1, static_cast<int>(radius / 3.0));
        draw_rect(img, static_cast<int>(ocy + 0.6 * radius * std::sin(angle)) - side / 2,
                  static_cast<int>(ocx + 0.6 * radius * std::cos(angle)) - side / 2, side, side,
                  detail);
        if (watermark) stamp_watermark(img);
        out.push_back(std::move(img));
    }
    return out;
}

std::string render_caption(const std::vector<Image>& frames, const std::string& category,
                           SceneType scene, std::uint64_t) {
    MV_CHECK_ARG(!frames.empty(), "caption mock: no frames");
    std::string caption = scene == SceneType::OC
                              ? "a camera orbit around a " + category
                              : "a person rotating a handheld " + category;
    if (has_watermark(frames.front())) caption += " with a watermark overlay";
    return caption;
}

bool prompt_is_grounded(const std::string& prompt) {
    return prompt.rfind("the most salient ", 0) == 0 || prompt.rfind("the handheld ", 0) == 0;
}

std::vector<Detection> segment_frame(const Image& frame, const std::string& prompt,
                                     std::uint64_t) {
    frame.validate();
    const Color bg{frame.at(frame.height - 1, 0, 0), frame.at(frame.height - 1, 0, 1),
                   frame.at(frame.height - 1, 0, 2)};
    int y_lo = frame.height, y_hi = -1, x_lo = frame.width, x_hi = -1;
    for (int y = 0; y < frame.height; ++y)
        for (int x = 0; x < frame.width; ++x) {
            const double diff = std::abs(frame.at(y, x, 0) - bg.r) +
                                std::abs(frame.at(y, x, 1) - bg.g) +
                                std::abs(frame.at(y, x, 2) - bg.b);
            if (diff > 0.15) {
                y_lo = std::min(y_lo, y);
                y_hi = std::max(y_hi, y);
                x_lo = std::min(x_lo, x);
                x_hi = std::max(x_hi, x);
            }
        }
    if (y_hi < y_lo) return {};
    const BBox box{y_lo, x_lo, y_hi - y_lo + 1, x_hi - x_lo + 1};
    if (prompt_is_grounded(prompt)) return {Detection{box, 0.9}};
    // An ungrounded prompt is ambiguous: the mock reports a decoy alongside
    // the real box, the way an open-vocabulary detector hedges.
    BBox decoy = box;
    decoy.height = std::max(1, box.height / 2);
    decoy.width = std::max(1, box.width / 2);
    return {Detection{box, 0.9}, Detection{decoy, 0.6}};
}

}  // namespace

StageClients mock_clients() {
    StageClients clients;
    clients.s2i = render_scene;
    clients.i2v = render_video;
    clients.caption = render_caption;
    clients.segment = segment_frame;
    clients.filter = [](const std::string& caption) {
        return caption.find("watermark") == std::string::npos;
    };
    return clients;
}

std::string augment_prompt(const std::string& category, SceneType scene) {
    MV_CHECK_ARG(!category.empty(), "augment_prompt: empty category");
    return scene == SceneType::OC ? "the most salient " + category
                                  : "the handheld " + category;
}

ClipSelection clip_training_segment(int raw_len, int clip_len, int keyframe_count,
                                    std::mt19937_64& rng) {
    MV_CHECK_ARG(raw_len >= 2, "clip_training_segment: raw video too short");
    MV_CHECK_ARG(clip_len >= 1 && clip_len < raw_len,
                 "clip_training_segment: clip must be shorter than the raw video");
    MV_CHECK_ARG(keyframe_count >= 1 && keyframe_count <= raw_len,
                 "clip_training_segment: keyframe count out of range");
    ClipSelection sel;
    std::uniform_int_distribution<int> start_dist(0, raw_len - clip_len);
    sel.clip_start = start_dist(rng);
    sel.clip_end = sel.clip_start + clip_len;
    sel.keyframes.reserve(static_cast<std::size_t>(keyframe_count));
    for (int j = 0; j < keyframe_count; ++j) {
        const int lo = j * raw_len / keyframe_count;
        const int hi = (j + 1) * raw_len / keyframe_count;
        std::uniform_int_distribution<int> stratum(lo, hi - 1);
        sel.keyframes.push_back(stratum(rng));
    }
    const bool any_outside = std::any_of(sel.keyframes.begin(), sel.keyframes.end(), [&](int k) {
        return k < sel.clip_start || k >= sel.clip_end;
    });
    if (!any_outside) {
        // Decoupling guarantee: force one keyframe out of the clip span.
        std::uniform_int_distribution<int> outside(0, raw_len - clip_len - 1);
        const int u = outside(rng);
        sel.keyframes.back() = u < sel.clip_start ? u : u + clip_len;
    }
    std::sort(sel.keyframes.begin(), sel.keyframes.end());
    return sel;
}

ExtractionResult extract_references(
    const std::vector<Image>& raw_frames, const std::vector<int>& keyframes,
    const std::function<std::vector<Detection>(const Image&, const std::string&, std::uint64_t)>&
        segment,
    const std::string& prompt, const AugRanges& ranges, std::uint64_t seed,
    std::mt19937_64& rng) {
    MV_CHECK_ARG(!raw_frames.empty(), "extract_references: no frames");
    ranges.validate();
    ExtractionResult result;
    for (const int kf : keyframes) {
        MV_CHECK_ARG(kf >= 0 && kf < static_cast<int>(raw_frames.size()),
                     "extract_references: keyframe out of range");
        const Image& frame = raw_frames[static_cast<std::size_t>(kf)];
        const std::uint64_t kf_seed = fnv1a64_bytes(&kf, sizeof(kf), seed);
        std::vector<Detection> dets;
        try {
            dets = segment(frame, prompt, kf_seed);
        } catch (const std::exception& ex) {
            result.failures.push_back("keyframe " + std::to_string(kf) +
                                      ": segmentation error: " + ex.what());
            continue;
        }
        if (dets.size() != 1) {
            result.failures.push_back("keyframe " + std::to_string(kf) + ": " +
                                      std::to_string(dets.size()) + " detections");
            continue;
        }
        const BBox box = dets.front().box;
        if (box.y0 < 0 || box.x0 < 0 || box.height < 1 || box.width < 1 ||
            box.y0 + box.height > frame.height || box.x0 + box.width > frame.width) {
            result.failures.push_back("keyframe " + std::to_string(kf) + ": box out of bounds");
            continue;
        }
        const Image crop = crop_image(frame, box.y0, box.x0, box.height, box.width);
        ImageTransform tf;
        std::uniform_real_distribution<double> scale(ranges.scale_lo, ranges.scale_hi);
        std::uniform_real_distribution<double> rot(-ranges.rotate_deg, ranges.rotate_deg);
        std::uniform_real_distribution<double> sx(-ranges.shift_frac * box.width,
                                                  ranges.shift_frac * box.width);
        std::uniform_real_distribution<double> sy(-ranges.shift_frac * box.height,
                                                  ranges.shift_frac * box.height);
        std::uniform_real_distribution<double> bright(-ranges.brightness, ranges.brightness);
        tf.scale = scale(rng);
        tf.rotate_deg = rot(rng);
        tf.shift_x = sx(rng);
        tf.shift_y = sy(rng);
        tf.brightness = bright(rng);
        result.crops.push_back(transform_image(crop, tf));
        result.crop_keyframes.push_back(kf);
        result.params.push_back(tf);
    }
    result.usable = !result.crops.empty();
    return result;
}

namespace {

std::string frame_filename(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%03d.ppm", index);
    return buf;
}

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace

CurationManifest run_pipeline(const std::vector<AssetSpec>& specs, const StageClients& clients,
                              const CurationConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    MV_CHECK_ARG(clients.s2i && clients.i2v && clients.caption && clients.segment &&
                     clients.filter,
                 "run_pipeline: missing stage client");
    fs::create_directories(cfg.out_dir);
    CurationManifest manifest;
    manifest.records.reserve(specs.size());
    for (const auto& spec : specs) {
        MV_CHECK_ARG(!spec.id.empty(), "run_pipeline: spec without id");
        CurationRecord rec;
        rec.id = spec.id;
        rec.scene = spec.scene;
        rec.category = spec.category;
        rec.raw_frames = cfg.raw_frames;
        const std::uint64_t base = fnv1a64(spec.id, seed);
        try {
            const std::uint64_t s_compose = fnv1a64("compose", base);
            const Image scene =
                clients.s2i(spec, cfg.frame_height, cfg.frame_width, s_compose);
            rec.provenance.push_back("compose: scene <- spec " + spec.id + " seed " +
                                     std::to_string(s_compose));

            const std::uint64_t s_synth = fnv1a64("synthesize", base);
            const std::vector<Image> frames =
                clients.i2v(scene, spec, cfg.raw_frames, s_synth);
            MV_CHECK(static_cast<int>(frames.size()) == cfg.raw_frames,
                     "i2v client returned wrong frame count");
            rec.video_handle = "videos/" + spec.id;
            const fs::path video_dir = fs::path(cfg.out_dir) / rec.video_handle;
            fs::create_directories(video_dir);
            for (int f = 0; f < cfg.raw_frames; ++f) {
                save_image((video_dir / frame_filename(f)).string(),
                           frames[static_cast<std::size_t>(f)]);
            }
            rec.provenance.push_back("synthesize: video " + rec.video_handle + " <- scene (" +
                                     std::to_string(cfg.raw_frames) + " frames, seed " +
                                     std::to_string(s_synth) + ")");

            const std::uint64_t s_caption = fnv1a64("caption", base);
            rec.caption = clients.caption(frames, spec.category, spec.scene, s_caption);
            rec.provenance.push_back("caption: caption <- video " + rec.video_handle);

            std::mt19937_64 rng(fnv1a64("extract", base));
            const ClipSelection sel =
                clip_training_segment(cfg.raw_frames, cfg.clip_frames, cfg.keyframes, rng);
            rec.clip_start = sel.clip_start;
            rec.clip_end = sel.clip_end;
            rec.keyframes = sel.keyframes;
            rec.prompt = augment_prompt(spec.category, spec.scene);
            const ExtractionResult ext =
                extract_references(frames, sel.keyframes, clients.segment, rec.prompt, cfg.aug,
                                   fnv1a64("segment", base), rng);
            const fs::path ref_dir = fs::path(cfg.out_dir) / "refs" / spec.id;
            if (!ext.crops.empty()) fs::create_directories(ref_dir);
            for (std::size_t i = 0; i < ext.crops.size(); ++i) {
                ReferenceCrop crop;
                crop.keyframe = ext.crop_keyframes[i];
                crop.path = "refs/" + spec.id + "/ref_" + std::to_string(i) + ".ppm";
                crop.aug = ext.params[i];
                save_image((fs::path(cfg.out_dir) / crop.path).string(), ext.crops[i]);
                rec.refs.push_back(std::move(crop));
            }
            rec.usable = ext.usable;
            for (const auto& failure : ext.failures) {
                rec.provenance.push_back("extract: failure: " + failure);
            }
            rec.provenance.push_back("extract: refs <- video " + rec.video_handle +
                                     " keyframes [" + join_ints(rec.keyframes) + "] prompt \"" +
                                     rec.prompt + "\"");

            const bool accept = clients.filter(rec.caption);
            rec.verdict = !rec.usable ? "unusable" : accept ? "accept" : "reject";
            rec.provenance.push_back("filter: verdict " + rec.verdict + " <- caption");
        } catch (const std::exception& ex) {
            rec.usable = false;
            rec.verdict = "error";
            rec.provenance.push_back(std::string("error: ") + ex.what());
        }
        manifest.records.push_back(std::move(rec));
    }
    save_manifest((fs::path(cfg.out_dir) / "manifest.jsonl").string(), manifest);
    return manifest;
}

namespace {

json transform_to_json(const ImageTransform& tf) {
    return json{{"scale", tf.scale},
                {"rotate", tf.rotate_deg},
                {"dx", tf.shift_x},
                {"dy", tf.shift_y},
                {"brightness", tf.brightness}};
}

ImageTransform transform_from_json(const json& j) {
    ImageTransform tf;
    tf.scale = j.at("scale").get<double>();
    tf.rotate_deg = j.at("rotate").get<double>();
    tf.shift_x = j.at("dx").get<double>();
    tf.shift_y = j.at("dy").get<double>();
    tf.brightness = j.at("brightness").get<double>();
    return tf;
}

}  // namespace

void save_manifest(const std::string& path, const CurationManifest& manifest) {
    std::string out;
    for (const auto& rec : manifest.records) {
        json refs = json::array();
        for (const auto& crop : rec.refs) {
            refs.push_back(json{{"keyframe", crop.keyframe},
                                {"path", crop.path},
                                {"aug", transform_to_json(crop.aug)}});
        }
        const json j{{"id", rec.id},
                     {"scene", scene_name(rec.scene)},
                     {"category", rec.category},
                     {"video", rec.video_handle},
                     {"raw_frames", rec.raw_frames},
                     {"clip", json::array({rec.clip_start, rec.clip_end})},
                     {"keyframes", rec.keyframes},
                     {"refs", refs},
                     {"caption", rec.caption},
                     {"prompt", rec.prompt},
                     {"usable", rec.usable},
                     {"verdict", rec.verdict},
                     {"provenance", rec.provenance}};
        out += j.dump();
        out += '\n';
    }
    write_text_file(path, out);
}

CurationManifest load_manifest(const std::string& path) {
    const std::string text = read_text_file(path);
    CurationManifest manifest;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;
        const json j = json::parse(line);
        CurationRecord rec;
        rec.id = j.at("id").get<std::string>();
        rec.scene = parse_scene(j.at("scene").get<std::string>());
        rec.category = j.at("category").get<std::string>();
        rec.video_handle = j.at("video").get<std::string>();
        rec.raw_frames = j.at("raw_frames").get<int>();
        rec.clip_start = j.at("clip")[0].get<int>();
        rec.clip_end = j.at("clip")[1].get<int>();
        rec.keyframes = j.at("keyframes").get<std::vector<int>>();
        for (const auto& r : j.at("refs")) {
            ReferenceCrop crop;
            crop.keyframe = r.at("keyframe").get<int>();
            crop.path = r.at("path").get<std::string>();
            crop.aug = transform_from_json(r.at("aug"));
            rec.refs.push_back(std::move(crop));
        }
        rec.caption = j.at("caption").get<std::string>();
        rec.prompt = j.at("prompt").get<std::string>();
        rec.usable = j.at("usable").get<bool>();
        rec.verdict = j.at("verdict").get<std::string>();
        rec.provenance = j.at("provenance").get<std::vector<std::string>>();
        manifest.records.push_back(std::move(rec));
    }
    return manifest;
}

std::vector<const CurationRecord*> training_view(const CurationManifest& manifest) {
    std::vector<const CurationRecord*> out;
    for (const auto& rec : manifest.records) {
        if (rec.usable && rec.verdict == "accept") out.push_back(&rec);
    }
    return out;
}

std::vector<AssetSpec> demo_specs(int count) {
    MV_CHECK_ARG(count >= 0, "demo_specs: negative count");
    static const char* kCategories[] = {"book",   "figurine", "mug",  "toy car",
                                        "camera", "vase",     "lamp", "plush bear"};
    std::vector<AssetSpec> specs;
    specs.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        AssetSpec spec;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "asset-%03d", i);
        spec.id = buf;
        spec.category = kCategories[i % 8];
        spec.scene = i % 2 == 0 ? SceneType::OC : SceneType::HOI;
        if (i % 4 == 3) spec.tags.push_back("watermark");
        specs.push_back(std::move(spec));
    }
    return specs;
}

}  // namespace mvlab
