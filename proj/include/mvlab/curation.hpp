#ifndef MVLAB_CURATION_HPP
#define MVLAB_CURATION_HPP

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mvlab/image.hpp"

namespace mvlab {

/// OC: camera orbits a static object. HOI: a person rotates a handheld one.
enum class SceneType { OC, HOI };

std::string scene_name(SceneType scene);
SceneType parse_scene(const std::string& name);

struct AssetSpec {
    std::string id;
    std::string category;
    SceneType scene = SceneType::OC;
    /// "watermark" makes the synthesized video carry a corner marker.
    std::vector<std::string> tags;

    bool has_tag(const std::string& tag) const;
};

struct BBox {
    int y0 = 0;
    int x0 = 0;
    int height = 0;
    int width = 0;
};

struct Detection {
    BBox box;
    double score = 0.0;
};

/// The five external calls. Mocks are pure functions of (inputs, seed);
/// real services plug in behind the same signatures.
struct StageClients {
    std::function<Image(const AssetSpec&, int height, int width, std::uint64_t seed)> s2i;
    std::function<std::vector<Image>(const Image& scene, const AssetSpec&, int frames,
                                     std::uint64_t seed)>
        i2v;
    std::function<std::string(const std::vector<Image>& frames, const std::string& category,
                              SceneType scene, std::uint64_t seed)>
        caption;
    std::function<std::vector<Detection>(const Image& frame, const std::string& prompt,
                                         std::uint64_t seed)>
        segment;
    /// true = keep the record in the training view.
    std::function<bool(const std::string& caption)> filter;
};

StageClients mock_clients();

struct AugRanges {
    double scale_lo = 0.8;
    double scale_hi = 1.2;
    double rotate_deg = 15.0;
    /// Shift bound as a fraction of the crop side.
    double shift_frac = 0.1;
    double brightness = 0.1;

    void validate() const;
};

struct CurationConfig {
    int raw_frames = 12;
    int clip_frames = 6;
    int keyframes = 3;
    int frame_height = 32;
    int frame_width = 32;
    AugRanges aug;
    /// Frames and crops land beneath this directory; manifest paths are
    /// relative to it.
    std::string out_dir;

    void validate() const;
};

struct ReferenceCrop {
    int keyframe = 0;
    std::string path;
    ImageTransform aug;
};

struct CurationRecord {
    std::string id;
    SceneType scene = SceneType::OC;
    std::string category;
    std::string video_handle;
    int raw_frames = 0;
    int clip_start = 0;
    int clip_end = 0;
    std::vector<int> keyframes;
    std::vector<ReferenceCrop> refs;
    std::string caption;
    std::string prompt;
    bool usable = false;
    /// "accept", "reject", "unusable", or "error".
    std::string verdict;
    /// One "stage: output <- inputs" line per pipeline stage.
    std::vector<std::string> provenance;
};

struct CurationManifest {
    std::vector<CurationRecord> records;
};

/// OC -> "the most salient <category>"; HOI -> "the handheld <category>".
std::string augment_prompt(const std::string& category, SceneType scene);

struct ClipSelection {
    int clip_start = 0;
    int clip_end = 0;
    std::vector<int> keyframes;
};

/// Contiguous clip of clip_len plus keyframe_count stratified keyframes over
/// the whole raw video. At least one keyframe always falls outside the clip.
ClipSelection clip_training_segment(int raw_len, int clip_len, int keyframe_count,
                                    std::mt19937_64& rng);

struct ExtractionResult {
    std::vector<Image> crops;
    std::vector<int> crop_keyframes;
    std::vector<ImageTransform> params;
    std::vector<std::string> failures;
    /// False when every keyframe failed to segment.
    bool usable = false;
};

/// Segments each keyframe with the grounded prompt; exactly one detection is
/// required, anything else records a failure for that keyframe.
ExtractionResult extract_references(
    const std::vector<Image>& raw_frames, const std::vector<int>& keyframes,
    const std::function<std::vector<Detection>(const Image&, const std::string&, std::uint64_t)>&
        segment,
    const std::string& prompt, const AugRanges& ranges, std::uint64_t seed,
    std::mt19937_64& rng);

/// compose -> synthesize -> caption -> extract -> filter, one record per
/// asset, with per-record failure isolation. Assets land under cfg.out_dir.
CurationManifest run_pipeline(const std::vector<AssetSpec>& specs, const StageClients& clients,
                              const CurationConfig& cfg, std::uint64_t seed);

void save_manifest(const std::string& path, const CurationManifest& manifest);
CurationManifest load_manifest(const std::string& path);

/// Records that survived extraction and the filter stage.
std::vector<const CurationRecord*> training_view(const CurationManifest& manifest);

/// Cycling demo specs; every fourth one carries the "watermark" tag.
std::vector<AssetSpec> demo_specs(int count);

}  // namespace mvlab

#endif  // MVLAB_CURATION_HPP
