#ifndef MVLAB_LAYOUT_HPP
#define MVLAB_LAYOUT_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace mvlab {

/// Shape of a compressed video latent: T frames of C-channel H x W grids.
struct LatentGrid {
    int temporal_len = 1;
    int height = 1;
    int width = 1;
    int channels = 1;

    int tokens_per_frame() const { return height * width; }
    int video_tokens() const { return temporal_len * tokens_per_frame(); }
    void validate() const;
};

/// Per-subject reference view counts. Every view shares the video's H, W, C.
struct ReferenceShape {
    std::vector<int> views_per_subject;

    int subject_count() const { return static_cast<int>(views_per_subject.size()); }
    int total_views() const;
    void validate() const;
};

enum class SchemeKind { Vanilla, SS, TS };

std::string scheme_name(SchemeKind kind);
SchemeKind parse_scheme(const std::string& name);

struct LayoutScheme {
    SchemeKind kind = SchemeKind::TS;
    // Temporal gap between the video block and the references, and between
    // consecutive subjects' reference blocks. Only meaningful for TS.
    int ts_delta = 16;
};

struct Position {
    int t = 0;
    int h = 0;
    int w = 0;

    bool operator==(const Position&) const = default;
};

/// Token label: either the video or view m of subject i (both 0-based).
struct TokenSegment {
    static constexpr int kVideo = -1;

    int subject = kVideo;
    int view = 0;

    bool is_video() const { return subject == kVideo; }
    bool operator==(const TokenSegment&) const = default;
};

/// Flattened token list for the concatenated video + reference sequence.
/// Order is fixed: video tokens first (t-major, then h, then w), then
/// subjects in input order, views in input order, each view h-major.
struct TokenLayout {
    std::vector<Position> positions;
    std::vector<TokenSegment> segments;

    std::size_t size() const { return positions.size(); }
};

/// References appended directly after the video along the frame axis,
/// one frame per view, no gaps.
TokenLayout build_vanilla_layout(const LatentGrid& grid, const ReferenceShape& refs);

/// One frame per subject at T + i; views of that subject tile along the
/// width axis at offsets m*W.
TokenLayout build_ss_layout(const LatentGrid& grid, const ReferenceShape& refs);

/// Temporal gap of exactly `delta` frame indices between the video block and
/// the first subject, and between consecutive subjects' blocks; views of one
/// subject occupy adjacent frames.
TokenLayout build_ts_layout(const LatentGrid& grid, const ReferenceShape& refs, int delta);

TokenLayout build_layout(const LatentGrid& grid, const ReferenceShape& refs,
                         const LayoutScheme& scheme);

/// Line-oriented dump, one token per line: `t h w segment`.
std::string format_layout(const TokenLayout& layout);

}  // namespace mvlab

#endif  // MVLAB_LAYOUT_HPP
