#pragma once

#include <cstdint>
#include <vector>

#include "east/error.hpp"

namespace east::video {

// Raw pixel clip: frames x height x width x channels, uint8, t-major
// row-major channel-last. Used both for full videos (T = T_d) and for the
// T-frame halves the sampler cuts out.
struct Clip {
    int frames = 0;
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    Clip() = default;
    Clip(int t, int h, int w, int c)
        : frames(t), height(h), width(w), channels(c),
          pixels(std::size_t(t) * h * w * c, 0) {}

    std::size_t frame_bytes() const { return std::size_t(height) * width * channels; }
    std::uint8_t* frame(int t) { return pixels.data() + std::size_t(t) * frame_bytes(); }
    const std::uint8_t* frame(int t) const {
        return pixels.data() + std::size_t(t) * frame_bytes();
    }
    std::uint8_t& at(int t, int y, int x, int c) {
        return pixels[((std::size_t(t) * height + y) * width + x) * channels + c];
    }
    std::uint8_t at(int t, int y, int x, int c) const {
        return pixels[((std::size_t(t) * height + y) * width + x) * channels + c];
    }
    bool same_geometry(const Clip& o) const {
        return frames == o.frames && height == o.height && width == o.width &&
               channels == o.channels;
    }
};

using VideoTensor = Clip;  // a full T_d-frame video is just a long clip

struct LabeledVideo {
    VideoTensor video;
    int label = 0;
};

// Instrumented frame access. Evaluation paths read source videos only
// through one of these so prefix-only access is checkable, not assumed.
// `limit` is the first forbidden frame index (⌊rho*T_d⌋); a read at or past
// it is recorded and still served, the caller decides whether to fail hard.
class GuardedFrames {
public:
    GuardedFrames(const VideoTensor& v, int limit)
        : video_(&v), limit_(limit) {}

    const std::uint8_t* frame(int t) {
        ++reads_;
        if (t >= limit_) ++violations_;
        if (t > max_index_) max_index_ = t;
        return video_->frame(t);
    }

    const VideoTensor& video() const { return *video_; }
    int limit() const { return limit_; }
    std::uint64_t reads() const { return reads_; }
    std::uint64_t violations() const { return violations_; }
    int max_index_read() const { return max_index_; }

private:
    const VideoTensor* video_;
    int limit_ = 0;
    std::uint64_t reads_ = 0;
    std::uint64_t violations_ = 0;
    int max_index_ = -1;
};

}  // namespace east::video
