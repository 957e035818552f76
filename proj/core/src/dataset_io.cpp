#include "east/dataset_io.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

namespace east::video {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

void put_u32(std::FILE* f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    if (std::fwrite(b, 1, 4, f) != 4) throw IoError("short write");
}

std::uint32_t get_u32(std::FILE* f, const std::string& path, long offset) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4)
        throw IoError(path + ": truncated file at offset " + std::to_string(offset));
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

}  // namespace

void write_dataset(const std::vector<LabeledVideo>& videos, int num_classes,
                   const std::string& path) {
    DatasetHeader h;
    h.count = std::uint32_t(videos.size());
    h.num_classes = std::uint32_t(num_classes);
    if (!videos.empty()) {
        const VideoTensor& v0 = videos.front().video;
        h.frames = std::uint32_t(v0.frames);
        h.height = std::uint32_t(v0.height);
        h.width = std::uint32_t(v0.width);
        h.channels = std::uint32_t(v0.channels);
        for (const auto& lv : videos) {
            if (!lv.video.same_geometry(v0))
                throw ConfigError("all videos in a dataset must share dimensions");
            if (lv.label < 0 || lv.label >= num_classes)
                throw ConfigError("label " + std::to_string(lv.label) +
                                  " outside [0, num_classes)");
        }
    }

    File f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError(path + ": cannot open for writing");
    if (std::fwrite(kDatasetMagic, 1, 8, f.get()) != 8) throw IoError("short write");
    put_u32(f.get(), h.count);
    put_u32(f.get(), h.frames);
    put_u32(f.get(), h.height);
    put_u32(f.get(), h.width);
    put_u32(f.get(), h.channels);
    put_u32(f.get(), h.num_classes);
    for (const auto& lv : videos) {
        put_u32(f.get(), std::uint32_t(lv.label));
        const auto& px = lv.video.pixels;
        if (std::fwrite(px.data(), 1, px.size(), f.get()) != px.size())
            throw IoError(path + ": short write");
    }
    if (std::fflush(f.get()) != 0) throw IoError(path + ": flush failed");
}

DatasetHeader read_dataset_header(const std::string& path) {
    File f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError(path + ": cannot open for reading");
    char magic[8];
    if (std::fread(magic, 1, 8, f.get()) != 8)
        throw IoError(path + ": truncated file at offset 0");
    if (std::memcmp(magic, kDatasetMagic, 8) != 0)
        throw IoError(path + ": magic/version mismatch at offset 0");
    DatasetHeader h;
    h.count = get_u32(f.get(), path, 8);
    h.frames = get_u32(f.get(), path, 12);
    h.height = get_u32(f.get(), path, 16);
    h.width = get_u32(f.get(), path, 20);
    h.channels = get_u32(f.get(), path, 24);
    h.num_classes = get_u32(f.get(), path, 28);
    return h;
}

std::vector<LabeledVideo> read_dataset(const std::string& path,
                                       DatasetHeader* header_out) {
    File f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError(path + ": cannot open for reading");
    char magic[8];
    if (std::fread(magic, 1, 8, f.get()) != 8)
        throw IoError(path + ": truncated file at offset 0");
    if (std::memcmp(magic, kDatasetMagic, 8) != 0)
        throw IoError(path + ": magic/version mismatch at offset 0");
    DatasetHeader h;
    h.count = get_u32(f.get(), path, 8);
    h.frames = get_u32(f.get(), path, 12);
    h.height = get_u32(f.get(), path, 16);
    h.width = get_u32(f.get(), path, 20);
    h.channels = get_u32(f.get(), path, 24);
    h.num_classes = get_u32(f.get(), path, 28);
    if (h.count > 0 &&
        (h.frames == 0 || h.height == 0 || h.width == 0 || h.channels == 0))
        throw IoError(path + ": dimension inconsistency in header at offset 8");

    const std::size_t video_bytes =
        std::size_t(h.frames) * h.height * h.width * h.channels;
    std::vector<LabeledVideo> out;
    out.reserve(h.count);
    long offset = 32;
    for (std::uint32_t i = 0; i < h.count; ++i) {
        LabeledVideo lv;
        lv.label = int(get_u32(f.get(), path, offset));
        offset += 4;
        if (lv.label >= int(h.num_classes))
            throw IoError(path + ": label out of range at offset " +
                          std::to_string(offset - 4));
        lv.video = VideoTensor(int(h.frames), int(h.height), int(h.width),
                               int(h.channels));
        if (std::fread(lv.video.pixels.data(), 1, video_bytes, f.get()) != video_bytes)
            throw IoError(path + ": truncated file at offset " + std::to_string(offset));
        offset += long(video_bytes);
        out.push_back(std::move(lv));
    }
    // Anything after the last record is not ours.
    unsigned char extra;
    if (std::fread(&extra, 1, 1, f.get()) == 1)
        throw IoError(path + ": trailing bytes at offset " + std::to_string(offset));
    if (header_out) *header_out = h;
    return out;
}

}  // namespace east::video
