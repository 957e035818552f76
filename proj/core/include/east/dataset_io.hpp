#pragma once

#include <string>
#include <vector>

#include "east/video.hpp"

namespace east::video {

// Binary dataset container. Layout, all integers little-endian:
//   bytes 0..7   magic+version "EASTDS01"
//   bytes 8..31  u32 count, T_d, H, W, C, num_classes
//   per record   u32 label, then T_d*H*W*C pixel bytes
//                (t-major, row-major, channel-last)
// Total size is 32 + count*(4 + T_d*H*W*C); read(write(x)) == x bit-exactly.
inline constexpr char kDatasetMagic[8] = {'E', 'A', 'S', 'T', 'D', 'S', '0', '1'};

struct DatasetHeader {
    std::uint32_t count = 0;
    std::uint32_t frames = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t channels = 0;
    std::uint32_t num_classes = 0;
};

void write_dataset(const std::vector<LabeledVideo>& videos, int num_classes,
                   const std::string& path);

std::vector<LabeledVideo> read_dataset(const std::string& path,
                                       DatasetHeader* header_out = nullptr);

DatasetHeader read_dataset_header(const std::string& path);

}  // namespace east::video
