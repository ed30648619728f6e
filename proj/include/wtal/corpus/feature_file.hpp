#pragma once

#include <filesystem>

#include "wtal/corpus/sample.hpp"

namespace wtal::corpus {

// WTF1 layout, little-endian:
//   "WTF1" | u32 T | u32 D_rgb | u32 D_flow | u32 C | u8 has_gt | f32 seconds_per_segment
//   | T*D_rgb f32 | T*D_flow f32 | C u8 label
//   | if has_gt: u32 n_gt, n_gt * (u32 class, f32 start_seg, f32 end_seg)
// The video id is the file stem.
void write_feature_file(const std::filesystem::path& path, const VideoSample& video);

// Throws FormatError (with byte offset) on bad magic, zero dimensions or
// truncation, PathError when the file cannot be opened.
VideoSample load_feature_file(const std::filesystem::path& path);

}  // namespace wtal::corpus
