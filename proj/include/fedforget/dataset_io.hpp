#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "fedforget/dataset.hpp"

namespace fedforget {

// Binary layout (all little-endian):
//   "FFDS" magic, u8 version, u32 example count, u32 feature dim,
//   count*dim f64 features (row-major), count u16 labels, count u8 tags.
inline constexpr std::uint8_t kDatasetFormatVersion = 1;

void write_dataset(std::ostream& out, const DatasetSlice& slice);
DatasetSlice read_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, const DatasetSlice& slice);
DatasetSlice load_dataset(const std::filesystem::path& path);

/// Header `f0,...,f{d-1},label,tag` then one row per example.
void write_dataset_csv(std::ostream& out, const DatasetSlice& slice);

/// Reads an IDX image file (u8, rank >= 2) and an IDX label file into a
/// slice; pixel values are scaled to [0, 1] and flattened.
DatasetSlice load_idx(const std::filesystem::path& images,
                      const std::filesystem::path& labels);

}  // namespace fedforget
