#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dciris/geometry.hpp"
#include "dciris/tensor.hpp"

namespace dciris {

struct AnnotationRecord {
  std::string image_path;  // relative to the dataset root
  std::string mask_path;
  std::int64_t identity_label = 0;
  std::string split;  // "train" or "test"
  DoubleCircle gt;
};

struct DatasetIndex {
  std::filesystem::path root;
  std::vector<AnnotationRecord> records;
};

// 8-bit binary PGM (P5, maxval 255); pixel k maps to k / 255.0.
Tensor read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Tensor& image);

void save_dataset_index(const DatasetIndex& index);
// Loads root/index.json and verifies every referenced file exists and every
// annotation is a valid double circle.
DatasetIndex load_dataset_index(const std::filesystem::path& root);

struct LoadedRecord {
  Tensor image;
  Tensor mask;
  DoubleCircle gt;
  std::int64_t identity = 0;
};

LoadedRecord load_record(const DatasetIndex& index, std::size_t i);

}  // namespace dciris
