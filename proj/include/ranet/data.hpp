#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ranet/tensor.hpp"

namespace ranet {

enum class Label { covid, normal };
enum class Split { train, test, validation };

// One-hot column order is [COVID, Normal]; COVID is the positive class
// everywhere downstream.
constexpr int kPositiveClass = 0;

const char* to_string(Label l);
const char* to_string(Split s);
Label parse_label(const std::string& s);
Split parse_split(const std::string& s);

struct Sample {
  std::string id;
  std::string path;
  Label label = Label::covid;
  Split split = Split::train;
};

struct Manifest {
  std::vector<Sample> samples;
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.7, 0.2, 0.1};  // train, test, validation

  std::vector<Sample> of_split(Split s) const;
};

Tensor one_hot(Label l);

// Decode, replicate grayscale to RGB, bilinear-resize to target x target
// (aspect ratio ignored), scale to [0,1]. Result is [3,target,target].
Tensor preprocess_image(const std::string& path, int target_size = 224);

// Per class: seeded shuffle, floor(ratio*n) to each split in train/test/
// validation order, remainders to the largest fractional parts. Sample order
// of the input is preserved in the output.
Manifest stratified_split(std::vector<Sample> samples, std::array<double, 3> ratios, std::uint64_t seed);

// CSV with header id,path,label,split (UTF-8, LF line endings).
void save_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

// Collects <root>/COVID/*.{png,jpg,jpeg} and <root>/Normal/*.{png,jpg,jpeg},
// sorted by filename, verifying each file decodes.
std::vector<Sample> scan_data_root(const std::string& root);

}  // namespace ranet
