#pragma once

#include <array>
#include <iostream>
#include <string>

#include "ranet/model.hpp"
#include "ranet/optim.hpp"

namespace ranet::cli {

struct SplitArgs {
  std::string data_root;
  std::string out_manifest;
  std::array<double, 3> ratios{0.7, 0.2, 0.1};
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::string manifest;
  std::string out_dir;
  ModelConfig model;
  TrainConfig train;
  int repeats = 1;
};

struct EvalArgs {
  std::string model_file;
  std::string manifest;
  std::string split = "test";
  std::string out_dir;
  int batch_size = 8;
};

struct PredictArgs {
  std::string model_file;
  std::string image;
};

struct FeatureMapsArgs {
  std::string model_file;
  std::string image;
  std::string out_dir;
  bool allow_fewer = false;
};

void cmd_split(const SplitArgs& args, std::ostream& out = std::cout);
void cmd_train(const TrainArgs& args, std::ostream& out = std::cout);
void cmd_eval(const EvalArgs& args, std::ostream& out = std::cout);
void cmd_predict(const PredictArgs& args, std::ostream& out = std::cout);
void cmd_featuremaps(const FeatureMapsArgs& args, std::ostream& out = std::cout);

// Exit codes: 0 ok, 1 usage error, 2 runtime error.
int run(int argc, const char* const* argv);

}  // namespace ranet::cli
