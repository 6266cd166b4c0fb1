#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fsl::cli {

struct GenerateOptions {
  int n = 300;
  std::uint64_t seed = 42;
  double noise = 0.1;
  int campaigns = 6;
  std::string out;
};
int cmd_generate(const GenerateOptions& options);

struct TrainOptions {
  std::string config_path;
  std::string data_path;
  std::string out_dir;
};
int cmd_train(const TrainOptions& options);

struct EvalOptions {
  std::string model;  // checkpoint path or "expert"
  std::string data_path;
  std::string splits = "kfold:21";  // kfold:<k> | kmeans | cluster:<i>
  std::optional<int> split_index;
  int k_max = 29;
  std::optional<std::uint64_t> seed;
  std::string report_path;
};
int cmd_eval(const EvalOptions& options);

struct PdOptions {
  std::string model;
  std::string data_path;
  std::string feature;  // physical feature name or "all"
  std::string out_dir = ".";
  std::string out_csv;  // single-feature override
  std::string out_svg;  // single-feature override
};
int cmd_pd(const PdOptions& options);

struct CompareOptions {
  std::vector<std::string> models;
  std::string data_path;
  std::string report_path;
};
int cmd_compare(const CompareOptions& options);

}  // namespace fsl::cli
