#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "fsl/network.hpp"

namespace fsl::cli {

enum class CliModel { kKan, kMlp, kMlpPil };

std::string to_string(CliModel model);
CliModel cli_model_from_string(const std::string& name);

/// Resolved run configuration: architecture plus training settings. File
/// values override the per-model defaults (Appendix-style tables), so a
/// minimal config names only the model kind.
struct RunConfig {
  CliModel model = CliModel::kKan;
  int layers = 7;  // trainable layers (input->...->output transitions)
  int width = 71;  // uniform intermediate width
  int grid_size = 5;
  int spline_order = 3;
  network::TrainConfig train;

  network::Architecture architecture() const;
  network::ModelKind model_kind() const;
};

RunConfig default_run_config(CliModel model);

/// Parses the sectioned key-value config file. Unknown sections or keys are
/// rejected.
RunConfig parse_run_config(const std::string& path);

/// FSL_SEED environment override, if set (must parse as an unsigned integer).
std::optional<std::uint64_t> env_seed_override();

}  // namespace fsl::cli
