#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fsl/autodiff.hpp"
#include "fsl/data.hpp"
#include "fsl/physics.hpp"
#include "fsl/spline.hpp"

namespace fsl::network {

enum class ModelKind { kMlp, kKan };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct Architecture {
  ModelKind kind = ModelKind::kMlp;
  std::vector<int> layer_widths;  // input width, hidden widths..., output width
  int grid_size = 5;              // KAN edges only
  int spline_order = 3;           // KAN edges only

  int input_width() const { return layer_widths.front(); }
  int output_width() const { return layer_widths.back(); }
  int layer_count() const { return static_cast<int>(layer_widths.size()) - 1; }

  static Architecture mlp(std::vector<int> widths);
  static Architecture kan(std::vector<int> widths, int grid_size = 5, int spline_order = 3);
  /// Appendix-style defaults: 16 -> 71-71-71 -> 1.
  static Architecture default_mlp();
  /// 7 trainable KAN layers of width 71 on a 16-wide input, scalar output.
  static Architecture default_kan();
};

void validate(const Architecture& arch);
std::size_t parameter_count(const Architecture& arch);

struct MlpLayer {
  int in = 0, out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> biases;   // out
};

struct KanLayer {
  int in = 0, out = 0;
  std::vector<spline::KanEdge> edges;  // edges[o * in + i]
};

/// A trained or initial model. Immutable in use; training produces new
/// parameter vectors via set_parameters on a private copy.
struct Model {
  Architecture arch;
  std::vector<MlpLayer> mlp_layers;
  std::vector<KanLayer> kan_layers;

  std::size_t parameter_count() const;
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);

  /// Evaluation-mode forward pass (dropout is the identity). Pure.
  double forward(std::span<const double> x) const;

  /// forward() packaged for the physics/evaluation modules (16-wide input).
  physics::Predictor predictor() const;
};

/// Deterministic seeded initialization. MLP weights are Glorot-uniform with
/// zero biases; KAN spline coefficients are small normals with unit spline
/// weight and fan-in-scaled base weights.
Model init_model(const Architecture& arch, std::uint64_t seed);

/// Recorded tape program for one model: set inputs, sweep, read the output
/// or its derivatives. Snapshots the model's parameters at construction.
class ForwardProgram {
 public:
  explicit ForwardProgram(const Model& model);

  double run(std::span<const double> x);
  /// Exact reverse-mode d(output)/d(x[feature]) at x.
  double input_sensitivity(std::span<const double> x, int feature);
  std::vector<double> input_gradient(std::span<const double> x);
  /// d(output)/d(theta) at x, in Model::parameters() order.
  std::vector<double> parameter_gradient(std::span<const double> x);

  autodiff::Tape& tape() { return tape_; }
  autodiff::NodeId output() const { return output_; }
  const std::vector<autodiff::NodeId>& input_ids() const { return inputs_; }

 private:
  void set_inputs(std::span<const double> x);

  int input_width_;
  autodiff::Tape tape_;
  std::vector<autodiff::NodeId> inputs_;
  autodiff::NodeId output_ = -1;
};

/// Exact reverse-mode sensitivity of the model output to one input
/// coordinate (one-shot convenience; use ForwardProgram for loops).
double input_sensitivity(const Model& model, std::span<const double> x, int feature);

enum class LossKind { kMse, kMsePlusPhysics };

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 11;
  int max_epochs = 3000;
  double dropout_rate = 0.1;
  LossKind loss_kind = LossKind::kMse;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double fd_step = 1e-3;        // penalty finite-difference step
  int collocation_points = 0;   // 0 = penalty on the batch points
  std::uint64_t seed = 0;
  int early_stop_patience = 200;
  double early_stop_min_delta = 1e-6;

  static TrainConfig mlp_defaults();
  static TrainConfig kan_defaults();
  static TrainConfig mlp_pil_defaults();
};

void validate(const TrainConfig& config);

struct TrainResult {
  Model model;                     // best-loss parameters
  std::vector<double> loss_trace;  // evaluation-mode full-train loss per epoch
  int epochs_run = 0;
  double final_loss = 0.0;         // loss of the returned parameters
};

/// Mini-batch Adam with seeded shuffling, dropout, optional physics penalty
/// and early stopping on the train loss.
TrainResult train(const Model& initial, const data::EncodedDataset& dataset,
                  const TrainConfig& config);

/// Evaluation-mode train loss under this config (the quantity in loss_trace).
double evaluate_loss(const Model& model, const data::EncodedDataset& dataset,
                     const TrainConfig& config);

/// Grid extension applied to every edge of a KAN model.
Model extend_grids(const Model& model, int new_grid_size);

struct CheckpointMeta {
  std::uint64_t seed = 0;
  int epochs_run = 0;
  double final_loss = 0.0;
  TrainConfig config;
};

struct Checkpoint {
  Model model;
  data::Normalizer normalizer;
  CheckpointMeta meta;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fsl::network
