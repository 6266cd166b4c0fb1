#include "fsl/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "fsl/errors.hpp"
#include "fsl/rng.hpp"

namespace fsl::network {

namespace ad = fsl::autodiff;
using ordered_json = nlohmann::ordered_json;

std::string to_string(ModelKind kind) {
  return kind == ModelKind::kMlp ? "mlp" : "kan";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "mlp") return ModelKind::kMlp;
  if (name == "kan") return ModelKind::kKan;
  throw ArgumentError("unknown model kind '" + name + "' (expected mlp or kan)");
}

Architecture Architecture::mlp(std::vector<int> widths) {
  Architecture arch;
  arch.kind = ModelKind::kMlp;
  arch.layer_widths = std::move(widths);
  validate(arch);
  return arch;
}

Architecture Architecture::kan(std::vector<int> widths, int grid_size, int spline_order) {
  Architecture arch;
  arch.kind = ModelKind::kKan;
  arch.layer_widths = std::move(widths);
  arch.grid_size = grid_size;
  arch.spline_order = spline_order;
  validate(arch);
  return arch;
}

Architecture Architecture::default_mlp() { return mlp({16, 71, 71, 71, 1}); }

Architecture Architecture::default_kan() {
  return kan({16, 71, 71, 71, 71, 71, 71, 1});
}

void validate(const Architecture& arch) {
  if (arch.layer_widths.size() < 2)
    throw ArgumentError("architecture: need at least input and output widths");
  for (int w : arch.layer_widths)
    if (w < 1) throw ArgumentError("architecture: layer widths must be >= 1");
  if (arch.layer_widths.back() != 1)
    throw ArgumentError("architecture: output must be scalar");
  if (arch.kind == ModelKind::kKan) {
    if (arch.grid_size < 1) throw ArgumentError("architecture: grid_size must be >= 1");
    if (arch.spline_order < 1) throw ArgumentError("architecture: spline_order must be >= 1");
  }
}

std::size_t parameter_count(const Architecture& arch) {
  std::size_t count = 0;
  for (int l = 0; l < arch.layer_count(); ++l) {
    std::size_t in = arch.layer_widths[l];
    std::size_t out = arch.layer_widths[l + 1];
    if (arch.kind == ModelKind::kMlp) {
      count += in * out + out;
    } else {
      std::size_t basis = arch.grid_size + arch.spline_order;
      count += in * out * (basis + 2);
    }
  }
  return count;
}

namespace {

Model make_skeleton(const Architecture& arch) {
  validate(arch);
  Model model;
  model.arch = arch;
  for (int l = 0; l < arch.layer_count(); ++l) {
    int in = arch.layer_widths[l];
    int out = arch.layer_widths[l + 1];
    if (arch.kind == ModelKind::kMlp) {
      MlpLayer layer;
      layer.in = in;
      layer.out = out;
      layer.weights.assign(static_cast<std::size_t>(in) * out, 0.0);
      layer.biases.assign(out, 0.0);
      model.mlp_layers.push_back(std::move(layer));
    } else {
      KanLayer layer;
      layer.in = in;
      layer.out = out;
      spline::SplineGrid grid = spline::make_grid(0.0, 1.0, arch.grid_size, arch.spline_order);
      layer.edges.resize(static_cast<std::size_t>(in) * out);
      for (auto& edge : layer.edges) {
        edge.grid = grid;
        edge.coefficients.assign(grid.basis_count(), 0.0);
        edge.base_weight = 0.0;
        edge.spline_weight = 0.0;
      }
      model.kan_layers.push_back(std::move(layer));
    }
  }
  return model;
}

double stable_logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

std::size_t Model::parameter_count() const { return network::parameter_count(arch); }

std::vector<double> Model::parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  if (arch.kind == ModelKind::kMlp) {
    for (const auto& layer : mlp_layers) {
      flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
      flat.insert(flat.end(), layer.biases.begin(), layer.biases.end());
    }
  } else {
    for (const auto& layer : kan_layers) {
      for (const auto& edge : layer.edges) {
        flat.insert(flat.end(), edge.coefficients.begin(), edge.coefficients.end());
        flat.push_back(edge.base_weight);
        flat.push_back(edge.spline_weight);
      }
    }
  }
  return flat;
}

void Model::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count())
    throw ArgumentError("set_parameters: expected " + std::to_string(parameter_count()) +
                        " values, got " + std::to_string(flat.size()));
  std::size_t pos = 0;
  if (arch.kind == ModelKind::kMlp) {
    for (auto& layer : mlp_layers) {
      std::copy_n(flat.begin() + pos, layer.weights.size(), layer.weights.begin());
      pos += layer.weights.size();
      std::copy_n(flat.begin() + pos, layer.biases.size(), layer.biases.begin());
      pos += layer.biases.size();
    }
  } else {
    for (auto& layer : kan_layers) {
      for (auto& edge : layer.edges) {
        std::copy_n(flat.begin() + pos, edge.coefficients.size(), edge.coefficients.begin());
        pos += edge.coefficients.size();
        edge.base_weight = flat[pos++];
        edge.spline_weight = flat[pos++];
      }
    }
  }
}

double Model::forward(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != arch.input_width())
    throw ArgumentError("forward: expected " + std::to_string(arch.input_width()) +
                        " inputs, got " + std::to_string(x.size()));
  for (double v : x)
    if (!std::isfinite(v)) throw ArgumentError("forward: non-finite input");

  std::vector<double> current(x.begin(), x.end());
  std::vector<double> next;
  if (arch.kind == ModelKind::kMlp) {
    for (std::size_t l = 0; l < mlp_layers.size(); ++l) {
      const auto& layer = mlp_layers[l];
      bool last = l + 1 == mlp_layers.size();
      next.assign(layer.out, 0.0);
      for (int o = 0; o < layer.out; ++o) {
        double acc = layer.biases[o];
        const double* w = layer.weights.data() + static_cast<std::size_t>(o) * layer.in;
        for (int i = 0; i < layer.in; ++i) acc = w[i] * current[i] + acc;
        next[o] = last ? acc : stable_softplus(acc);
      }
      current.swap(next);
    }
  } else {
    std::vector<double> basis;
    std::vector<double> scratch;
    std::vector<double> silu_vals;
    for (std::size_t l = 0; l < kan_layers.size(); ++l) {
      const auto& layer = kan_layers[l];
      const auto& grid = layer.edges.front().grid;
      int basis_count = grid.basis_count();
      basis.resize(static_cast<std::size_t>(layer.in) * basis_count);
      scratch.resize(grid.grid_size + 2 * grid.order);
      silu_vals.resize(layer.in);
      for (int i = 0; i < layer.in; ++i) {
        spline::basis_eval_into(grid, current[i],
                                std::span<double>(basis.data() + static_cast<std::size_t>(i) * basis_count,
                                                  basis_count),
                                scratch);
        silu_vals[i] = current[i] * stable_logistic(current[i]);
      }
      next.assign(layer.out, 0.0);
      for (int o = 0; o < layer.out; ++o) {
        double acc = 0.0;
        for (int i = 0; i < layer.in; ++i) {
          const auto& edge = layer.edges[static_cast<std::size_t>(o) * layer.in + i];
          const double* b = basis.data() + static_cast<std::size_t>(i) * basis_count;
          double s = edge.coefficients[0] * b[0];
          for (int k = 1; k < basis_count; ++k) s = edge.coefficients[k] * b[k] + s;
          double base_term = edge.base_weight * silu_vals[i];
          double edge_val = edge.spline_weight * s + base_term;
          acc = (i == 0) ? edge_val : acc + edge_val;
        }
        next[o] = acc;
      }
      current.swap(next);
    }
  }
  double out = current[0];
  if (!std::isfinite(out))
    throw NumericError("forward: non-finite output");
  return out;
}

physics::Predictor Model::predictor() const {
  if (arch.input_width() != data::kFeatureCount)
    throw ArgumentError("predictor: model input width is not " +
                        std::to_string(data::kFeatureCount));
  auto shared = std::make_shared<const Model>(*this);
  return [shared](const data::FeatureVector16& x) {
    return shared->forward(std::span<const double>(x.data(), x.size()));
  };
}

Model init_model(const Architecture& arch, std::uint64_t seed) {
  Model model = make_skeleton(arch);
  Rng rng(seed);
  if (arch.kind == ModelKind::kMlp) {
    for (auto& layer : model.mlp_layers) {
      double bound = std::sqrt(6.0 / (layer.in + layer.out));
      for (auto& w : layer.weights) w = rng.uniform(-bound, bound);
      // biases stay zero
    }
  } else {
    for (auto& layer : model.kan_layers) {
      double base_bound = std::sqrt(6.0 / layer.in);
      for (auto& edge : layer.edges) {
        edge.spline_weight = 1.0;
        for (auto& c : edge.coefficients) c = rng.normal(0.0, 0.1 * edge.spline_weight);
        edge.base_weight = rng.uniform(-base_bound, base_bound);
      }
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Tape recording
// ---------------------------------------------------------------------------

namespace {

std::vector<ad::NodeId> record_parameters(ad::Tape& tape, const Model& model) {
  std::vector<double> flat = model.parameters();
  std::vector<ad::NodeId> ids;
  ids.reserve(flat.size());
  for (double v : flat) ids.push_back(tape.parameter(v));
  return ids;
}

// Cox-de Boor recursion recorded as tape nodes. Order-0 interval indicators
// carry zero derivative, so d/dx of the result is the exact a.e. B-spline
// derivative.
std::vector<ad::NodeId> record_basis(ad::Tape& tape, ad::NodeId x,
                                     const spline::SplineGrid& grid) {
  ad::NodeId xc = tape.clamp(x, grid.domain_lo, grid.domain_hi);
  const auto& t = grid.knots;
  int intervals = static_cast<int>(t.size()) - 1;
  std::vector<ad::NodeId> current(intervals);
  for (int j = 0; j < intervals; ++j) current[j] = tape.interval(xc, t[j], t[j + 1]);
  for (int k = 1; k <= grid.order; ++k) {
    std::vector<ad::NodeId> next(intervals - k);
    for (int j = 0; j < intervals - k; ++j) {
      double d1 = t[j + k] - t[j];
      double d2 = t[j + k + 1] - t[j + 1];
      ad::NodeId left = tape.mul(tape.axpb(xc, 1.0 / d1, -t[j] / d1), current[j]);
      ad::NodeId right = tape.mul(tape.axpb(xc, -1.0 / d2, t[j + k + 1] / d2), current[j + 1]);
      next[j] = tape.add(left, right);
    }
    current = std::move(next);
  }
  current.resize(grid.basis_count());
  return current;
}

// Records one evaluation of the model. `params` ids are consumed in
// Model::parameters() order; `masks` (one per non-final layer unit) applies
// dropout multipliers and may be empty.
ad::NodeId record_forward(ad::Tape& tape, const Model& model,
                          std::span<const ad::NodeId> params,
                          std::span<const ad::NodeId> inputs,
                          std::span<const ad::NodeId> masks) {
  std::vector<ad::NodeId> current(inputs.begin(), inputs.end());
  std::size_t p = 0;
  std::size_t m = 0;
  int layer_count = model.arch.layer_count();

  if (model.arch.kind == ModelKind::kMlp) {
    for (int l = 0; l < layer_count; ++l) {
      const auto& layer = model.mlp_layers[l];
      bool last = l + 1 == layer_count;
      // parameters() order: all weights (row-major), then biases
      std::size_t weights_at = p;
      std::size_t biases_at = p + static_cast<std::size_t>(layer.in) * layer.out;
      p = biases_at + layer.out;
      std::vector<ad::NodeId> next(layer.out);
      for (int o = 0; o < layer.out; ++o) {
        ad::NodeId acc = params[biases_at + o];
        for (int i = 0; i < layer.in; ++i)
          acc = tape.mul_add(params[weights_at + static_cast<std::size_t>(o) * layer.in + i],
                             current[i], acc);
        ad::NodeId unit = last ? acc : tape.softplus(acc);
        if (!last && !masks.empty()) unit = tape.mul(unit, masks[m + o]);
        next[o] = unit;
      }
      if (!last && !masks.empty()) m += layer.out;
      current = std::move(next);
    }
  } else {
    for (int l = 0; l < layer_count; ++l) {
      const auto& layer = model.kan_layers[l];
      bool last = l + 1 == layer_count;
      const auto& grid = layer.edges.front().grid;
      int basis_count = grid.basis_count();
      std::vector<ad::NodeId> basis;
      basis.reserve(static_cast<std::size_t>(layer.in) * basis_count);
      std::vector<ad::NodeId> silu_ids(layer.in);
      for (int i = 0; i < layer.in; ++i) {
        auto b = record_basis(tape, current[i], grid);
        basis.insert(basis.end(), b.begin(), b.end());
        silu_ids[i] = tape.silu(current[i]);
      }
      std::size_t per_edge = static_cast<std::size_t>(basis_count) + 2;
      std::vector<ad::NodeId> next(layer.out);
      for (int o = 0; o < layer.out; ++o) {
        ad::NodeId acc = -1;
        for (int i = 0; i < layer.in; ++i) {
          std::size_t edge_at = p + (static_cast<std::size_t>(o) * layer.in + i) * per_edge;
          const ad::NodeId* b = basis.data() + static_cast<std::size_t>(i) * basis_count;
          ad::NodeId s = tape.mul(params[edge_at], b[0]);
          for (int k = 1; k < basis_count; ++k)
            s = tape.mul_add(params[edge_at + k], b[k], s);
          ad::NodeId base_term = tape.mul(params[edge_at + basis_count], silu_ids[i]);
          ad::NodeId edge_val = tape.mul_add(params[edge_at + basis_count + 1], s, base_term);
          acc = (i == 0) ? edge_val : tape.add(acc, edge_val);
        }
        if (!last && !masks.empty()) acc = tape.mul(acc, masks[m + o]);
        next[o] = acc;
      }
      if (!last && !masks.empty()) m += layer.out;
      p += static_cast<std::size_t>(layer.in) * layer.out * per_edge;
      current = std::move(next);
    }
  }
  return current[0];
}

std::size_t mask_count(const Architecture& arch) {
  std::size_t n = 0;
  for (std::size_t l = 1; l + 1 < arch.layer_widths.size(); ++l) n += arch.layer_widths[l];
  return n;
}

}  // namespace

ForwardProgram::ForwardProgram(const Model& model) : input_width_(model.arch.input_width()) {
  auto params = record_parameters(tape_, model);
  inputs_.reserve(input_width_);
  for (int i = 0; i < input_width_; ++i) inputs_.push_back(tape_.leaf());
  output_ = record_forward(tape_, model, params, inputs_, {});
}

void ForwardProgram::set_inputs(std::span<const double> x) {
  if (static_cast<int>(x.size()) != input_width_)
    throw ArgumentError("program: expected " + std::to_string(input_width_) + " inputs");
  for (int i = 0; i < input_width_; ++i) tape_.set_value(inputs_[i], x[i]);
}

double ForwardProgram::run(std::span<const double> x) {
  set_inputs(x);
  tape_.forward();
  return tape_.value(output_);
}

double ForwardProgram::input_sensitivity(std::span<const double> x, int feature) {
  if (feature < 0 || feature >= input_width_)
    throw ArgumentError("input_sensitivity: feature index " + std::to_string(feature) +
                        " out of range");
  run(x);
  return tape_.derivative(output_, inputs_[feature]);
}

std::vector<double> ForwardProgram::input_gradient(std::span<const double> x) {
  run(x);
  return tape_.derivatives(output_, inputs_);
}

std::vector<double> ForwardProgram::parameter_gradient(std::span<const double> x) {
  run(x);
  return tape_.gradient(output_);
}

double input_sensitivity(const Model& model, std::span<const double> x, int feature) {
  ForwardProgram program(model);
  return program.input_sensitivity(x, feature);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TrainConfig TrainConfig::mlp_defaults() {
  TrainConfig cfg;
  cfg.max_epochs = 3000;
  cfg.dropout_rate = 0.1;
  return cfg;
}

TrainConfig TrainConfig::kan_defaults() {
  TrainConfig cfg;
  cfg.max_epochs = 500;
  cfg.dropout_rate = 0.2;
  return cfg;
}

TrainConfig TrainConfig::mlp_pil_defaults() {
  TrainConfig cfg = mlp_defaults();
  cfg.loss_kind = LossKind::kMsePlusPhysics;
  cfg.gamma1 = 0.1;
  cfg.gamma2 = 0.1;
  return cfg;
}

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate))
    throw ArgumentError("train config: learning_rate must be finite and >= 0");
  if (cfg.batch_size < 1) throw ArgumentError("train config: batch_size must be >= 1");
  if (cfg.max_epochs < 0) throw ArgumentError("train config: max_epochs must be >= 0");
  if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0)
    throw ArgumentError("train config: dropout_rate must lie in [0, 1)");
  if (cfg.gamma1 < 0.0 || cfg.gamma2 < 0.0)
    throw ArgumentError("train config: penalty strengths must be >= 0");
  if (!(cfg.fd_step > 0.0)) throw ArgumentError("train config: fd_step must be > 0");
  if (cfg.collocation_points < 0)
    throw ArgumentError("train config: collocation_points must be >= 0");
  if (cfg.early_stop_patience < 1)
    throw ArgumentError("train config: early_stop_patience must be >= 1");
  if (cfg.early_stop_min_delta < 0.0)
    throw ArgumentError("train config: early_stop_min_delta must be >= 0");
}

namespace {

struct LossProgram {
  ad::Tape tape;
  std::vector<ad::NodeId> params;
  std::vector<ad::NodeId> inputs;
  std::vector<ad::NodeId> masks;
  ad::NodeId target = -1;
  ad::NodeId prediction = -1;
  ad::NodeId loss = -1;

  void set_params(std::span<const double> values) {
    for (std::size_t i = 0; i < params.size(); ++i) tape.set_value(params[i], values[i]);
  }
  void set_inputs(const data::FeatureVector16& x) {
    for (std::size_t i = 0; i < x.size(); ++i) tape.set_value(inputs[i], x[i]);
  }
  void set_masks(std::span<const double> values) {
    for (std::size_t i = 0; i < masks.size(); ++i) tape.set_value(masks[i], values[i]);
  }
};

// Adds the two monotonicity terms for one evaluation point to `loss_node`.
// The derivative is a symmetric finite difference of two forward passes that
// share the dropout mask leaves.
ad::NodeId record_penalty_terms(ad::Tape& tape, const Model& model,
                                std::span<const ad::NodeId> params,
                                std::span<const ad::NodeId> inputs,
                                std::span<const ad::NodeId> masks,
                                const TrainConfig& cfg, ad::NodeId loss_node) {
  struct Term {
    int feature;
    double gamma;
    bool positive_is_violation;
  };
  const Term terms[] = {{data::kTRatio, cfg.gamma1, true},
                        {data::kYocHe, cfg.gamma2, false}};
  for (const auto& term : terms) {
    if (term.gamma == 0.0) continue;
    std::vector<ad::NodeId> shifted(inputs.begin(), inputs.end());
    shifted[term.feature] = tape.axpb(inputs[term.feature], 1.0, cfg.fd_step);
    ad::NodeId f_plus = record_forward(tape, model, params, shifted, masks);
    shifted[term.feature] = tape.axpb(inputs[term.feature], 1.0, -cfg.fd_step);
    ad::NodeId f_minus = record_forward(tape, model, params, shifted, masks);
    double slope = 1.0 / (2.0 * cfg.fd_step);
    ad::NodeId d = tape.axpb(tape.sub(f_plus, f_minus),
                             term.positive_is_violation ? slope : -slope, 0.0);
    ad::NodeId violation = tape.max_zero(d);
    loss_node = loss_node < 0 ? tape.axpb(violation, term.gamma, 0.0)
                              : tape.add(loss_node, tape.axpb(violation, term.gamma, 0.0));
  }
  return loss_node;
}

LossProgram build_sample_loss_program(const Model& model, const TrainConfig& cfg,
                                      bool penalty_on_batch) {
  LossProgram program;
  program.params = record_parameters(program.tape, model);
  for (int i = 0; i < model.arch.input_width(); ++i)
    program.inputs.push_back(program.tape.leaf());
  if (cfg.dropout_rate > 0.0) {
    std::size_t masks = mask_count(model.arch);
    for (std::size_t i = 0; i < masks; ++i) program.masks.push_back(program.tape.leaf(1.0));
  }
  program.prediction = record_forward(program.tape, model, program.params, program.inputs,
                                      program.masks);
  program.target = program.tape.leaf();
  ad::NodeId residual = program.tape.sub(program.prediction, program.target);
  program.loss = program.tape.mul(residual, residual);
  if (penalty_on_batch)
    program.loss = record_penalty_terms(program.tape, model, program.params, program.inputs,
                                        program.masks, cfg, program.loss);
  return program;
}

LossProgram build_penalty_program(const Model& model, const TrainConfig& cfg) {
  LossProgram program;
  program.params = record_parameters(program.tape, model);
  for (int i = 0; i < model.arch.input_width(); ++i)
    program.inputs.push_back(program.tape.leaf());
  if (cfg.dropout_rate > 0.0) {
    std::size_t masks = mask_count(model.arch);
    for (std::size_t i = 0; i < masks; ++i) program.masks.push_back(program.tape.leaf(1.0));
  }
  program.loss = record_penalty_terms(program.tape, model, program.params, program.inputs,
                                      program.masks, cfg, -1);
  return program;
}

std::vector<data::FeatureVector16> make_collocation_points(const TrainConfig& cfg) {
  std::vector<data::FeatureVector16> points;
  if (cfg.collocation_points <= 0) return points;
  Rng rng = Rng(cfg.seed).fork(0x636f6c6cULL);  // independent collocation stream
  points.reserve(cfg.collocation_points);
  for (int i = 0; i < cfg.collocation_points; ++i) {
    data::FeatureVector16 x{};
    for (int f = 0; f < data::kPhysicalFeatureCount; ++f) x[f] = rng.uniform01();
    x[data::kPhysicalFeatureCount + rng.below(data::kCompositionCount)] = 1.0;
    points.push_back(x);
  }
  return points;
}

physics::PhysicsPenaltyConfig penalty_config(const TrainConfig& cfg) {
  physics::PhysicsPenaltyConfig pc;
  if (cfg.loss_kind == LossKind::kMsePlusPhysics) {
    pc.gamma1 = cfg.gamma1;
    pc.gamma2 = cfg.gamma2;
  } else {
    pc.gamma1 = 0.0;
    pc.gamma2 = 0.0;
  }
  pc.fd_step = cfg.fd_step;
  return pc;
}

}  // namespace

double evaluate_loss(const Model& model, const data::EncodedDataset& dataset,
                     const TrainConfig& cfg) {
  auto predictor = model.predictor();
  physics::PhysicsPenaltyConfig pc = penalty_config(cfg);
  std::vector<double> predictions(dataset.features.size());
  for (std::size_t i = 0; i < dataset.features.size(); ++i)
    predictions[i] = predictor(dataset.features[i]);
  double loss = physics::mse_loss(predictions, dataset.targets);
  if (pc.gamma1 > 0.0 || pc.gamma2 > 0.0) {
    auto collocation = make_collocation_points(cfg);
    std::span<const data::FeatureVector16> points =
        collocation.empty() ? std::span<const data::FeatureVector16>(dataset.features)
                            : std::span<const data::FeatureVector16>(collocation);
    loss += physics::physics_penalty(predictor, points, pc);
  }
  return loss;
}

TrainResult train(const Model& initial, const data::EncodedDataset& dataset,
                  const TrainConfig& cfg) {
  validate(cfg);
  if (dataset.features.empty()) throw ArgumentError("train: empty training set");
  if (dataset.features.size() != dataset.targets.size())
    throw ArgumentError("train: features/targets size mismatch");
  if (initial.arch.input_width() != data::kFeatureCount)
    throw ArgumentError("train: model input width must be " +
                        std::to_string(data::kFeatureCount));

  bool physics_loss = cfg.loss_kind == LossKind::kMsePlusPhysics &&
                      (cfg.gamma1 > 0.0 || cfg.gamma2 > 0.0);
  bool penalty_on_batch = physics_loss && cfg.collocation_points == 0;

  Model model = initial;
  std::vector<double> params = model.parameters();
  LossProgram program = build_sample_loss_program(model, cfg, penalty_on_batch);

  LossProgram penalty_program;
  std::vector<data::FeatureVector16> collocation;
  if (physics_loss && cfg.collocation_points > 0) {
    penalty_program = build_penalty_program(model, cfg);
    collocation = make_collocation_points(cfg);
  }

  autodiff::AdamState adam(params.size());
  std::vector<double> grads(params.size(), 0.0);
  Rng rng = Rng(cfg.seed).fork(0x747261696eULL);  // training stream

  const std::size_t n = dataset.features.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  double best_loss = evaluate_loss(model, dataset, cfg);
  std::vector<double> best_params = params;
  std::vector<double> trace;
  int stale_epochs = 0;
  int epoch = 0;

  Model scratch = model;  // reused for evaluation-mode loss
  for (epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      std::size_t stop = std::min(n, start + cfg.batch_size);
      double batch_n = static_cast<double>(stop - start);
      std::fill(grads.begin(), grads.end(), 0.0);
      program.set_params(params);
      double batch_loss = 0.0;
      for (std::size_t s = start; s < stop; ++s) {
        std::size_t idx = order[s];
        program.set_inputs(dataset.features[idx]);
        program.tape.set_value(program.target, dataset.targets[idx]);
        if (!program.masks.empty()) {
          auto mask = autodiff::DropoutMask::draw(rng, program.masks.size(), cfg.dropout_rate);
          program.set_masks(mask.multipliers());
        }
        program.tape.forward();
        batch_loss += program.tape.value(program.loss);
        program.tape.gradient_accumulate(program.loss, 1.0 / batch_n, grads);
      }
      if (physics_loss && !collocation.empty()) {
        penalty_program.set_params(params);
        double colloc_n = static_cast<double>(collocation.size());
        for (const auto& point : collocation) {
          penalty_program.set_inputs(point);
          if (!penalty_program.masks.empty()) {
            auto mask = autodiff::DropoutMask::draw(rng, penalty_program.masks.size(),
                                                    cfg.dropout_rate);
            penalty_program.set_masks(mask.multipliers());
          }
          penalty_program.tape.forward();
          batch_loss += penalty_program.tape.value(penalty_program.loss) / colloc_n * batch_n;
          penalty_program.tape.gradient_accumulate(penalty_program.loss, 1.0 / colloc_n, grads);
        }
      }
      if (!std::isfinite(batch_loss))
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch));
      autodiff::adam_step(params, grads, adam, cfg.learning_rate);
    }

    scratch.set_parameters(params);
    double epoch_loss = evaluate_loss(scratch, dataset, cfg);
    if (!std::isfinite(epoch_loss))
      throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch));
    trace.push_back(epoch_loss);

    if (epoch_loss < best_loss - cfg.early_stop_min_delta)
      stale_epochs = 0;
    else
      ++stale_epochs;
    if (epoch_loss < best_loss) {
      best_loss = epoch_loss;
      best_params = params;
    }
    if (stale_epochs >= cfg.early_stop_patience) break;
  }

  TrainResult result;
  model.set_parameters(best_params);
  result.model = std::move(model);
  result.loss_trace = std::move(trace);
  result.epochs_run = static_cast<int>(result.loss_trace.size());
  result.final_loss = best_loss;
  return result;
}

Model extend_grids(const Model& model, int new_grid_size) {
  if (model.arch.kind != ModelKind::kKan)
    throw ArgumentError("extend_grids: only KAN models have spline grids");
  Model extended = model;
  extended.arch.grid_size = new_grid_size;
  for (auto& layer : extended.kan_layers)
    for (auto& edge : layer.edges) edge = spline::grid_extend(edge, new_grid_size);
  return extended;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

std::string loss_kind_name(LossKind kind) {
  return kind == LossKind::kMse ? "mse" : "mse_plus_physics";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "mse") return LossKind::kMse;
  if (name == "mse_plus_physics") return LossKind::kMsePlusPhysics;
  throw DataError("checkpoint field 'loss': unknown value '" + name + "'");
}

ordered_json config_to_json(const TrainConfig& cfg) {
  ordered_json j;
  j["learning_rate"] = cfg.learning_rate;
  j["batch_size"] = cfg.batch_size;
  j["max_epochs"] = cfg.max_epochs;
  j["dropout_rate"] = cfg.dropout_rate;
  j["loss"] = loss_kind_name(cfg.loss_kind);
  j["gamma1"] = cfg.gamma1;
  j["gamma2"] = cfg.gamma2;
  j["fd_step"] = cfg.fd_step;
  j["collocation_points"] = cfg.collocation_points;
  j["seed"] = cfg.seed;
  j["early_stop_patience"] = cfg.early_stop_patience;
  j["early_stop_min_delta"] = cfg.early_stop_min_delta;
  return j;
}

template <typename T>
T require(const ordered_json& j, const std::string& field) {
  if (!j.contains(field))
    throw DataError("checkpoint field '" + field + "' is missing");
  try {
    return j.at(field).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError("checkpoint field '" + field + "' has the wrong type");
  }
}

TrainConfig config_from_json(const ordered_json& j) {
  TrainConfig cfg;
  cfg.learning_rate = require<double>(j, "learning_rate");
  cfg.batch_size = require<int>(j, "batch_size");
  cfg.max_epochs = require<int>(j, "max_epochs");
  cfg.dropout_rate = require<double>(j, "dropout_rate");
  cfg.loss_kind = loss_kind_from_name(require<std::string>(j, "loss"));
  cfg.gamma1 = require<double>(j, "gamma1");
  cfg.gamma2 = require<double>(j, "gamma2");
  cfg.fd_step = require<double>(j, "fd_step");
  cfg.collocation_points = require<int>(j, "collocation_points");
  cfg.seed = require<std::uint64_t>(j, "seed");
  cfg.early_stop_patience = require<int>(j, "early_stop_patience");
  cfg.early_stop_min_delta = require<double>(j, "early_stop_min_delta");
  return cfg;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  ordered_json j;
  j["version"] = kCheckpointVersion;
  j["kind"] = to_string(checkpoint.model.arch.kind);
  ordered_json arch;
  arch["layer_widths"] = checkpoint.model.arch.layer_widths;
  arch["grid_size"] = checkpoint.model.arch.grid_size;
  arch["spline_order"] = checkpoint.model.arch.spline_order;
  j["architecture"] = arch;
  ordered_json norm;
  norm["feature_min"] = checkpoint.normalizer.feature_min;
  norm["feature_max"] = checkpoint.normalizer.feature_max;
  norm["target_log_mean"] = checkpoint.normalizer.target_log_mean;
  norm["target_log_std"] = checkpoint.normalizer.target_log_std;
  j["normalizer"] = norm;
  j["parameters"] = checkpoint.model.parameters();
  ordered_json meta;
  meta["seed"] = checkpoint.meta.seed;
  meta["epochs_run"] = checkpoint.meta.epochs_run;
  meta["final_loss"] = checkpoint.meta.final_loss;
  meta["train_config"] = config_to_json(checkpoint.meta.config);
  j["metadata"] = meta;

  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }

  int version = require<int>(j, "version");
  if (version != kCheckpointVersion)
    throw DataError("checkpoint field 'version' is " + std::to_string(version) +
                    ", expected " + std::to_string(kCheckpointVersion));

  Architecture arch;
  arch.kind = model_kind_from_string(require<std::string>(j, "kind"));
  if (!j.contains("architecture")) throw DataError("checkpoint field 'architecture' is missing");
  const auto& arch_json = j.at("architecture");
  arch.layer_widths = require<std::vector<int>>(arch_json, "layer_widths");
  arch.grid_size = require<int>(arch_json, "grid_size");
  arch.spline_order = require<int>(arch_json, "spline_order");
  try {
    validate(arch);
  } catch (const ArgumentError& e) {
    throw DataError(std::string("checkpoint field 'architecture' is invalid: ") + e.what());
  }

  Checkpoint checkpoint;
  checkpoint.model = make_skeleton(arch);

  if (!j.contains("normalizer")) throw DataError("checkpoint field 'normalizer' is missing");
  const auto& norm_json = j.at("normalizer");
  auto mins = require<std::vector<double>>(norm_json, "feature_min");
  auto maxs = require<std::vector<double>>(norm_json, "feature_max");
  if (mins.size() != data::kPhysicalFeatureCount || maxs.size() != data::kPhysicalFeatureCount)
    throw DataError("checkpoint field 'normalizer' has the wrong feature count");
  std::copy(mins.begin(), mins.end(), checkpoint.normalizer.feature_min.begin());
  std::copy(maxs.begin(), maxs.end(), checkpoint.normalizer.feature_max.begin());
  checkpoint.normalizer.target_log_mean = require<double>(norm_json, "target_log_mean");
  checkpoint.normalizer.target_log_std = require<double>(norm_json, "target_log_std");

  auto params = require<std::vector<double>>(j, "parameters");
  if (params.size() != checkpoint.model.parameter_count())
    throw DataError("checkpoint field 'parameters' has " + std::to_string(params.size()) +
                    " entries, expected " + std::to_string(checkpoint.model.parameter_count()));
  checkpoint.model.set_parameters(params);

  if (!j.contains("metadata")) throw DataError("checkpoint field 'metadata' is missing");
  const auto& meta_json = j.at("metadata");
  checkpoint.meta.seed = require<std::uint64_t>(meta_json, "seed");
  checkpoint.meta.epochs_run = require<int>(meta_json, "epochs_run");
  checkpoint.meta.final_loss = require<double>(meta_json, "final_loss");
  if (!meta_json.contains("train_config"))
    throw DataError("checkpoint field 'train_config' is missing");
  checkpoint.meta.config = config_from_json(meta_json.at("train_config"));
  return checkpoint;
}

}  // namespace fsl::network
