#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ai4ef/domain.hpp"
#include "ai4ef/matrix.hpp"

namespace ai4ef::neural {

namespace fs = std::filesystem;

enum class OutputHead { Sigmoid, Linear };
enum class LossKind { BCE, MSE };

std::string_view to_string(OutputHead head);
std::string_view to_string(LossKind kind);

/// Head and loss conventionally paired with a task.
OutputHead head_for(domain::Task task);
LossKind loss_for(domain::Task task);

struct MlpConfig {
  std::size_t input_dim = 0;
  std::size_t n_layers = 0;              // hidden layers
  std::vector<std::size_t> layer_sizes;  // one width per hidden layer
  std::size_t output_dim = 0;
  OutputHead head = OutputHead::Sigmoid;
  // Hidden activation is always ReLU.

  /// Throws InvalidConfig.
  void validate() const;
  Json to_json() const;
  static MlpConfig from_json(const Json& j);

  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

/// Affine map; `weights` is fan_in x fan_out so a batch multiplies on the left.
struct DenseLayer {
  Matrix weights;
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct MlpModel {
  MlpConfig config;
  std::vector<DenseLayer> layers;  // n_layers hidden layers followed by the head

  std::size_t parameter_count() const;
  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

/// Weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)) from a splitmix64 stream,
/// biases zero. Validates the config first.
MlpModel init_model(const MlpConfig& config, std::uint64_t seed);

/// Throws ShapeMismatch when inputs.cols() != input_dim.
Matrix forward(const MlpModel& model, const Matrix& inputs);

/// Mean over all elements. BCE clips probabilities to [1e-12, 1 - 1e-12].
double loss(const Matrix& outputs, const Matrix& targets, LossKind kind);

/// Same layout as the model's layers; `loss` is the batch loss at the
/// parameters the gradient was taken at.
struct Gradients {
  std::vector<DenseLayer> layers;
  double loss = 0.0;
};

Gradients gradients(const MlpModel& model, const Matrix& inputs, const Matrix& targets, LossKind kind);

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  std::vector<DenseLayer> first_moment;
  std::vector<DenseLayer> second_moment;
  std::uint64_t step = 0;

  static AdamState for_model(const MlpModel& model);
};

/// One bias-corrected Adam update in place; increments state.step.
void adam_step(MlpModel& model, const Gradients& grads, AdamState& state, double learning_rate);

/// Shuffles rows with `shuffle_seed`, walks them in mini-batches (the last may
/// be short) taking one Adam step per batch, and returns the mean batch loss.
/// Throws EmptyDataset.
double train_epoch(MlpModel& model, AdamState& state, const Matrix& inputs, const Matrix& targets,
                   std::size_t batch_size, double learning_rate, LossKind kind, std::uint64_t shuffle_seed);

// ---------------------------------------------------------------------------
// Checkpoints: a directory holding manifest.json and weights.bin.
// ---------------------------------------------------------------------------

inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr std::string_view kManifestFile = "manifest.json";
inline constexpr std::string_view kWeightsFile = "weights.bin";

struct CheckpointManifest {
  int format_version = kCheckpointFormatVersion;
  MlpConfig config;
  domain::Task task = domain::Task::Classifier;
  std::vector<std::string> feature_columns;  // encoded input names, in order
  std::vector<std::string> target_columns;
  std::string scalers_fingerprint;
  std::optional<double> objective;
  std::optional<std::size_t> trial_number;

  Json to_json() const;
  static CheckpointManifest from_json(const Json& j);
};

struct Checkpoint {
  CheckpointManifest manifest;
  MlpModel model;
};

/// Weights blob: "AI4EFMLP", u32 version, u32 layer count, a (u64 fan_in,
/// u64 fan_out) shape table, then per layer the row-major weights followed by
/// the bias; all little-endian, doubles as IEEE-754 binary64.
std::string encode_weights(const MlpModel& model);
/// Throws CorruptWeights on truncation, trailing bytes or a shape table that
/// disagrees with `config`; VersionMismatch on an unknown blob version.
std::vector<DenseLayer> decode_weights(std::string_view blob, const MlpConfig& config);

void save_checkpoint(const MlpModel& model, const CheckpointManifest& manifest, const fs::path& dir);
Checkpoint load_checkpoint(const fs::path& dir);

}  // namespace ai4ef::neural
