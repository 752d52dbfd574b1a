#include "ai4ef/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "ai4ef/error.hpp"
#include "ai4ef/fsutil.hpp"
#include "ai4ef/random.hpp"

namespace ai4ef::neural {

namespace {

constexpr double kProbabilityClip = 1e-12;

using Vec8 = double __attribute__((vector_size(64)));

inline Vec8 load8(const double* p) {
  Vec8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}
inline void store8(double* p, Vec8 v) { std::memcpy(p, &v, sizeof v); }

enum class Layout { Normal, Transposed };

// C += op(B) applied on the right of A: A is m x k, op(B) is k x n where
// op(B) = B, or B^T when B is stored n x k. A 4 x 16 tile of C is held in
// registers while the full depth streams through a packed copy of the
// matching 16 columns of op(B); leftover rows and columns use a scalar loop.
void gemm_acc(const Matrix& a, const Matrix& b, Matrix& c, Layout layout = Layout::Normal) {
  constexpr std::size_t kTileCols = 16;
  const bool transposed = layout == Layout::Transposed;
  const std::size_t m = a.rows(), k = a.cols();
  const std::size_t n = transposed ? b.rows() : b.cols();
  const auto op_b = [&](std::size_t p, std::size_t j) { return transposed ? b(j, p) : b(p, j); };
  const std::size_t n_tiled = n - n % kTileCols;
  const std::size_t m_tiled = m - m % 4;

  std::vector<double> panel(k * kTileCols);
  for (std::size_t j = 0; j < n_tiled; j += kTileCols) {
    if (transposed) {
      for (std::size_t jj = 0; jj < kTileCols; ++jj) {
        const double* src = b.row(j + jj).data();
        for (std::size_t p = 0; p < k; ++p) panel[p * kTileCols + jj] = src[p];
      }
    } else {
      for (std::size_t p = 0; p < k; ++p) {
        std::memcpy(&panel[p * kTileCols], b.row(p).data() + j, kTileCols * sizeof(double));
      }
    }
    for (std::size_t i = 0; i < m_tiled; i += 4) {
      const double* a0 = a.row(i).data();
      const double* a1 = a.row(i + 1).data();
      const double* a2 = a.row(i + 2).data();
      const double* a3 = a.row(i + 3).data();
      double* c0 = c.row(i).data() + j;
      double* c1 = c.row(i + 1).data() + j;
      double* c2 = c.row(i + 2).data() + j;
      double* c3 = c.row(i + 3).data() + j;
      Vec8 r00 = load8(c0), r01 = load8(c0 + 8);
      Vec8 r10 = load8(c1), r11 = load8(c1 + 8);
      Vec8 r20 = load8(c2), r21 = load8(c2 + 8);
      Vec8 r30 = load8(c3), r31 = load8(c3 + 8);
      const double* bp = panel.data();
      for (std::size_t p = 0; p < k; ++p, bp += kTileCols) {
        const Vec8 b0 = load8(bp), b1 = load8(bp + 8);
        r00 += a0[p] * b0;
        r01 += a0[p] * b1;
        r10 += a1[p] * b0;
        r11 += a1[p] * b1;
        r20 += a2[p] * b0;
        r21 += a2[p] * b1;
        r30 += a3[p] * b0;
        r31 += a3[p] * b1;
      }
      store8(c0, r00), store8(c0 + 8, r01);
      store8(c1, r10), store8(c1 + 8, r11);
      store8(c2, r20), store8(c2 + 8, r21);
      store8(c3, r30), store8(c3 + 8, r31);
    }
  }
  auto scalar = [&](std::size_t i0, std::size_t i1, std::size_t j0, std::size_t j1) {
    for (std::size_t i = i0; i < i1; ++i) {
      double* crow = c.row(i).data();
      const double* arow = a.row(i).data();
      for (std::size_t p = 0; p < k; ++p) {
        const double av = arow[p];
        for (std::size_t j = j0; j < j1; ++j) crow[j] += av * op_b(p, j);
      }
    }
  };
  scalar(m_tiled, m, 0, n_tiled);
  scalar(0, m, n_tiled, n);
}

Matrix transpose(const Matrix& a) {
  constexpr std::size_t kTile = 32;
  Matrix t(a.cols(), a.rows());
  for (std::size_t i0 = 0; i0 < a.rows(); i0 += kTile) {
    for (std::size_t j0 = 0; j0 < a.cols(); j0 += kTile) {
      const std::size_t i1 = std::min(a.rows(), i0 + kTile), j1 = std::min(a.cols(), j0 + kTile);
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) t(j, i) = a(i, j);
      }
    }
  }
  return t;
}

double sigmoid(double z) {
  const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  // Keep the open interval (0, 1) even when exp saturates.
  return std::clamp(p, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
}

// Affine map of `input` through `layer`, written into a fresh matrix.
Matrix affine(const Matrix& input, const DenseLayer& layer) {
  Matrix out(input.rows(), layer.weights.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    std::copy(layer.bias.begin(), layer.bias.end(), out.row(i).begin());
  }
  gemm_acc(input, layer.weights, out);
  return out;
}

void relu_inplace(Matrix& m) {
  for (auto& v : m.data()) v = v > 0.0 ? v : 0.0;
}

void check_inputs(const MlpModel& model, const Matrix& inputs) {
  if (inputs.cols() != model.config.input_dim) {
    throw Error(ErrorCode::ShapeMismatch, "input width " + std::to_string(inputs.cols()) + " != model input_dim " +
                                              std::to_string(model.config.input_dim));
  }
}

// Activations of every layer: [0] is the input, [i+1] the output of layer i.
std::vector<Matrix> forward_trace(const MlpModel& model, const Matrix& inputs) {
  check_inputs(model, inputs);
  std::vector<Matrix> acts;
  acts.reserve(model.layers.size() + 1);
  acts.push_back(inputs);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    Matrix z = affine(acts.back(), model.layers[l]);
    if (l + 1 < model.layers.size()) {
      relu_inplace(z);
    } else if (model.config.head == OutputHead::Sigmoid) {
      for (auto& v : z.data()) v = sigmoid(v);
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

std::vector<DenseLayer> zeros_like(const MlpModel& model) {
  std::vector<DenseLayer> out;
  for (const auto& layer : model.layers) {
    out.push_back({Matrix(layer.weights.rows(), layer.weights.cols()), std::vector<double>(layer.bias.size())});
  }
  return out;
}

}  // namespace

std::string_view to_string(OutputHead head) { return head == OutputHead::Sigmoid ? "Sigmoid" : "Linear"; }
std::string_view to_string(LossKind kind) { return kind == LossKind::BCE ? "BCE" : "MSE"; }

OutputHead head_for(domain::Task task) {
  return task == domain::Task::Classifier ? OutputHead::Sigmoid : OutputHead::Linear;
}
LossKind loss_for(domain::Task task) { return task == domain::Task::Classifier ? LossKind::BCE : LossKind::MSE; }

void MlpConfig::validate() const {
  if (input_dim == 0) throw Error(ErrorCode::InvalidConfig, "input_dim must be positive", "input_dim");
  if (output_dim == 0) throw Error(ErrorCode::InvalidConfig, "output_dim must be positive", "output_dim");
  if (layer_sizes.size() != n_layers) {
    throw Error(ErrorCode::InvalidConfig,
                "layer_sizes has " + std::to_string(layer_sizes.size()) + " entries but n_layers is " +
                    std::to_string(n_layers),
                "layer_sizes");
  }
  for (const auto size : layer_sizes) {
    if (size == 0) throw Error(ErrorCode::InvalidConfig, "hidden layer sizes must be positive", "layer_sizes");
  }
}

Json MlpConfig::to_json() const {
  Json j;
  j["input_dim"] = input_dim;
  j["n_layers"] = n_layers;
  j["layer_sizes"] = layer_sizes;
  j["activation"] = "ReLU";
  j["output_dim"] = output_dim;
  j["output_head"] = to_string(head);
  return j;
}

MlpConfig MlpConfig::from_json(const Json& j) {
  MlpConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
  c.output_dim = j.at("output_dim").get<std::size_t>();
  const auto head = j.at("output_head").get<std::string>();
  if (head == "Sigmoid") {
    c.head = OutputHead::Sigmoid;
  } else if (head == "Linear") {
    c.head = OutputHead::Linear;
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown output head '" + head + "'", "output_head");
  }
  c.validate();
  return c;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

MlpModel init_model(const MlpConfig& config, std::uint64_t seed) {
  config.validate();
  MlpModel model;
  model.config = config;
  SplitMix64 rng(seed);
  std::size_t fan_in = config.input_dim;
  std::vector<std::size_t> widths = config.layer_sizes;
  widths.push_back(config.output_dim);
  for (const auto fan_out : widths) {
    DenseLayer layer{Matrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0)};
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& w : layer.weights.data()) w = rng.uniform(-bound, bound);
    model.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return model;
}

Matrix forward(const MlpModel& model, const Matrix& inputs) {
  auto acts = forward_trace(model, inputs);
  return std::move(acts.back());
}

double loss(const Matrix& outputs, const Matrix& targets, LossKind kind) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "outputs and targets differ in shape");
  }
  if (outputs.empty()) throw Error(ErrorCode::EmptyDataset, "loss over an empty batch");
  const auto p = outputs.data();
  const auto y = targets.data();
  double sum = 0.0;
  if (kind == LossKind::BCE) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double q = std::clamp(p[i], kProbabilityClip, 1.0 - kProbabilityClip);
      sum -= y[i] * std::log(q) + (1.0 - y[i]) * std::log(1.0 - q);
    }
  } else {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = p[i] - y[i];
      sum += d * d;
    }
  }
  return sum / static_cast<double>(p.size());
}

Gradients gradients(const MlpModel& model, const Matrix& inputs, const Matrix& targets, LossKind kind) {
  const auto acts = forward_trace(model, inputs);
  const Matrix& out = acts.back();
  if (targets.rows() != out.rows() || targets.cols() != out.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "targets do not match the model output shape");
  }
  Gradients grads;
  grads.loss = loss(out, targets, kind);
  grads.layers = zeros_like(model);

  // delta = dL/dz for the head's pre-activation.
  const double scale = 1.0 / static_cast<double>(out.size());
  const bool sigmoid_head = model.config.head == OutputHead::Sigmoid;
  Matrix delta(out.rows(), out.cols());
  {
    const auto p = out.data();
    const auto y = targets.data();
    auto d = delta.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (kind == LossKind::BCE && sigmoid_head) {
        d[i] = (p[i] - y[i]) * scale;
        continue;
      }
      double dp = 0.0;
      if (kind == LossKind::BCE) {
        const double q = p[i];
        const bool clipped = q < kProbabilityClip || q > 1.0 - kProbabilityClip;
        dp = clipped ? 0.0 : (q - y[i]) / (q * (1.0 - q)) * scale;
      } else {
        dp = 2.0 * (p[i] - y[i]) * scale;
      }
      d[i] = sigmoid_head ? dp * p[i] * (1.0 - p[i]) : dp;
    }
  }

  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const Matrix& input = acts[l];
    auto& g = grads.layers[l];
    gemm_acc(transpose(input), delta, g.weights);
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      const auto row = delta.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) g.bias[j] += row[j];
    }
    if (l == 0) break;
    // Propagate through the weights, then through the ReLU of layer l-1.
    Matrix next(delta.rows(), input.cols());
    gemm_acc(delta, model.layers[l].weights, next, Layout::Transposed);
    const auto a = input.data();
    auto n = next.data();
    for (std::size_t i = 0; i < n.size(); ++i) {
      if (!(a[i] > 0.0)) n[i] = 0.0;
    }
    delta = std::move(next);
  }
  return grads;
}

AdamState AdamState::for_model(const MlpModel& model) {
  AdamState s;
  s.first_moment = zeros_like(model);
  s.second_moment = zeros_like(model);
  return s;
}

void adam_step(MlpModel& model, const Gradients& grads, AdamState& state, double learning_rate) {
  if (grads.layers.size() != model.layers.size()) {
    throw Error(ErrorCode::ShapeMismatch, "gradient set does not match the model");
  }
  if (state.first_moment.size() != model.layers.size()) state = AdamState::for_model(model);
  state.step += 1;
  const auto t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(AdamState::kBeta1, t);
  const double c2 = 1.0 - std::pow(AdamState::kBeta2, t);

  auto update = [&](std::span<double> theta, std::span<const double> g, std::span<double> m,
                    std::span<double> v) {
    if (theta.size() != g.size()) throw Error(ErrorCode::ShapeMismatch, "gradient shape mismatch");
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = AdamState::kBeta1 * m[i] + (1.0 - AdamState::kBeta1) * g[i];
      v[i] = AdamState::kBeta2 * v[i] + (1.0 - AdamState::kBeta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + AdamState::kEpsilon);
    }
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    update(layer.weights.data(), grads.layers[l].weights.data(), state.first_moment[l].weights.data(),
           state.second_moment[l].weights.data());
    update(layer.bias, grads.layers[l].bias, state.first_moment[l].bias, state.second_moment[l].bias);
  }
}

double train_epoch(MlpModel& model, AdamState& state, const Matrix& inputs, const Matrix& targets,
                   std::size_t batch_size, double learning_rate, LossKind kind, std::uint64_t shuffle_seed) {
  if (inputs.rows() == 0) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  if (inputs.rows() != targets.rows()) throw Error(ErrorCode::ShapeMismatch, "inputs and targets differ in rows");
  if (batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1", "batch_size");

  std::vector<std::size_t> order(inputs.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(shuffle_seed);
  rng.shuffle(std::span<std::size_t>(order));

  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const auto count = std::min(batch_size, order.size() - start);
    const std::span<const std::size_t> idx(order.data() + start, count);
    const auto grads = gradients(model, inputs.select_rows(idx), targets.select_rows(idx), kind);
    adam_step(model, grads, state, learning_rate);
    total += grads.loss;
    ++batches;
  }
  return total / static_cast<double>(batches);
}

// ---------------------------------------------------------------------------

Json CheckpointManifest::to_json() const {
  Json j;
  j["format_version"] = format_version;
  j["task"] = domain::to_string(task);
  j["config"] = config.to_json();
  j["feature_columns"] = feature_columns;
  j["target_columns"] = target_columns;
  j["scalers_fingerprint"] = scalers_fingerprint;
  j["objective"] = objective ? Json(*objective) : Json(nullptr);
  j["trial_number"] = trial_number ? Json(*trial_number) : Json(nullptr);
  j["weights"] = kWeightsFile;
  return j;
}

CheckpointManifest CheckpointManifest::from_json(const Json& j) {
  CheckpointManifest m;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != kCheckpointFormatVersion) {
    throw Error(ErrorCode::VersionMismatch,
                "checkpoint format " + std::to_string(m.format_version) + " is not supported (expected " +
                    std::to_string(kCheckpointFormatVersion) + ")");
  }
  try {
    m.task = domain::parse_task(j.at("task").get<std::string>());
    m.config = MlpConfig::from_json(j.at("config"));
    m.feature_columns = j.at("feature_columns").get<std::vector<std::string>>();
    m.target_columns = j.at("target_columns").get<std::vector<std::string>>();
    m.scalers_fingerprint = j.at("scalers_fingerprint").get<std::string>();
    if (!j.at("objective").is_null()) m.objective = j.at("objective").get<double>();
    if (j.contains("trial_number") && !j.at("trial_number").is_null()) {
      m.trial_number = j.at("trial_number").get<std::size_t>();
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidValue, std::string("malformed manifest: ") + e.what());
  }
  return m;
}

namespace {

constexpr char kMagic[8] = {'A', 'I', '4', 'E', 'F', 'M', 'L', 'P'};
constexpr std::uint32_t kBlobVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::uint64_t u(int bytes) {
    if (pos_ + static_cast<std::size_t>(bytes) > data_.size()) {
      throw Error(ErrorCode::CorruptWeights, "weights blob truncated at byte " + std::to_string(pos_));
    }
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  double f64() { return std::bit_cast<double>(u(8)); }
  std::string_view bytes(std::size_t n) {
    if (pos_ + n > data_.size()) throw Error(ErrorCode::CorruptWeights, "weights blob truncated");
    const auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_weights(const MlpModel& model) {
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kBlobVersion);
  put_u32(out, static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& l : model.layers) {
    put_u64(out, l.weights.rows());
    put_u64(out, l.weights.cols());
  }
  for (const auto& l : model.layers) {
    for (const double w : l.weights.data()) put_f64(out, w);
    for (const double b : l.bias) put_f64(out, b);
  }
  return out;
}

std::vector<DenseLayer> decode_weights(std::string_view blob, const MlpConfig& config) {
  Reader in(blob);
  if (in.bytes(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
    throw Error(ErrorCode::CorruptWeights, "weights blob has a bad magic number");
  }
  const auto version = in.u(4);
  if (version != kBlobVersion) {
    throw Error(ErrorCode::VersionMismatch, "weights blob version " + std::to_string(version) + " not supported");
  }
  const auto count = in.u(4);
  std::vector<std::size_t> widths = config.layer_sizes;
  widths.push_back(config.output_dim);
  if (count != widths.size()) throw Error(ErrorCode::CorruptWeights, "layer count disagrees with the manifest");

  std::vector<DenseLayer> layers;
  std::size_t fan_in = config.input_dim;
  for (std::size_t l = 0; l < count; ++l) {
    const auto rows = in.u(8);
    const auto cols = in.u(8);
    if (rows != fan_in || cols != widths[l]) {
      throw Error(ErrorCode::CorruptWeights, "layer " + std::to_string(l) + " shape disagrees with the manifest");
    }
    layers.push_back({Matrix(rows, cols), std::vector<double>(cols)});
    fan_in = cols;
  }
  for (auto& l : layers) {
    for (auto& w : l.weights.data()) w = in.f64();
    for (auto& b : l.bias) b = in.f64();
  }
  if (!in.done()) throw Error(ErrorCode::CorruptWeights, "trailing bytes after the last layer");
  for (const auto& l : layers) {
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(l.weights.data().begin(), l.weights.data().end(), finite) ||
        !std::all_of(l.bias.begin(), l.bias.end(), finite)) {
      throw Error(ErrorCode::CorruptWeights, "non-finite parameter in weights blob");
    }
  }
  return layers;
}

void save_checkpoint(const MlpModel& model, const CheckpointManifest& manifest, const fs::path& dir) {
  if (!(manifest.config == model.config)) {
    throw Error(ErrorCode::InvalidConfig, "manifest config does not describe the model");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create '" + dir.string() + "'", dir.string());
  fsutil::write_file_atomic(dir / kWeightsFile, encode_weights(model));
  fsutil::write_file_atomic(dir / kManifestFile, manifest.to_json().dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  Json j;
  try {
    j = Json::parse(fsutil::read_file(dir / kManifestFile));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::InvalidValue, "manifest is not valid JSON: " + std::string(e.what()));
  }
  Checkpoint cp;
  cp.manifest = CheckpointManifest::from_json(j);
  cp.model.config = cp.manifest.config;
  cp.model.layers = decode_weights(fsutil::read_file(dir / kWeightsFile), cp.manifest.config);
  return cp;
}

}  // namespace ai4ef::neural
