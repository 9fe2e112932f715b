/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#include "derisk/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "derisk/random.hpp"

namespace derisk {

namespace {

Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double scale,
                               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

// batch x n inverted-dropout mask with entries {0, 1/(1-rate)}
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate,
                             std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  double keep_scale = 1.0 / (1.0 - rate);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng) < rate ? 0.0 : keep_scale;
  return m;
}

}  // namespace

ClassifierModel init_model(Eigen::Index d, Eigen::Index k, Eigen::Index hidden, double dropout,
                           std::uint64_t seed) {
  if (d < 1 || k < 2 || hidden < 1) throw std::invalid_argument("init_model: invalid dimensions");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must be in [0, 1)");
  std::mt19937_64 rng(seed);
  ClassifierModel model;
  model.w1 = uniform_matrix(hidden, d, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  model.w2 = uniform_matrix(hidden, hidden, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  model.w3 = uniform_matrix(k, hidden, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  model.b1 = Eigen::VectorXd::Zero(hidden);
  model.b2 = Eigen::VectorXd::Zero(hidden);
  model.b3 = Eigen::VectorXd::Zero(k);
  model.dropout = dropout;
  return model;
}

ForwardCache forward_cached(const ClassifierModel& model,
                            const Eigen::Ref<const Eigen::MatrixXd>& x, ForwardMode mode,
                            std::mt19937_64* rng) {
  if (x.cols() != model.input_dim()) throw std::invalid_argument("forward: feature dim mismatch");
  if (!x.allFinite()) throw std::invalid_argument("forward: non-finite input");
  const bool drop = mode == ForwardMode::Train && model.dropout > 0.0;
  if (drop && rng == nullptr) throw std::invalid_argument("forward: Train mode with dropout needs an rng");

  ForwardCache c;
  c.input = x;
  c.z1 = (x * model.w1.transpose()).rowwise() + model.b1.transpose();
  c.h1 = c.z1.cwiseMax(0.0);
  if (drop) {
    c.mask1 = dropout_mask(c.h1.rows(), c.h1.cols(), model.dropout, *rng);
    c.h1 = c.h1.cwiseProduct(c.mask1);
  }
  c.z2 = (c.h1 * model.w2.transpose()).rowwise() + model.b2.transpose();
  c.h2 = c.z2.cwiseMax(0.0);
  if (drop) {
    c.mask2 = dropout_mask(c.h2.rows(), c.h2.cols(), model.dropout, *rng);
    c.h2 = c.h2.cwiseProduct(c.mask2);
  }
  c.logits = (c.h2 * model.w3.transpose()).rowwise() + model.b3.transpose();
  return c;
}

Eigen::MatrixXd forward_logits(const ClassifierModel& model,
                               const Eigen::Ref<const Eigen::MatrixXd>& x, ForwardMode mode,
                               std::mt19937_64* rng) {
  return forward_cached(model, x, mode, rng).logits;
}

Eigen::MatrixXd forward_probs(const ClassifierModel& model,
                              const Eigen::Ref<const Eigen::MatrixXd>& x, ForwardMode mode,
                              std::mt19937_64* rng) {
  return softmax_rows(forward_logits(model, x, mode, rng));
}

std::pair<Eigen::VectorXd, Categorical> forward(const ClassifierModel& model,
                                                const Eigen::Ref<const Eigen::VectorXd>& x,
                                                ForwardMode mode, std::mt19937_64* rng) {
  Eigen::MatrixXd logits = forward_logits(model, x.transpose(), mode, rng);
  Eigen::VectorXd row = logits.row(0).transpose();
  return {row, Categorical(softmax(row))};
}

ModelGradients backward(const ClassifierModel& model, const ForwardCache& cache,
                        const Eigen::Ref<const Eigen::MatrixXd>& dlogits) {
  const bool drop = cache.mask1.size() > 0;
  ModelGradients g;
  g.w3 = dlogits.transpose() * cache.h2;
  g.b3 = dlogits.colwise().sum().transpose();

  Eigen::MatrixXd dh2 = dlogits * model.w3;
  if (drop) dh2 = dh2.cwiseProduct(cache.mask2);
  Eigen::MatrixXd dz2 = (cache.z2.array() > 0.0).select(dh2, 0.0);
  g.w2 = dz2.transpose() * cache.h1;
  g.b2 = dz2.colwise().sum().transpose();

  Eigen::MatrixXd dh1 = dz2 * model.w2;
  if (drop) dh1 = dh1.cwiseProduct(cache.mask1);
  Eigen::MatrixXd dz1 = (cache.z1.array() > 0.0).select(dh1, 0.0);
  g.w1 = dz1.transpose() * cache.input;
  g.b1 = dz1.colwise().sum().transpose();
  return g;
}

SgdOptimizer::SgdOptimizer(const ClassifierModel& shape, SgdOptions options, int scheduled_epochs)
    : options_(options), scheduled_epochs_(std::max(scheduled_epochs, 1)) {
  velocity_.w1 = Eigen::MatrixXd::Zero(shape.w1.rows(), shape.w1.cols());
  velocity_.w2 = Eigen::MatrixXd::Zero(shape.w2.rows(), shape.w2.cols());
  velocity_.w3 = Eigen::MatrixXd::Zero(shape.w3.rows(), shape.w3.cols());
  velocity_.b1 = Eigen::VectorXd::Zero(shape.b1.size());
  velocity_.b2 = Eigen::VectorXd::Zero(shape.b2.size());
  velocity_.b3 = Eigen::VectorXd::Zero(shape.b3.size());
}

double SgdOptimizer::epoch_learning_rate(int epoch) const {
  double frac = static_cast<double>(epoch) / static_cast<double>(scheduled_epochs_);
  return options_.learning_rate * 0.5 * (1.0 + std::cos(M_PI * std::min(frac, 1.0)));
}

void SgdOptimizer::step(ClassifierModel& model, const ModelGradients& grads, double learning_rate) {
  const double mu = options_.momentum;
  auto apply = [&](auto& param, auto& vel, const auto& grad) {
    if (mu != 0.0) {
      vel = mu * vel + grad;
      if (options_.nesterov)
        param -= learning_rate * (grad + mu * vel);
      else
        param -= learning_rate * vel;
    } else {
      param -= learning_rate * grad;
    }
  };
  apply(model.w1, velocity_.w1, grads.w1);
  apply(model.w2, velocity_.w2, grads.w2);
  apply(model.w3, velocity_.w3, grads.w3);
  apply(model.b1, velocity_.b1, grads.b1);
  apply(model.b2, velocity_.b2, grads.b2);
  apply(model.b3, velocity_.b3, grads.b3);
}

TrainRowSet make_sl_rows(const Eigen::MatrixXd& features, const std::vector<Eigen::Index>& labels) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size()))
    throw std::invalid_argument("make_sl_rows: size mismatch");
  TrainRowSet rows;
  rows.features = features;
  rows.targets.reserve(labels.size());
  for (Eigen::Index cls : labels) rows.targets.push_back(LabelAssignment::hard(cls));
  rows.der_weight = Eigen::VectorXd::Ones(features.rows());
  return rows;
}

TrainTrace train_epochs(ClassifierModel& model, const TrainRowSet& data,
                        const ObjectiveSpec& objective, const TrainOptions& options) {
  const Eigen::Index n = data.rows();
  if (n == 0) throw std::invalid_argument("train_epochs: empty row set");
  if (static_cast<Eigen::Index>(data.targets.size()) != n || data.der_weight.size() != n)
    throw std::invalid_argument("train_epochs: inconsistent row set");
  if (!data.regularized.empty() && static_cast<Eigen::Index>(data.regularized.size()) != n)
    throw std::invalid_argument("train_epochs: inconsistent regularized flags");
  if (options.batch_size < 1) throw std::invalid_argument("train_epochs: batch_size must be >= 1");

  TrainTrace trace;
  if (options.epochs <= 0) return trace;

  SgdOptimizer optimizer(model, options.sgd, options.epochs);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  std::mt19937_64 shuffle_rng(derive_seed(options.seed, "shuffle"));
  std::mt19937_64 dropout_rng(derive_seed(options.seed, "dropout"));

  const Eigen::Index bs = std::min<Eigen::Index>(options.batch_size, n);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = optimizer.epoch_learning_rate(epoch);
    double epoch_loss = 0.0;
    int batches = 0;

    for (Eigen::Index start = 0; start < n; start += bs) {
      const Eigen::Index count = std::min(bs, n - start);
      Eigen::MatrixXd bx(count, data.features.cols());
      Eigen::VectorXd bw(count);
      std::vector<LabelAssignment> bt;
      bt.reserve(count);
      std::vector<Eigen::Index> breg;
      for (Eigen::Index j = 0; j < count; ++j) {
        Eigen::Index row = order[start + j];
        bx.row(j) = data.features.row(row);
        bw[j] = data.der_weight[row];
        bt.push_back(data.targets[row]);
        if (!data.regularized.empty() && data.regularized[row]) breg.push_back(j);
      }
      double wsum = bw.sum();
      if (wsum > 0.0) bw /= wsum;

      ForwardCache cache = forward_cached(model, bx, ForwardMode::Train, &dropout_rng);
      ObjectiveResult obj = der_objective(objective.spec, objective.regularizer_spec(),
                                          cache.logits, bt, bw, breg, objective.reg);
      if (std::isinf(obj.value)) {
        Eigen::Index global = obj.infinite_row >= 0 ? order[start + obj.infinite_row] : -1;
        throw TrainingError("objective became infinite during training (sample " +
                                std::to_string(global) + ", divergence " + objective.spec.name() + ")",
                            global, objective.spec.name());
      }
      ModelGradients grads = backward(model, cache, obj.dlogits);
      optimizer.step(model, grads, lr);
      epoch_loss += obj.value;
      ++batches;
    }
    trace.epoch_objective.push_back(epoch_loss / std::max(batches, 1));
  }
  return trace;
}

Eigen::VectorXd mc_uncertainty_batch(const ClassifierModel& model,
                                     const Eigen::Ref<const Eigen::MatrixXd>& x, int passes,
                                     std::uint64_t seed) {
  if (passes < 2) throw std::invalid_argument("mc_uncertainty: passes must be >= 2");
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd max_probs(passes, x.rows());
  for (int p = 0; p < passes; ++p) {
    Eigen::MatrixXd probs = forward_probs(model, x, ForwardMode::Train, &rng);
    max_probs.row(p) = probs.rowwise().maxCoeff().transpose();
  }
  Eigen::VectorXd mean = max_probs.colwise().mean();
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double ss = (max_probs.col(i).array() - mean[i]).square().sum();
    double sd = std::sqrt(ss / static_cast<double>(passes - 1));
    out[i] = std::clamp(sd, 0.0, 1.0);
  }
  return out;
}

double mc_uncertainty(const ClassifierModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
                      int passes, std::uint64_t seed) {
  return mc_uncertainty_batch(model, x.transpose(), passes, seed)[0];
}

double accuracy(const ClassifierModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                const std::vector<Eigen::Index>& labels) {
  if (x.rows() != static_cast<Eigen::Index>(labels.size()))
    throw std::invalid_argument("accuracy: size mismatch");
  if (x.rows() == 0) return 0.0;
  Eigen::MatrixXd logits = forward_logits(model, x, ForwardMode::Eval);
  Eigen::Index correct = 0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::Index argmax;
    logits.row(r).maxCoeff(&argmax);
    if (argmax == labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(x.rows());
}

namespace {

constexpr char kModelMagic[8] = {'D', 'R', 'S', 'K', 'M', 'D', '0', '1'};

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
  // row-major serialization, dims first
  std::uint64_t rows = m.rows(), cols = m.cols();
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
}

Eigen::MatrixXd read_matrix(std::ifstream& in) {
  std::uint64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in || rows > (1u << 24) || cols > (1u << 24)) throw std::runtime_error("corrupt checkpoint");
  Eigen::MatrixXd m(rows, cols);
  for (std::uint64_t r = 0; r < rows; ++r)
    for (std::uint64_t c = 0; c < cols; ++c) {
      double v;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      m(r, c) = v;
    }
  if (!in) throw std::runtime_error("corrupt checkpoint");
  return m;
}

}  // namespace

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kModelMagic, sizeof(kModelMagic));
  out.write(reinterpret_cast<const char*>(&model.dropout), sizeof(model.dropout));
  write_matrix(out, model.w1);
  write_matrix(out, model.w2);
  write_matrix(out, model.w3);
  write_matrix(out, model.b1);
  write_matrix(out, model.b2);
  write_matrix(out, model.b3);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ClassifierModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
    throw std::runtime_error(path.string() + " is not a derisk model checkpoint");
  ClassifierModel model;
  in.read(reinterpret_cast<char*>(&model.dropout), sizeof(model.dropout));
  model.w1 = read_matrix(in);
  model.w2 = read_matrix(in);
  model.w3 = read_matrix(in);
  model.b1 = read_matrix(in);
  model.b2 = read_matrix(in);
  model.b3 = read_matrix(in);
  return model;
}

}  // namespace derisk
