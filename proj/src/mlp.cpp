#include "latmpc/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "latmpc/kernels.hpp"
#include "latmpc/rng.hpp"

namespace latmpc {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw std::invalid_argument("TrainConfig: momentum must be in [0,1)");
  if (!(holdout_frac >= 0.0 && holdout_frac < 1.0))
    throw std::invalid_argument("TrainConfig: holdout_frac must be in [0,1)");
}

namespace {

constexpr std::size_t kIn = 4;
constexpr std::size_t kH1 = 16;
constexpr std::size_t kH2 = 8;

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double normalize(double v, std::pair<double, double> range) {
  if (range.second <= range.first) return 0.0;
  const double clamped = std::clamp(v, range.first, range.second);
  return (clamped - range.first) / (range.second - range.first);
}

Mat init_layer(std::size_t rows, std::size_t cols, Rng& rng) {
  // fan_in excludes the bias column, fan_out is the layer width
  const double limit = std::sqrt(6.0 / static_cast<double>((cols - 1) + rows));
  Mat w(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) w(i, j) = rng.uniform(-limit, limit);
  return w;
}

}  // namespace

MlpNetwork mlp_init(std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 0x6d6c70 /* "mlp" */);
  MlpNetwork net;
  net.w1 = init_layer(kH1, kIn + 1, rng);
  net.w2 = init_layer(kH2, kH1 + 1, rng);
  net.w3 = init_layer(1, kH2 + 1, rng);
  net.w3(0, kH2) = 0.5;  // keep the output ReLU initially active
  net.seed = seed;
  for (auto& r : net.in_range) r = {0.0, 1.0};
  return net;
}

MlpBatch mlp_prepare_batch(const MlpNetwork& net, std::span<const TrainingSample> rows) {
  MlpBatch batch;
  batch.a0 = Mat(rows.size(), kIn + 1);
  batch.y.resize(rows.size());
  for (std::size_t n = 0; n < rows.size(); ++n) {
    for (std::size_t j = 0; j < kIn; ++j)
      batch.a0(n, j) = normalize(rows[n].x[j], net.in_range[j]);
    batch.a0(n, kIn) = 1.0;
    batch.y[n] = normalize(rows[n].y, net.out_range);
  }
  return batch;
}

namespace {

struct ForwardPass {
  Mat a1;  // N x 17 (sigmoid outputs + bias)
  Mat a2;  // N x 9
  Vec z3;  // N pre-activation of the output
  Vec o;   // N relu output
};

ForwardPass forward_batch(const MlpNetwork& net, const Mat& a0) {
  const std::size_t n = a0.rows();
  ForwardPass fp;
  fp.a1 = Mat(n, kH1 + 1);
  fp.a2 = Mat(n, kH2 + 1);
  fp.z3.resize(n);
  fp.o.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    auto in = a0.row(s);
    for (std::size_t j = 0; j < kH1; ++j) fp.a1(s, j) = sigmoid(kern::dot(net.w1.row(j), in));
    fp.a1(s, kH1) = 1.0;
    auto h1 = fp.a1.row(s);
    for (std::size_t j = 0; j < kH2; ++j) fp.a2(s, j) = sigmoid(kern::dot(net.w2.row(j), h1));
    fp.a2(s, kH2) = 1.0;
    fp.z3[s] = kern::dot(net.w3.row(0), fp.a2.row(s));
    fp.o[s] = fp.z3[s] > 0.0 ? fp.z3[s] : 0.0;
  }
  return fp;
}

}  // namespace

double mlp_batch_loss(const MlpNetwork& net, const MlpBatch& batch) {
  const ForwardPass fp = forward_batch(net, batch.a0);
  const std::size_t n = batch.y.size();
  double acc = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double e = fp.o[s] - batch.y[s];
    acc += e * e;
  }
  return acc / static_cast<double>(n);
}

double mlp_batch_gradients(const MlpNetwork& net, const MlpBatch& batch, MlpGradients& g) {
  const std::size_t n = batch.y.size();
  const ForwardPass fp = forward_batch(net, batch.a0);

  g.w1 = Mat(kH1, kIn + 1);
  g.w2 = Mat(kH2, kH1 + 1);
  g.w3 = Mat(1, kH2 + 1);

  double loss = 0.0;
  Vec dh1(kH1);
  for (std::size_t s = 0; s < n; ++s) {
    const double err = fp.o[s] - batch.y[s];
    loss += err * err;
    const double dz3 = fp.z3[s] > 0.0 ? 2.0 * err / static_cast<double>(n) : 0.0;
    if (dz3 == 0.0) continue;
    kern::axpy(dz3, fp.a2.row(s), g.w3.row(0));
    // through the second hidden layer
    for (std::size_t j = 0; j < kH2; ++j) {
      const double a = fp.a2(s, j);
      const double dz2 = dz3 * net.w3(0, j) * a * (1.0 - a);
      if (dz2 == 0.0) continue;
      kern::axpy(dz2, fp.a1.row(s), g.w2.row(j));
      kern::axpy(dz2, net.w2.row(j).subspan(0, kH1), dh1);
    }
    for (std::size_t j = 0; j < kH1; ++j) {
      const double a = fp.a1(s, j);
      const double dz1 = dh1[j] * a * (1.0 - a);
      if (dz1 != 0.0) kern::axpy(dz1, batch.a0.row(s), g.w1.row(j));
      dh1[j] = 0.0;
    }
  }
  return loss / static_cast<double>(n);
}

MlpTrainResult mlp_train(MlpNetwork& net, std::span<const TrainingSample> rows,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (rows.empty()) throw std::invalid_argument("mlp_train: empty dataset");

  // Normalization ranges from the full dataset.
  for (std::size_t j = 0; j < kIn; ++j) {
    double lo = rows[0].x[j], hi = rows[0].x[j];
    for (const auto& r : rows) {
      lo = std::min(lo, r.x[j]);
      hi = std::max(hi, r.x[j]);
    }
    net.in_range[j] = {lo, hi};
  }
  {
    double lo = rows[0].y, hi = rows[0].y;
    for (const auto& r : rows) {
      lo = std::min(lo, r.y);
      hi = std::max(hi, r.y);
    }
    net.out_range = {lo, hi};
  }

  // Deterministic shuffle, last slice held out for validation.
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::stream(cfg.seed, 0x73706c69 /* "spli" */);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.next_u64() % i]);
  std::size_t n_hold = static_cast<std::size_t>(cfg.holdout_frac * rows.size());
  if (rows.size() - n_hold < 1) n_hold = 0;

  std::vector<TrainingSample> train_rows, hold_rows;
  train_rows.reserve(rows.size() - n_hold);
  hold_rows.reserve(n_hold);
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < rows.size() - n_hold ? train_rows : hold_rows).push_back(rows[order[i]]);

  const MlpBatch batch = mlp_prepare_batch(net, train_rows);

  MlpGradients g, v;
  v.w1 = Mat(kH1, kIn + 1);
  v.w2 = Mat(kH2, kH1 + 1);
  v.w3 = Mat(1, kH2 + 1);

  MlpTrainResult res;
  res.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
  const auto apply = [&](Mat& w, Mat& vel, const Mat& grad) {
    kern::scal(cfg.momentum, {vel.data(), vel.rows() * vel.cols()});
    kern::axpy(1.0, {grad.data(), grad.rows() * grad.cols()},
               {vel.data(), vel.rows() * vel.cols()});
    kern::axpy(-cfg.lr, {vel.data(), vel.rows() * vel.cols()},
               {w.data(), w.rows() * w.cols()});
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double loss = mlp_batch_gradients(net, batch, g);
    if (!std::isfinite(loss))
      throw std::runtime_error("mlp_train: loss diverged at epoch " + std::to_string(epoch));
    res.loss_history.push_back(loss);
    apply(net.w1, v.w1, g.w1);
    apply(net.w2, v.w2, g.w2);
    apply(net.w3, v.w3, g.w3);
  }
  res.final_train_mse = mlp_batch_loss(net, batch);
  if (!hold_rows.empty()) {
    const MlpBatch hb = mlp_prepare_batch(net, hold_rows);
    res.validation_mse = mlp_batch_loss(net, hb);
  }
  net.epochs_trained = cfg.epochs;
  net.final_train_mse = res.final_train_mse;
  net.validation_mse = res.validation_mse;
  return res;
}

double mlp_forward(const MlpNetwork& net, const std::array<double, 4>& inputs) {
  Vec a0(kIn + 1);
  for (std::size_t j = 0; j < kIn; ++j) a0[j] = normalize(inputs[j], net.in_range[j]);
  a0[kIn] = 1.0;
  Vec a1(kH1 + 1);
  for (std::size_t j = 0; j < kH1; ++j) a1[j] = sigmoid(kern::dot(net.w1.row(j), a0));
  a1[kH1] = 1.0;
  Vec a2(kH2 + 1);
  for (std::size_t j = 0; j < kH2; ++j) a2[j] = sigmoid(kern::dot(net.w2.row(j), a1));
  a2[kH2] = 1.0;
  const double z3 = kern::dot(net.w3.row(0), a2);
  const double o = z3 > 0.0 ? z3 : 0.0;
  return net.out_range.first + o * (net.out_range.second - net.out_range.first);
}

namespace {

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const json& j, std::size_t rows, std::size_t cols) {
  if (j.size() != rows) throw std::runtime_error("mlp model: bad matrix shape");
  Mat m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j[i].size() != cols) throw std::runtime_error("mlp model: bad matrix shape");
    for (std::size_t jj = 0; jj < cols; ++jj) m(i, jj) = j[i][jj].get<double>();
  }
  return m;
}

}  // namespace

void save_mlp(const MlpNetwork& net, const std::string& path) {
  json j;
  j["format"] = "latmpc-mlp";
  j["version"] = 1;
  j["layers"] = {4, 16, 8, 1};
  j["w1"] = mat_to_json(net.w1);
  j["w2"] = mat_to_json(net.w2);
  j["w3"] = mat_to_json(net.w3);
  json ranges = json::array();
  for (const auto& r : net.in_range) ranges.push_back({r.first, r.second});
  j["input_ranges"] = ranges;
  j["output_range"] = {net.out_range.first, net.out_range.second};
  j["target"] = net.target;
  j["training"] = {{"seed", net.seed},
                   {"epochs", net.epochs_trained},
                   {"final_train_mse", net.final_train_mse},
                   {"validation_mse", net.validation_mse}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

MlpNetwork load_mlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model: " + path);
  json j = json::parse(in);
  if (j.value("format", "") != "latmpc-mlp" || j.value("version", 0) != 1)
    throw std::runtime_error("not a latmpc-mlp v1 model: " + path);
  MlpNetwork net;
  net.w1 = mat_from_json(j.at("w1"), kH1, kIn + 1);
  net.w2 = mat_from_json(j.at("w2"), kH2, kH1 + 1);
  net.w3 = mat_from_json(j.at("w3"), 1, kH2 + 1);
  const auto& ranges = j.at("input_ranges");
  for (std::size_t i = 0; i < kIn; ++i)
    net.in_range[i] = {ranges[i][0].get<double>(), ranges[i][1].get<double>()};
  net.out_range = {j.at("output_range")[0].get<double>(), j.at("output_range")[1].get<double>()};
  net.target = j.value("target", "");
  const auto& tr = j.at("training");
  net.seed = tr.value("seed", 0ULL);
  net.epochs_trained = tr.value("epochs", 0);
  net.final_train_mse = tr.value("final_train_mse", 0.0);
  net.validation_mse = tr.value("validation_mse", 0.0);
  return net;
}

MpcParams clamp_adapted(double np_pred, double nc_pred, double q_pred, double r_pred) {
  MpcParams p;
  p.np = std::clamp(static_cast<int>(std::lround(np_pred)), 10, 60);
  p.nc = std::clamp(static_cast<int>(std::lround(nc_pred)), 2, p.np);
  p.q = std::clamp(q_pred, 0.1, 100.0);
  p.r = std::clamp(r_pred, 0.001, 1.0);
  return p;
}

MpcParams NnAdapter::adapt(const OperatingCondition& cond) const {
  const std::array<double, 4> in{cond.vx, cond.wind, cond.mu, cond.y_ref};
  return clamp_adapted(mlp_forward(nets_[0], in), mlp_forward(nets_[1], in),
                       mlp_forward(nets_[2], in), mlp_forward(nets_[3], in));
}

}  // namespace latmpc
