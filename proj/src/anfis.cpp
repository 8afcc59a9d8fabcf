#include "latmpc/anfis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "latmpc/kernels.hpp"

namespace latmpc {

using nlohmann::json;

namespace {

constexpr double kStrengthGuard = 1e-12;
constexpr double kSigmaFloor = 1e-3;

double normalize(double v, std::pair<double, double> range) {
  if (range.second <= range.first) return 0.0;
  const double clamped = std::clamp(v, range.first, range.second);
  return (clamped - range.first) / (range.second - range.first);
}

}  // namespace

void HybridTrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("HybridTrainConfig: epochs must be >= 1");
  if (!(radius > 0.0 && radius <= 1.0))
    throw std::invalid_argument("HybridTrainConfig: radius must be in (0,1]");
  if (!(premise_lr > 0.0)) throw std::invalid_argument("HybridTrainConfig: premise_lr must be > 0");
  if (!(forgetting > 0.0 && forgetting <= 1.0))
    throw std::invalid_argument("HybridTrainConfig: forgetting must be in (0,1]");
}

double anfis_forward_normalized(const AnfisModel& model, const std::array<double, 4>& xn,
                                AnfisTrace* trace) {
  const std::size_t n_rules = model.rules.size();
  if (n_rules == 0) throw std::runtime_error("anfis: model has no rules");

  AnfisTrace local;
  AnfisTrace& tr = trace ? *trace : local;
  tr.memberships.assign(n_rules, {});
  tr.strengths.assign(n_rules, 0.0);
  tr.normalized.assign(n_rules, 0.0);
  tr.rule_outputs.assign(n_rules, 0.0);
  tr.degenerate = false;

  double sum_w = 0.0;
  for (std::size_t i = 0; i < n_rules; ++i) {
    const auto& rule = model.rules[i];
    double w = 1.0;
    for (std::size_t j = 0; j < 4; ++j) {
      const double d = xn[j] - rule.center[j];
      const double mu = std::exp(-d * d / (2.0 * rule.sigma[j] * rule.sigma[j]));
      tr.memberships[i][j] = mu;
      w *= mu;
    }
    tr.strengths[i] = w;
    sum_w += w;
    double f = rule.coef[4];
    for (std::size_t j = 0; j < 4; ++j) f += rule.coef[j] * xn[j];
    tr.rule_outputs[i] = f;
  }
  tr.strength_sum = sum_w;

  double out = 0.0;
  if (sum_w < kStrengthGuard) {
    // Input far outside every cluster: fall back to the unweighted mean.
    tr.degenerate = true;
    const double wbar = 1.0 / static_cast<double>(n_rules);
    for (std::size_t i = 0; i < n_rules; ++i) {
      tr.normalized[i] = wbar;
      out += wbar * tr.rule_outputs[i];
    }
  } else {
    for (std::size_t i = 0; i < n_rules; ++i) {
      tr.normalized[i] = tr.strengths[i] / sum_w;
      out += tr.normalized[i] * tr.rule_outputs[i];
    }
  }
  return out;
}

double anfis_forward(const AnfisModel& model, const std::array<double, 4>& inputs,
                     AnfisTrace* trace) {
  std::array<double, 4> xn;
  for (std::size_t j = 0; j < 4; ++j) xn[j] = normalize(inputs[j], model.in_range[j]);
  const double o = anfis_forward_normalized(model, xn, trace);
  return model.out_range.first + o * (model.out_range.second - model.out_range.first);
}

ScatterResult anfis_init_scatter(const std::vector<std::array<double, 4>>& pts,
                                 double radius) {
  if (pts.empty()) throw std::invalid_argument("anfis_init_scatter: empty dataset");
  const std::size_t n = pts.size();
  const double alpha = 4.0 / (radius * radius);
  const double rb = 1.5 * radius;
  const double beta = 4.0 / (rb * rb);

  const auto dist2 = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      const double d = pts[a][j] - pts[b][j];
      s += d * d;
    }
    return s;
  };

  Vec potential(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) potential[i] += std::exp(-alpha * dist2(i, j));

  ScatterResult res;
  res.sigma = radius / std::sqrt(8.0);

  double first_potential = 0.0;
  for (;;) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (potential[i] > potential[best]) best = i;
    const double p_best = potential[best];
    if (res.centers.empty()) {
      first_potential = p_best;
    } else if (p_best < 0.15 * first_potential) {
      break;
    }
    res.centers.push_back(pts[best]);
    for (std::size_t i = 0; i < n; ++i)
      potential[i] -= p_best * std::exp(-beta * dist2(i, best));
    if (res.centers.size() >= n) break;
  }
  if (res.centers.size() == 1 && n > 1) {
    bool all_same = true;
    for (std::size_t i = 1; i < n && all_same; ++i) all_same = dist2(0, i) < 1e-24;
    if (all_same)
      std::fprintf(stderr, "anfis: degenerate dataset (identical points), single rule\n");
  }
  return res;
}

Vec anfis_rls_consequents(const AnfisModel& model, const Mat& inputs_norm, const Vec& targets,
                          double forgetting, double initial_covariance) {
  const std::size_t n_rules = model.rules.size();
  const std::size_t m = n_rules * 5;
  const std::size_t n = inputs_norm.rows();

  Vec theta(m, 0.0);
  Mat p = Mat::identity(m);
  kern::scal(initial_covariance, {p.data(), m * m});

  Vec z(m);
  Vec pz(m);
  for (std::size_t s = 0; s < n; ++s) {
    std::array<double, 4> xn;
    for (std::size_t j = 0; j < 4; ++j) xn[j] = inputs_norm(s, j);
    AnfisTrace tr;
    anfis_forward_normalized(model, xn, &tr);
    for (std::size_t i = 0; i < n_rules; ++i) {
      const double wbar = tr.normalized[i];
      for (std::size_t j = 0; j < 4; ++j) z[i * 5 + j] = wbar * xn[j];
      z[i * 5 + 4] = wbar;
    }
    for (std::size_t i = 0; i < m; ++i) pz[i] = kern::dot(p.row(i), z);
    const double denom = forgetting + kern::dot(z, pz);
    const double err = targets[s] - kern::dot(z, theta);
    const double inv = 1.0 / denom;
    kern::axpy(err * inv, pz, theta);
    // P <- (P - pz pz^T / denom) / forgetting
    for (std::size_t i = 0; i < m; ++i) {
      kern::axpy(-pz[i] * inv, pz, p.row(i));
      if (forgetting != 1.0) kern::scal(1.0 / forgetting, p.row(i));
    }
    if (!all_finite(theta)) {
      throw std::runtime_error("anfis RLS: covariance blow-up at sample " + std::to_string(s));
    }
  }
  return theta;
}

double anfis_premise_gradients(const AnfisModel& model, const Mat& inputs_norm,
                               const Vec& targets, std::vector<std::array<double, 8>>& grads) {
  const std::size_t n_rules = model.rules.size();
  const std::size_t n = inputs_norm.rows();
  grads.assign(n_rules, {});

  double loss = 0.0;
  AnfisTrace tr;
  for (std::size_t s = 0; s < n; ++s) {
    std::array<double, 4> xn;
    for (std::size_t j = 0; j < 4; ++j) xn[j] = inputs_norm(s, j);
    const double out = anfis_forward_normalized(model, xn, &tr);
    const double err = out - targets[s];
    loss += err * err;
    if (tr.degenerate) continue;  // fallback output does not depend on premises
    const double scale = 2.0 * err / static_cast<double>(n);
    for (std::size_t i = 0; i < n_rules; ++i) {
      // d out / d w_i = (f_i - out) / sum_w
      const double dout_dw = (tr.rule_outputs[i] - out) / tr.strength_sum;
      const double common = scale * dout_dw * tr.strengths[i];
      if (common == 0.0) continue;
      const auto& rule = model.rules[i];
      for (std::size_t j = 0; j < 4; ++j) {
        const double d = xn[j] - rule.center[j];
        const double s2 = rule.sigma[j] * rule.sigma[j];
        grads[i][j] += common * d / s2;                        // d/d center
        grads[i][4 + j] += common * d * d / (s2 * rule.sigma[j]);  // d/d sigma
      }
    }
  }
  return loss / static_cast<double>(n);
}

namespace {

double batch_mse(const AnfisModel& model, const Mat& inputs_norm, const Vec& targets) {
  double acc = 0.0;
  for (std::size_t s = 0; s < inputs_norm.rows(); ++s) {
    std::array<double, 4> xn;
    for (std::size_t j = 0; j < 4; ++j) xn[j] = inputs_norm(s, j);
    const double e = anfis_forward_normalized(model, xn) - targets[s];
    acc += e * e;
  }
  return acc / static_cast<double>(inputs_norm.rows());
}

}  // namespace

AnfisTrainResult anfis_train_hybrid(AnfisModel& model, std::span<const TrainingSample> rows,
                                    const HybridTrainConfig& cfg) {
  cfg.validate();
  if (rows.empty()) throw std::invalid_argument("anfis_train_hybrid: empty dataset");

  for (std::size_t j = 0; j < 4; ++j) {
    double lo = rows[0].x[j], hi = rows[0].x[j];
    for (const auto& r : rows) {
      lo = std::min(lo, r.x[j]);
      hi = std::max(hi, r.x[j]);
    }
    model.in_range[j] = {lo, hi};
  }
  {
    double lo = rows[0].y, hi = rows[0].y;
    for (const auto& r : rows) {
      lo = std::min(lo, r.y);
      hi = std::max(hi, r.y);
    }
    model.out_range = {lo, hi};
  }

  const std::size_t n = rows.size();
  Mat inputs(n, 4);
  Vec targets(n);
  std::vector<std::array<double, 4>> pts(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < 4; ++j) {
      inputs(s, j) = normalize(rows[s].x[j], model.in_range[j]);
      pts[s][j] = inputs(s, j);
    }
    targets[s] = normalize(rows[s].y, model.out_range);
  }

  const ScatterResult scatter = anfis_init_scatter(pts, cfg.radius);
  model.rules.clear();
  model.rules.reserve(scatter.centers.size());
  for (const auto& c : scatter.centers) {
    AnfisRule rule;
    rule.center = c;
    rule.sigma.fill(scatter.sigma);
    rule.coef.fill(0.0);
    model.rules.push_back(rule);
  }

  AnfisTrainResult res;
  res.rule_count = static_cast<int>(model.rules.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    res.mse_before_rls.push_back(batch_mse(model, inputs, targets));

    Vec theta;
    try {
      theta = anfis_rls_consequents(model, inputs, targets, cfg.forgetting);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")");
    }
    for (std::size_t i = 0; i < model.rules.size(); ++i)
      for (std::size_t j = 0; j < 5; ++j) model.rules[i].coef[j] = theta[i * 5 + j];

    const double after_rls = batch_mse(model, inputs, targets);
    res.mse_after_rls.push_back(after_rls);
    res.loss_history.push_back(after_rls);
    if (!std::isfinite(after_rls))
      throw std::runtime_error("anfis_train_hybrid: loss diverged at epoch " +
                               std::to_string(epoch));

    std::vector<std::array<double, 8>> grads;
    anfis_premise_gradients(model, inputs, targets, grads);
    for (std::size_t i = 0; i < model.rules.size(); ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        model.rules[i].center[j] -= cfg.premise_lr * grads[i][j];
        model.rules[i].sigma[j] -= cfg.premise_lr * grads[i][4 + j];
        if (model.rules[i].sigma[j] < kSigmaFloor) model.rules[i].sigma[j] = kSigmaFloor;
      }
    }
  }
  model.epochs_trained = cfg.epochs;
  model.final_train_mse = res.loss_history.back();
  return res;
}

void save_anfis(const AnfisModel& model, const std::string& path) {
  json j;
  j["format"] = "latmpc-anfis";
  j["version"] = 1;
  json rules = json::array();
  for (const auto& r : model.rules) {
    json jr;
    jr["center"] = r.center;
    jr["sigma"] = r.sigma;
    jr["coef"] = r.coef;
    rules.push_back(std::move(jr));
  }
  j["rules"] = std::move(rules);
  json ranges = json::array();
  for (const auto& r : model.in_range) ranges.push_back({r.first, r.second});
  j["input_ranges"] = ranges;
  j["output_range"] = {model.out_range.first, model.out_range.second};
  j["target"] = model.target;
  j["training"] = {{"seed", model.seed},
                   {"epochs", model.epochs_trained},
                   {"final_train_mse", model.final_train_mse}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

AnfisModel load_anfis(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model: " + path);
  json j = json::parse(in);
  if (j.value("format", "") != "latmpc-anfis" || j.value("version", 0) != 1)
    throw std::runtime_error("not a latmpc-anfis v1 model: " + path);
  AnfisModel model;
  for (const auto& jr : j.at("rules")) {
    AnfisRule r;
    for (std::size_t k = 0; k < 4; ++k) {
      r.center[k] = jr.at("center")[k].get<double>();
      r.sigma[k] = jr.at("sigma")[k].get<double>();
    }
    for (std::size_t k = 0; k < 5; ++k) r.coef[k] = jr.at("coef")[k].get<double>();
    model.rules.push_back(r);
  }
  const auto& ranges = j.at("input_ranges");
  for (std::size_t i = 0; i < 4; ++i)
    model.in_range[i] = {ranges[i][0].get<double>(), ranges[i][1].get<double>()};
  model.out_range = {j.at("output_range")[0].get<double>(),
                     j.at("output_range")[1].get<double>()};
  model.target = j.value("target", "");
  const auto& tr = j.at("training");
  model.seed = tr.value("seed", 0ULL);
  model.epochs_trained = tr.value("epochs", 0);
  model.final_train_mse = tr.value("final_train_mse", 0.0);
  return model;
}

MpcParams AnfisAdapter::adapt(const OperatingCondition& cond) const {
  const std::array<double, 4> in{cond.vx, cond.wind, cond.mu, cond.y_ref};
  return clamp_adapted(anfis_forward(models_[0], in), anfis_forward(models_[1], in),
                       anfis_forward(models_[2], in), anfis_forward(models_[3], in));
}

}  // namespace latmpc
