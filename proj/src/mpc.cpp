#include "latmpc/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "latmpc/kernels.hpp"

namespace latmpc {

void MpcParams::validate() const {
  if (nc < 1 || np < nc) throw std::invalid_argument("MpcParams: need 1 <= nc <= np");
  if (!(q > 0.0) || !(r > 0.0)) throw std::invalid_argument("MpcParams: q and r must be > 0");
}

void MpcConstraints::validate() const {
  if (!(du_max > 0.0) || !(u_max > 0.0))
    throw std::invalid_argument("MpcConstraints: bounds must be > 0");
  if (y_max && !(*y_max > 0.0))
    throw std::invalid_argument("MpcConstraints: y bound must be > 0");
}

DiscreteStateSpace discretize(const ContinuousStateSpace& css, double ts) {
  if (!(ts > 0.0)) throw std::invalid_argument("discretize: ts must be > 0");
  const std::size_t n = css.a.rows();
  const std::size_t m = css.b.cols();
  // exp([[A B],[0 0]] ts) = [[Ad Bd],[0 I]] gives the exact ZOH pair.
  Mat block(n + m, n + m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) block(i, j) = css.a(i, j) * ts;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) block(i, n + j) = css.b(i, j) * ts;
  const Mat e = expm(block);

  DiscreteStateSpace dss;
  dss.a_d = Mat(n, n);
  dss.b_d = Mat(n, m);
  dss.c_d = css.c;
  dss.ts = ts;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) dss.a_d(i, j) = e(i, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) dss.b_d(i, j) = e(i, n + j);
  return dss;
}

AugmentedModel augment(const DiscreteStateSpace& dss) {
  const std::size_t n = dss.a_d.rows();
  const Mat ca = matmul(dss.c_d, dss.a_d);
  const Mat cb = matmul(dss.c_d, dss.b_d);

  AugmentedModel aug;
  aug.a_aug = Mat(n + 1, n + 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) aug.a_aug(i, j) = dss.a_d(i, j);
  for (std::size_t j = 0; j < n; ++j) aug.a_aug(n, j) = ca(0, j);
  aug.a_aug(n, n) = 1.0;

  aug.b_aug = Mat(n + 1, 1);
  for (std::size_t i = 0; i < n; ++i) aug.b_aug(i, 0) = dss.b_d(i, 0);
  aug.b_aug(n, 0) = cb(0, 0);

  aug.c_aug = Mat(1, n + 1);
  aug.c_aug(0, n) = 1.0;
  return aug;
}

PredictionMatrices build_prediction(const AugmentedModel& aug, int np, int nc) {
  if (nc < 1 || nc > np) throw std::invalid_argument("build_prediction: need 1 <= nc <= np");
  const std::size_t n = aug.a_aug.rows();

  PredictionMatrices pred;
  pred.f = Mat(static_cast<std::size_t>(np), n);
  pred.phi = Mat(static_cast<std::size_t>(np), static_cast<std::size_t>(nc));

  // Row i of F is C*A^(i+1); the impulse responses C*A^i*B fill Phi's
  // diagonals. One forward recursion produces both.
  Vec row(aug.c_aug.row(0).begin(), aug.c_aug.row(0).end());  // C*A^i, starts at i=0
  Vec impulse(static_cast<std::size_t>(np));                  // C*A^i*B
  for (int i = 0; i < np; ++i) {
    double cb = 0.0;
    for (std::size_t j = 0; j < n; ++j) cb += row[j] * aug.b_aug(j, 0);
    impulse[static_cast<std::size_t>(i)] = cb;
    row = matvec_t(aug.a_aug, row);  // row <- row * A
    for (std::size_t j = 0; j < n; ++j) pred.f(static_cast<std::size_t>(i), j) = row[j];
  }
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < nc && j <= i; ++j)
      pred.phi(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
          impulse[static_cast<std::size_t>(i - j)];
  return pred;
}

QpProblem assemble_qp(const PredictionMatrices& pred, std::span<const double> x_aug,
                      std::span<const double> ref, const MpcParams& params,
                      const MpcConstraints& cons, double u_prev) {
  params.validate();
  cons.validate();
  const std::size_t np = pred.f.rows();
  const std::size_t nc = pred.phi.cols();
  if (ref.size() != np) throw std::invalid_argument("assemble_qp: reference window length != np");

  QpProblem qp;

  // E = Phi^T Q Phi + R, K = -Phi^T Q (ref - F x)
  const Mat phi_t = transpose(pred.phi);
  qp.e = matmul(phi_t, pred.phi);
  kern::scal(params.q, {qp.e.data(), nc * nc});
  for (std::size_t i = 0; i < nc; ++i) qp.e(i, i) += params.r;

  Vec free_resp = matvec(pred.f, x_aug);
  Vec err(np);
  for (std::size_t i = 0; i < np; ++i) err[i] = ref[i] - free_resp[i];
  qp.k = matvec(phi_t, err);
  kern::scal(-params.q, qp.k);

  // Constraint rows: [I; -I] for du, [L; -L] for u accumulation, and
  // optionally [Phi; -Phi] for the predicted outputs.
  const std::size_t ncon = 4 * nc + (cons.y_max ? 2 * np : 0);
  qp.m = Mat(ncon, nc);
  qp.gamma.assign(ncon, 0.0);
  std::size_t r0 = 0;
  for (std::size_t i = 0; i < nc; ++i) {
    qp.m(r0 + i, i) = 1.0;
    qp.gamma[r0 + i] = cons.du_max;
  }
  r0 += nc;
  for (std::size_t i = 0; i < nc; ++i) {
    qp.m(r0 + i, i) = -1.0;
    qp.gamma[r0 + i] = cons.du_max;
  }
  r0 += nc;
  for (std::size_t i = 0; i < nc; ++i) {
    for (std::size_t j = 0; j <= i; ++j) qp.m(r0 + i, j) = 1.0;
    qp.gamma[r0 + i] = cons.u_max - u_prev;
  }
  r0 += nc;
  for (std::size_t i = 0; i < nc; ++i) {
    for (std::size_t j = 0; j <= i; ++j) qp.m(r0 + i, j) = -1.0;
    qp.gamma[r0 + i] = cons.u_max + u_prev;
  }
  r0 += nc;
  if (cons.y_max) {
    for (std::size_t i = 0; i < np; ++i) {
      for (std::size_t j = 0; j < nc; ++j) qp.m(r0 + i, j) = pred.phi(i, j);
      qp.gamma[r0 + i] = *cons.y_max - free_resp[i];
    }
    r0 += np;
    for (std::size_t i = 0; i < np; ++i) {
      for (std::size_t j = 0; j < nc; ++j) qp.m(r0 + i, j) = -pred.phi(i, j);
      qp.gamma[r0 + i] = *cons.y_max + free_resp[i];
    }
  }
  return qp;
}

HildrethWorkspace::HildrethWorkspace(const Mat& e, const Mat& m_in)
    : e_chol(e), m(m_in) {
  if (!e_chol.ok()) throw std::runtime_error("hildreth: Hessian not positive definite");
  if (m.rows() > 0) {
    einv_mt = e_chol.solve_mat(transpose(m));
    p = matmul(m, einv_mt);
  }
}

QpSolution hildreth_solve(const HildrethWorkspace& ws, std::span<const double> k,
                          std::span<const double> gamma, double tol, int max_iter) {
  QpSolution sol;
  Vec neg_k(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) neg_k[i] = -k[i];
  sol.x = ws.e_chol.solve(neg_k);  // unconstrained minimum -E^{-1} K

  const std::size_t ncon = ws.m.rows();
  if (ncon == 0) return sol;

  Vec mx = matvec(ws.m, sol.x);
  bool feasible = true;
  for (std::size_t i = 0; i < ncon; ++i) {
    if (mx[i] > gamma[i]) {
      feasible = false;
      break;
    }
  }
  if (feasible) return sol;

  // Dual coordinate ascent on lambda >= 0 (Hildreth). d = gamma - M x_unc.
  Vec d(ncon);
  for (std::size_t i = 0; i < ncon; ++i) d[i] = gamma[i] - mx[i];
  Vec lambda(ncon, 0.0);
  bool converged = false;
  int it = 0;
  while (it < max_iter && !converged) {
    ++it;
    double max_change = 0.0;
    for (std::size_t i = 0; i < ncon; ++i) {
      const double pii = ws.p(i, i);
      if (pii <= 0.0) continue;
      double w = kern::dot(ws.p.row(i), lambda) - pii * lambda[i] - d[i];
      double next = -w / pii;
      if (next < 0.0) next = 0.0;
      max_change = std::max(max_change, std::fabs(next - lambda[i]));
      lambda[i] = next;
    }
    converged = max_change < tol;
  }
  sol.iterations = it;
  sol.converged = converged;

  // x = x_unc - E^{-1} M^T lambda (einv_mt is stored n x ncon)
  for (std::size_t j = 0; j < ncon; ++j) {
    if (lambda[j] == 0.0) continue;
    ++sol.active_constraints;
    for (std::size_t i = 0; i < sol.x.size(); ++i)
      sol.x[i] -= ws.einv_mt(i, j) * lambda[j];
  }
  return sol;
}

QpSolution hildreth_solve(const QpProblem& qp, double tol, int max_iter) {
  HildrethWorkspace ws(qp.e, qp.m);
  return hildreth_solve(ws, qp.k, qp.gamma, tol, max_iter);
}

MpcController::MpcController(VehicleParams vehicle, MpcParams params,
                             MpcConstraints cons, MpcSettings settings)
    : vehicle_(vehicle), params_(params), cons_(cons), settings_(settings) {
  vehicle_.validate();
  params_.validate();
  cons_.validate();
  if (!(settings_.ts > 0.0)) throw std::invalid_argument("MpcController: ts must be > 0");
}

void MpcController::set_params(const MpcParams& p) {
  if (p == params_) return;
  p.validate();
  params_ = p;
  built_ = false;
}

void MpcController::reset() {
  built_ = false;
  u_prev_ = 0.0;
  has_prev_state_ = false;
  last_qp_iterations_ = 0;
  last_qp_converged_ = true;
}

void MpcController::rebuild(double vx) {
  const ContinuousStateSpace css = linear_lateral_matrices(vehicle_, vx);
  model_ = discretize(css, settings_.ts);
  const AugmentedModel aug = augment(model_);
  pred_ = build_prediction(aug, params_.np, params_.nc);

  const std::size_t nc = static_cast<std::size_t>(params_.nc);
  Mat phi_t = transpose(pred_.phi);
  Mat e = matmul(phi_t, pred_.phi);
  kern::scal(params_.q, {e.data(), nc * nc});
  for (std::size_t i = 0; i < nc; ++i) e(i, i) += params_.r;
  phi_t_q_ = phi_t;
  kern::scal(params_.q, {phi_t_q_.data(), phi_t_q_.rows() * phi_t_q_.cols()});

  // Constraint matrix rows do not depend on the state, so the dual-ascent
  // workspace survives until the next model rebuild. Output rows would add
  // Phi blocks here; gamma is refreshed every step either way.
  const std::size_t np = static_cast<std::size_t>(params_.np);
  const std::size_t ncon = 4 * nc + (cons_.y_max ? 2 * np : 0);
  Mat m(ncon, nc);
  std::size_t r0 = 0;
  for (std::size_t i = 0; i < nc; ++i) m(r0 + i, i) = 1.0;
  r0 += nc;
  for (std::size_t i = 0; i < nc; ++i) m(r0 + i, i) = -1.0;
  r0 += nc;
  for (std::size_t i = 0; i < nc; ++i)
    for (std::size_t j = 0; j <= i; ++j) m(r0 + i, j) = 1.0;
  r0 += nc;
  for (std::size_t i = 0; i < nc; ++i)
    for (std::size_t j = 0; j <= i; ++j) m(r0 + i, j) = -1.0;
  r0 += nc;
  if (cons_.y_max) {
    for (std::size_t i = 0; i < np; ++i)
      for (std::size_t j = 0; j < nc; ++j) m(r0 + i, j) = pred_.phi(i, j);
    r0 += np;
    for (std::size_t i = 0; i < np; ++i)
      for (std::size_t j = 0; j < nc; ++j) m(r0 + i, j) = -pred_.phi(i, j);
  }
  ws_.emplace(e, m);

  vx_cached_ = vx;
  built_ = true;
}

double MpcController::step(const LateralState& measurement, double vx,
                           std::span<const double> ref_window) {
  if (!measurement.finite())
    throw std::runtime_error("mpc_step: non-finite measurement");
  if (!std::isfinite(vx)) throw std::runtime_error("mpc_step: non-finite vx");

  if (!built_ || std::fabs(vx - vx_cached_) > settings_.vx_rebuild_threshold)
    rebuild(vx);

  const std::size_t np = static_cast<std::size_t>(params_.np);
  const std::size_t nc = static_cast<std::size_t>(params_.nc);

  // Augmented state [dx; y].
  Vec x_aug(5, 0.0);
  if (has_prev_state_) {
    x_aug[0] = measurement.vy - prev_state_.vy;
    x_aug[1] = measurement.psi - prev_state_.psi;
    x_aug[2] = measurement.psi_dot - prev_state_.psi_dot;
    x_aug[3] = measurement.y - prev_state_.y;
  }
  x_aug[4] = measurement.y;

  // Reference window, padded by holding the last value.
  Vec ref(np);
  if (ref_window.empty()) throw std::invalid_argument("mpc_step: empty reference window");
  for (std::size_t i = 0; i < np; ++i)
    ref[i] = i < ref_window.size() ? ref_window[i] : ref_window.back();

  const Vec free_resp = matvec(pred_.f, x_aug);
  Vec err(np);
  for (std::size_t i = 0; i < np; ++i) err[i] = ref[i] - free_resp[i];
  Vec k = matvec(phi_t_q_, err);
  kern::scal(-1.0, k);

  const std::size_t ncon = ws_->m.rows();
  Vec gamma(ncon);
  std::size_t r0 = 0;
  for (std::size_t i = 0; i < nc; ++i) gamma[r0 + i] = cons_.du_max;
  r0 += nc;
  for (std::size_t i = 0; i < nc; ++i) gamma[r0 + i] = cons_.du_max;
  r0 += nc;
  for (std::size_t i = 0; i < nc; ++i) gamma[r0 + i] = cons_.u_max - u_prev_;
  r0 += nc;
  for (std::size_t i = 0; i < nc; ++i) gamma[r0 + i] = cons_.u_max + u_prev_;
  r0 += nc;
  if (cons_.y_max) {
    for (std::size_t i = 0; i < np; ++i) gamma[r0 + i] = *cons_.y_max - free_resp[i];
    r0 += np;
    for (std::size_t i = 0; i < np; ++i) gamma[r0 + i] = *cons_.y_max + free_resp[i];
  }

  const QpSolution sol = hildreth_solve(*ws_, k, gamma, settings_.qp_tol,
                                        settings_.qp_max_iter);
  last_qp_iterations_ = sol.iterations;
  last_qp_converged_ = sol.converged;

  // Only the first move is applied. The clamps keep both Table-2 bounds
  // exact even when the dual solve stopped at max_iter.
  double du = std::clamp(sol.x[0], -cons_.du_max, cons_.du_max);
  double u = std::clamp(u_prev_ + du, -cons_.u_max, cons_.u_max);

  u_prev_ = u;
  prev_state_ = measurement;
  has_prev_state_ = true;
  return u;
}

}  // namespace latmpc
