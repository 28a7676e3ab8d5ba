/*
 * Copyright 2026 The GSE Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gse/assignment.hpp"
#include "gse/error.hpp"
#include "gse/matrix.hpp"

namespace gse {

// A weighted empirical distribution.
struct PointCloud {
  Matrix points;
  std::vector<double> weights;

  static PointCloud uniform(Matrix pts) {
    const std::size_t n = pts.rows();
    PointCloud pc{std::move(pts), {}};
    pc.weights.assign(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
    return pc;
  }

  std::size_t size() const { return points.rows(); }
  std::size_t dim() const { return points.cols(); }

  void validate(const char* stage) const {
    if (points.rows() == 0) throw Error("wasserstein", stage, "point cloud is empty");
    if (weights.size() != points.rows())
      throw Error("wasserstein", stage, "weights do not match point count");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw Error("wasserstein", stage, "negative or NaN weight");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error("wasserstein", stage, "weights must sum to 1");
    if (!all_finite(points)) throw Error("wasserstein", stage, "non-finite coordinate");
  }
};

// Knobs of the entropic solver. `blur` is a length: the entropic
// regularization is eps = blur^2 in squared-distance units.
struct SinkhornConfig {
  double blur = 0.05;
  int max_iters = 500;
  double tol = 1e-6;
  double scaling = 0.5;
  bool debiased = true;

  double epsilon() const { return blur * blur; }

  void validate() const {
    if (!(blur > 0.0)) throw Error("wasserstein", "config", "blur must be positive");
    if (!(scaling > 0.0 && scaling < 1.0))
      throw Error("wasserstein", "config", "scaling must lie in (0,1)");
    if (max_iters < 1) throw Error("wasserstein", "config", "max_iters must be >= 1");
    if (!(tol > 0.0)) throw Error("wasserstein", "config", "tol must be positive");
  }
};

struct TransportPlanResult {
  // Differentiable objective: OT_eps(P,Q), or the Sinkhorn divergence
  // S_eps(P,Q) = OT_eps(P,Q) - OT_eps(P,P)/2 - OT_eps(Q,Q)/2 when debiased.
  double cost = 0.0;
  // Primal transport cost sum_ij plan_ij |x_i - y_j|^2 of the P-to-Q plan.
  double transport_cost = 0.0;
  Matrix plan;
  std::vector<double> f;
  std::vector<double> g;
  double residual = 0.0;
  int iterations = 0;
};

namespace detail {

inline Matrix squared_cost(const Matrix& x, const Matrix& y) {
  Matrix c(x.rows(), y.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < y.rows(); ++j) c(i, j) = squared_distance(x.row(i), y.row(j));
  return c;
}

inline std::vector<double> log_weights(const std::vector<double>& w) {
  std::vector<double> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    out[i] = w[i] > 0.0 ? std::log(w[i]) : -std::numeric_limits<double>::infinity();
  return out;
}

// out_i = -eps * log sum_j exp(log_w_j + (pot_j - C(i,j)) / eps); `transpose`
// reads C(j,i) instead.
inline void soft_min(const Matrix& c, bool transpose, const std::vector<double>& log_w,
                     const std::vector<double>& pot, double eps, std::vector<double>& out) {
  const std::size_t n = transpose ? c.cols() : c.rows();
  const std::size_t m = log_w.size();
  std::vector<double> terms(m);
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      const double cij = transpose ? c(j, i) : c(i, j);
      terms[j] = log_w[j] + (pot[j] - cij) / eps;
      hi = std::max(hi, terms[j]);
    }
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += std::exp(terms[j] - hi);
    out[i] = -eps * (hi + std::log(s));
  }
}

inline std::vector<double> annealing_schedule(const Matrix& c, double eps_target, double scaling) {
  double diameter2 = 0.0;
  for (double v : c.data()) diameter2 = std::max(diameter2, v);
  std::vector<double> eps;
  for (double e = diameter2; e > eps_target; e *= scaling) eps.push_back(e);
  eps.push_back(eps_target);
  return eps;
}

inline Matrix coupling(const Matrix& c, const std::vector<double>& a, const std::vector<double>& b,
                       const std::vector<double>& f, const std::vector<double>& g, double eps) {
  Matrix plan(c.rows(), c.cols());
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j)
      plan(i, j) = a[i] * b[j] * std::exp((f[i] + g[j] - c(i, j)) / eps);
  return plan;
}

inline double row_residual(const Matrix& plan, const std::vector<double>& a) {
  double r = 0.0;
  for (std::size_t i = 0; i < plan.rows(); ++i) {
    double s = 0.0;
    for (double v : plan.row(i)) s += v;
    r += std::abs(s - a[i]);
  }
  return r;
}

struct DualSolution {
  std::vector<double> f, g;
  Matrix plan;
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline double marginal_residual(const Matrix& plan, const std::vector<double>& a,
                                const std::vector<double>& b) {
  double r = row_residual(plan, a);
  for (std::size_t j = 0; j < plan.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < plan.rows(); ++i) s += plan(i, j);
    r += std::abs(s - b[j]);
  }
  return r;
}

// One damped Newton step on the marginal equations (Sinkhorn-Newton). The
// Jacobian [[diag(r), P], [P^T, diag(c)]] / eps is applied matrix-free and
// inverted with Jacobi-preconditioned conjugate gradients, plus a damping
// term. Returns false when no step length reduces the residual.
inline bool newton_step(const Matrix& c, const std::vector<double>& a,
                        const std::vector<double>& b, double eps, DualSolution& s, double damping) {
  const std::size_t n = a.size(), m = b.size();
  const Matrix& plan = s.plan;
  std::vector<double> r(n, 0.0), col(m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      r[i] += plan(i, j);
      col[j] += plan(i, j);
    }
  const std::size_t dim = n + m;
  // Tikhonov term relative to the mean marginal mass; it keeps the system
  // solvable when the plan splits into nearly disconnected blocks.
  const double lambda = std::max(damping * 2.0 / static_cast<double>(dim), 1e-300);
  std::vector<double> rhs(dim);
  for (std::size_t i = 0; i < n; ++i) rhs[i] = eps * (a[i] - r[i]);
  for (std::size_t j = 0; j < m; ++j) rhs[n + j] = eps * (b[j] - col[j]);

  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    y.assign(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = r[i] * x[i];
      for (std::size_t j = 0; j < m; ++j) {
        acc += plan(i, j) * x[n + j];
        y[n + j] += plan(i, j) * x[i];
      }
      y[i] = acc;
    }
    for (std::size_t j = 0; j < m; ++j) y[n + j] += col[j] * x[n + j];
    for (std::size_t k = 0; k < dim; ++k) y[k] += lambda * x[k];
  };
  std::vector<double> diag(dim);
  for (std::size_t i = 0; i < n; ++i) diag[i] = r[i] + lambda;
  for (std::size_t j = 0; j < m; ++j) diag[n + j] = col[j] + lambda;

  std::vector<double> x(dim, 0.0), res = rhs, z(dim), p(dim), ap;
  for (std::size_t k = 0; k < dim; ++k) z[k] = res[k] / diag[k];
  p = z;
  double rz = 0.0, rhs_norm = 0.0;
  for (std::size_t k = 0; k < dim; ++k) {
    rz += res[k] * z[k];
    rhs_norm += rhs[k] * rhs[k];
  }
  const std::size_t max_cg = std::min<std::size_t>(2 * dim, 500);
  for (std::size_t it = 0; it < max_cg && rz > 0.0; ++it) {
    apply(p, ap);
    double pap = 0.0;
    for (std::size_t k = 0; k < dim; ++k) pap += p[k] * ap[k];
    if (!(pap > 0.0)) break;
    const double alpha = rz / pap;
    double rr = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      x[k] += alpha * p[k];
      res[k] -= alpha * ap[k];
      rr += res[k] * res[k];
    }
    if (rr <= 1e-16 * rhs_norm) break;
    double rz_next = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      z[k] = res[k] / diag[k];
      rz_next += res[k] * z[k];
    }
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t k = 0; k < dim; ++k) p[k] = z[k] + beta * p[k];
  }

  const double before = marginal_residual(plan, a, b);
  for (double t = 1.0; t > 1e-4; t *= 0.5) {
    std::vector<double> f = s.f, g = s.g;
    for (std::size_t i = 0; i < n; ++i) f[i] += t * x[i];
    for (std::size_t j = 0; j < m; ++j) g[j] += t * x[n + j];
    Matrix trial = coupling(c, a, b, f, g, eps);
    if (marginal_residual(trial, a, b) < before) {
      s.f = std::move(f);
      s.g = std::move(g);
      s.plan = std::move(trial);
      return true;
    }
  }
  return false;
}

// Entropic OT with eps-annealing. Each annealing stage takes one symmetric
// (averaged) Sinkhorn step; at the target eps, Sinkhorn steps run until the
// marginals stall, after which Newton steps finish the solve.
inline DualSolution solve_entropic(const Matrix& c, const std::vector<double>& a,
                                   const std::vector<double>& b, const SinkhornConfig& cfg) {
  constexpr int kSinkhornWarmup = 50;
  const double eps_target = cfg.epsilon();
  const auto la = log_weights(a), lb = log_weights(b);
  DualSolution s;
  s.f.assign(a.size(), 0.0);
  s.g.assign(b.size(), 0.0);
  std::vector<double> tf, tg;
  auto averaged_step = [&](double eps) {
    soft_min(c, false, lb, s.g, eps, tf);
    soft_min(c, true, la, s.f, eps, tg);
    for (std::size_t i = 0; i < a.size(); ++i) s.f[i] = 0.5 * (s.f[i] + tf[i]);
    for (std::size_t j = 0; j < b.size(); ++j) s.g[j] = 0.5 * (s.g[j] + tg[j]);
  };
  const auto schedule = annealing_schedule(c, eps_target, cfg.scaling);
  for (std::size_t k = 0; k + 1 < schedule.size(); ++k) averaged_step(schedule[k]);

  // Alternating steps are faster than averaged ones once the potentials are
  // warm; Newton takes over when they stall and hands back if it fails.
  auto alternating_step = [&] {
    soft_min(c, false, lb, s.g, eps_target, s.f);
    soft_min(c, true, la, s.f, eps_target, s.g);
  };
  int it = 0;
  int sinkhorn_budget = kSinkhornWarmup;
  s.plan = coupling(c, a, b, s.f, s.g, eps_target);
  s.residual = marginal_residual(s.plan, a, b);
  while (it < cfg.max_iters && s.residual > cfg.tol) {
    ++it;
    if (sinkhorn_budget > 0) {
      alternating_step();
      s.plan = coupling(c, a, b, s.f, s.g, eps_target);
      --sinkhorn_budget;
    } else {
      bool stepped = false;
      for (double damping : {1e-10, 1e-6, 1e-3, 1e-1})
        if ((stepped = newton_step(c, a, b, eps_target, s, damping))) break;
      if (!stepped) sinkhorn_budget = kSinkhornWarmup;
    }
    s.residual = marginal_residual(s.plan, a, b);
  }
  s.iterations = it;
  s.converged = s.residual <= cfg.tol;
  // Dual objective <a,f> + <b,g> - eps (mass(plan) - 1); its x-derivative is
  // the plan-weighted cost gradient whether or not the marginals are exact.
  double mass = 0.0;
  for (double v : s.plan.data()) mass += v;
  for (std::size_t i = 0; i < a.size(); ++i) s.value += a[i] * s.f[i];
  for (std::size_t j = 0; j < b.size(); ++j) s.value += b[j] * s.g[j];
  s.value -= eps_target * (mass - 1.0);
  return s;
}

// Accumulates sum_j plan_ij * 2 (x_i - y_j) * scale into grad.
inline void add_plan_gradient(const Matrix& plan, const Matrix& x, const Matrix& y, double scale,
                              Matrix& grad) {
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto gi = grad.row(i);
    auto xi = x.row(i);
    for (std::size_t j = 0; j < y.rows(); ++j) {
      const double w = 2.0 * scale * plan(i, j);
      if (w == 0.0) continue;
      auto yj = y.row(j);
      for (std::size_t k = 0; k < xi.size(); ++k) gi[k] += w * (xi[k] - yj[k]);
    }
  }
}

}  // namespace detail

struct SinkhornValueAndGrad {
  TransportPlanResult result;
  Matrix grad;  // d cost / d source points, n x d
};

// Entropic W2^2 estimate and its gradient with respect to the source points.
// The gradient uses the converged plans (envelope rule); no iteration is
// differentiated.
// Debiasing term OT_eps(Q, Q), which stays fixed while only P moves.
struct SelfTerm {
  double value = 0.0;
  double residual = 0.0;
};

inline SelfTerm self_term(const PointCloud& q, const SinkhornConfig& cfg) {
  cfg.validate();
  q.validate("w2_squared");
  const auto qq = detail::solve_entropic(detail::squared_cost(q.points, q.points), q.weights, q.weights, cfg);
  if (!qq.converged) throw ConvergenceError("sinkhorn-self", qq.residual, qq.iterations);
  return {qq.value, qq.residual};
}

inline SinkhornValueAndGrad sinkhorn_value_and_grad(const PointCloud& p, const PointCloud& q,
                                                    const SinkhornConfig& cfg,
                                                    const SelfTerm* q_self = nullptr) {
  cfg.validate();
  p.validate("w2_squared");
  q.validate("w2_squared");
  if (p.dim() != q.dim())
    throw Error("wasserstein", "w2_squared",
                "dimension mismatch (" + std::to_string(p.dim()) + " vs " +
                    std::to_string(q.dim()) + ")");

  SinkhornValueAndGrad out;
  const Matrix cxy = detail::squared_cost(p.points, q.points);
  auto pq = detail::solve_entropic(cxy, p.weights, q.weights, cfg);
  if (!pq.converged) throw ConvergenceError("sinkhorn", pq.residual, pq.iterations);

  out.grad = Matrix(p.size(), p.dim());
  detail::add_plan_gradient(pq.plan, p.points, q.points, 1.0, out.grad);

  auto& r = out.result;
  r.cost = pq.value;
  for (std::size_t i = 0; i < cxy.rows(); ++i)
    for (std::size_t j = 0; j < cxy.cols(); ++j) r.transport_cost += pq.plan(i, j) * cxy(i, j);
  r.residual = pq.residual;
  r.iterations = pq.iterations;

  if (cfg.debiased) {
    const auto pp = detail::solve_entropic(detail::squared_cost(p.points, p.points), p.weights,
                                           p.weights, cfg);
    if (!pp.converged) throw ConvergenceError("sinkhorn-self", pp.residual, pp.iterations);
    const SelfTerm qq = q_self ? *q_self : self_term(q, cfg);
    r.cost -= 0.5 * (pp.value + qq.value);
    // OT(P,P) depends on x through both arguments; halving cancels the factor 2.
    detail::add_plan_gradient(pp.plan, p.points, p.points, -1.0, out.grad);
    r.residual = std::max({r.residual, pp.residual, qq.residual});
  }
  r.plan = std::move(pq.plan);
  r.f = std::move(pq.f);
  r.g = std::move(pq.g);
  return out;
}

inline TransportPlanResult w2_squared(const PointCloud& p, const PointCloud& q,
                                      const SinkhornConfig& cfg = {}) {
  return sinkhorn_value_and_grad(p, q, cfg).result;
}

inline Matrix grad_wrt_source(const PointCloud& p, const PointCloud& q,
                              const SinkhornConfig& cfg = {}) {
  return sinkhorn_value_and_grad(p, q, cfg).grad;
}

// Exact W2^2 between equal-size uniform clouds via optimal assignment.
inline double w2_squared_exact(const PointCloud& p, const PointCloud& q) {
  const std::size_t n = p.size();
  if (n != q.size()) throw Error("wasserstein", "w2_squared_exact", "clouds must have equal size");
  if (n == 0 || n > 512) throw Error("wasserstein", "w2_squared_exact", "size must be in [1, 512]");
  if (p.dim() != q.dim()) throw Error("wasserstein", "w2_squared_exact", "dimension mismatch");
  const double u = 1.0 / static_cast<double>(n);
  for (const auto* pc : {&p, &q})
    for (double w : pc->weights)
      if (std::abs(w - u) > 1e-12)
        throw Error("wasserstein", "w2_squared_exact", "weights must be uniform");
  const auto sol = solve_assignment(detail::squared_cost(p.points, q.points));
  return sol.cost / static_cast<double>(n);
}

}  // namespace gse
