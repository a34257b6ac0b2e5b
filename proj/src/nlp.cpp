#include "riskplan/nlp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCore>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "riskplan/errors.hpp"

namespace riskplan::nlp {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

VectorXd project(const VectorXd& y, const VectorXd& lo, const VectorXd& hi) { return y.cwiseMax(lo).cwiseMin(hi); }

double projected_gradient_norm(const VectorXd& y, const VectorXd& g, const VectorXd& lo, const VectorXd& hi) {
  if (y.size() == 0) return 0.0;
  return (project(y - g, lo, hi) - y).cwiseAbs().maxCoeff();
}

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }
double pos_part_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : std::max(0.0, v.maxCoeff()); }

/// Value and gradient, plus the Gauss-Newton curvature of the penalty terms
/// at the most recently evaluated point.
struct InnerFunction {
  std::function<double(const VectorXd&, VectorXd&)> value;
  std::function<MatrixXd()> penalty_curvature;
};

struct InnerResult {
  VectorXd y;
  double value = 0.0;
  VectorXd grad;
  double pg_norm = 0.0;
  int iterations = 0;
};

/// Damped BFGS update keeping `b` positive definite.
void damped_bfgs(MatrixXd& b, const VectorXd& s, VectorXd r) {
  const VectorXd bs = b * s;
  const double sbs = s.dot(bs);
  if (!(sbs > 1e-300)) return;
  double sr = s.dot(r);
  if (sr < 0.2 * sbs) {
    const double theta = 0.8 * sbs / (sbs - sr);
    r = theta * r + (1.0 - theta) * bs;
    sr = s.dot(r);
  }
  if (!(sr > 1e-300)) return;
  b += r * r.transpose() / sr - bs * bs.transpose() / sbs;
}

/// Projected quasi-Newton on a box. The model Hessian is B plus the penalty
/// curvature; B learns the remaining curvature from secant pairs. Variables
/// at a bound whose gradient points outward are held fixed for the step.
InnerResult minimize_box(const InnerFunction& fun, VectorXd y, const VectorXd& lo, const VectorXd& hi, MatrixXd& b,
                         double tol, int max_iter, std::vector<double>* trace) {
  InnerResult r;
  const Eigen::Index n = y.size();
  y = project(y, lo, hi);
  VectorXd g(n);
  double f = fun.value(y, g);
  MatrixXd pc = fun.penalty_curvature ? fun.penalty_curvature() : MatrixXd::Zero(n, n);
  if (trace) trace->push_back(f);
  int stall = 0;
  bool reset = false;
  int it = 0;
  for (; it < max_iter; ++it) {
    if (projected_gradient_norm(y, g, lo, hi) <= tol) break;
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = y[i] <= lo[i] && g[i] > 0.0;
      const bool at_hi = y[i] >= hi[i] && g[i] < 0.0;
      if (!(at_lo || at_hi)) free.push_back(i);
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    MatrixXd h(nf, nf);
    VectorXd gf(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      gf[a] = g[free[a]];
      for (Eigen::Index c = 0; c < nf; ++c) h(a, c) = b(free[a], free[c]) + pc(free[a], free[c]);
    }
    VectorXd d = VectorXd::Zero(n);
    double shift = 0.0;
    const double diag = std::max(1e-12, h.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; attempt < 20; ++attempt) {
      Eigen::LLT<MatrixXd> llt(h + shift * MatrixXd::Identity(nf, nf));
      if (llt.info() == Eigen::Success) {
        const VectorXd df = llt.solve(-gf);
        if (df.allFinite()) {
          for (Eigen::Index a = 0; a < nf; ++a) d[free[a]] = df[a];
          break;
        }
      }
      shift = shift == 0.0 ? 1e-10 * diag : 10.0 * shift;
    }
    if (!(g.dot(d) < 0.0)) {
      d = VectorXd::Zero(n);
      for (Eigen::Index i : free) d[i] = -g[i];
    }
    double t = 1.0;
    VectorXd y_new, g_new(n);
    double f_new = kInf;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      y_new = project(y + t * d, lo, hi);
      const double decrease = g.dot(y_new - y);
      if (decrease < 0.0) {
        f_new = fun.value(y_new, g_new);
        if (std::isfinite(f_new) && f_new <= f + 1e-4 * decrease) {
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!accepted) {
      // Reset the learned curvature once before giving up.
      if (reset) break;
      b = MatrixXd::Identity(n, n) * std::max(1e-8, b.diagonal().mean());
      reset = true;
      continue;
    }
    reset = false;
    MatrixXd pc_new = fun.penalty_curvature ? fun.penalty_curvature() : MatrixXd::Zero(n, n);
    const VectorXd s = y_new - y;
    damped_bfgs(b, s, g_new - g - pc_new * s);
    stall = (f - f_new <= 1e-15 * (1.0 + std::abs(f))) ? stall + 1 : 0;
    y = std::move(y_new);
    g = g_new;
    f = f_new;
    pc = std::move(pc_new);
    if (trace) trace->push_back(f);
    if (stall >= 5) break;
  }
  r.y = std::move(y);
  r.value = f;
  r.pg_norm = projected_gradient_norm(r.y, g, lo, hi);
  r.grad = std::move(g);
  r.iterations = it;
  return r;
}

struct ScaledProblem {
  const NlpProblem& p;
  VectorXd dx;
  VectorXd inv_eq;
  VectorXd inv_ineq;
  double fs = 1.0;
  VectorXd lo;
  VectorXd hi;

  ScaledProblem(const NlpProblem& problem, const SolverOptions& o) : p(problem) {
    dx = o.x_scale.size() ? o.x_scale : VectorXd::Ones(p.n_vars);
    inv_eq = o.eq_scale.size() ? VectorXd(o.eq_scale.cwiseInverse()) : VectorXd::Ones(p.n_eq);
    inv_ineq = o.ineq_scale.size() ? VectorXd(o.ineq_scale.cwiseInverse()) : VectorXd::Ones(p.n_ineq);
    fs = o.objective_scale;
    if (dx.size() != p.n_vars || inv_eq.size() != p.n_eq || inv_ineq.size() != p.n_ineq) {
      throw InvalidInput("solver: scaling vectors do not match the problem dimensions");
    }
    if (!(dx.array() > 0.0).all() || !(inv_eq.array() > 0.0).all() || !(inv_ineq.array() > 0.0).all() ||
        !(fs > 0.0)) {
      throw InvalidInput("solver: scales must be positive");
    }
    lo = p.lower.cwiseQuotient(dx);
    hi = p.upper.cwiseQuotient(dx);
  }

  VectorXd to_x(const VectorXd& y) const { return dx.cwiseProduct(y); }
  VectorXd to_y(const VectorXd& x) const { return x.cwiseQuotient(dx); }
};

}  // namespace

const char* to_string(Status s) {
  switch (s) {
    case Status::Converged: return "Converged";
    case Status::Infeasible: return "Infeasible";
    case Status::IterLimit: return "IterLimit";
  }
  return "Unknown";
}

void NlpProblem::validate() const {
  if (n_vars < 1) throw InvalidInput("nlp: n_vars must be >= 1");
  if (n_eq < 0 || n_ineq < 0) throw InvalidInput("nlp: constraint counts must be >= 0");
  if (lower.size() != n_vars || upper.size() != n_vars || x0.size() != n_vars) {
    throw InvalidInput("nlp: bounds and initial point must have n_vars entries");
  }
  if (!evaluate) throw InvalidInput("nlp: missing evaluator");
  for (int i = 0; i < n_vars; ++i) {
    if (!(lower[i] <= upper[i])) throw InvalidInput("nlp: lower bound exceeds upper bound at " + std::to_string(i));
  }
  Evaluation ev;
  evaluate(x0, true, ev);
  if (ev.gradient.size() != n_vars || ev.eq.size() != n_eq || ev.ineq.size() != n_ineq ||
      ev.eq_jac.rows() != n_eq || ev.eq_jac.cols() != n_vars || ev.ineq_jac.rows() != n_ineq ||
      ev.ineq_jac.cols() != n_vars) {
    throw InvalidInput("nlp: evaluator output shapes do not match the declared dimensions");
  }
  if (!std::isfinite(ev.objective) || !ev.gradient.allFinite() || !ev.eq.allFinite() || !ev.ineq.allFinite()) {
    throw InvalidInput("nlp: evaluator output is not finite at the initial point");
  }
}

SolveReport solve(const NlpProblem& problem, const SolverOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  problem.validate();
  const ScaledProblem sp(problem, options);
  SolveReport report;

  VectorXd lam = VectorXd::Zero(problem.n_eq);
  VectorXd mu = VectorXd::Zero(problem.n_ineq);
  double rho = options.rho0;
  constexpr double kMultMax = 1e10;

  Evaluation ev;
  VectorXd last_gs;
  auto eval_scaled = [&](const VectorXd& y, VectorXd& hs, VectorXd& gs) {
    problem.evaluate(sp.to_x(y), true, ev);
    hs = ev.eq.cwiseProduct(sp.inv_eq);
    gs = ev.ineq.cwiseProduct(sp.inv_ineq);
    last_gs = gs;
  };

  auto merit = [&](const VectorXd& y, VectorXd& grad) {
    VectorXd hs, gs;
    eval_scaled(y, hs, gs);
    if (!std::isfinite(ev.objective) || !ev.eq.allFinite() || !ev.ineq.allFinite()) return kInf;
    const VectorXd eq_w = lam + rho * hs;
    const VectorXd in_w = (mu + rho * gs).cwiseMax(0.0);
    double value = sp.fs * ev.objective + lam.dot(hs) + 0.5 * rho * hs.squaredNorm() +
                   (in_w.squaredNorm() - mu.squaredNorm()) / (2.0 * rho);
    VectorXd gx = sp.fs * ev.gradient;
    if (problem.n_eq) gx += ev.eq_jac.transpose() * eq_w.cwiseProduct(sp.inv_eq);
    if (problem.n_ineq) gx += ev.ineq_jac.transpose() * in_w.cwiseProduct(sp.inv_ineq);
    grad = sp.dx.cwiseProduct(gx);
    return value;
  };

  auto infeasibility = [&](const VectorXd& y, VectorXd& grad) {
    VectorXd hs, gs;
    eval_scaled(y, hs, gs);
    const VectorXd gp = gs.cwiseMax(0.0);
    VectorXd gx = VectorXd::Zero(problem.n_vars);
    if (problem.n_eq) gx += ev.eq_jac.transpose() * hs.cwiseProduct(sp.inv_eq);
    if (problem.n_ineq) gx += ev.ineq_jac.transpose() * gp.cwiseProduct(sp.inv_ineq);
    grad = sp.dx.cwiseProduct(gx);
    return 0.5 * (hs.squaredNorm() + gp.squaredNorm());
  };

  // Gauss-Newton curvature of the penalty at the last evaluated point; rows
  // of inactive inequalities are dropped.
  auto penalty_curvature = [&](double weight, const VectorXd& shift) {
    VectorXd w_in = sp.inv_ineq;
    for (Eigen::Index k = 0; k < w_in.size(); ++k) {
      if (!(shift[k] + weight * last_gs[k] > 0.0)) w_in[k] = 0.0;
    }
    MatrixXd c = MatrixXd::Zero(problem.n_vars, problem.n_vars);
    if (problem.n_eq) {
      const SparseMatrix je = sp.inv_eq.asDiagonal() * ev.eq_jac * sp.dx.asDiagonal();
      c += MatrixXd(SparseMatrix(je.transpose() * je));
    }
    if (problem.n_ineq) {
      const SparseMatrix ji = w_in.asDiagonal() * ev.ineq_jac * sp.dx.asDiagonal();
      c += MatrixXd(SparseMatrix(ji.transpose() * ji));
    }
    return MatrixXd(weight * c);
  };

  const InnerFunction merit_fn{merit, [&] { return penalty_curvature(rho, mu); }};
  const InnerFunction restoration_fn{infeasibility,
                                     [&] { return penalty_curvature(1.0, VectorXd::Zero(problem.n_ineq)); }};
  MatrixXd b_merit = MatrixXd::Identity(problem.n_vars, problem.n_vars) * options.initial_curvature;

  auto physical_feasibility = [&](const VectorXd& y) {
    problem.evaluate(sp.to_x(y), false, ev);
    return std::max(inf_norm(ev.eq), pos_part_norm(ev.ineq));
  };

  auto restore = [&](const VectorXd& y0) {
    MatrixXd b = MatrixXd::Identity(problem.n_vars, problem.n_vars) * 1e-8;
    InnerResult r = minimize_box(restoration_fn, y0, sp.lo, sp.hi, b, 1e-14, 4 * options.max_inner, nullptr);
    report.inner_iterations += r.iterations;
    return r.y;
  };

  VectorXd y = project(sp.to_y(problem.x0), sp.lo, sp.hi);
  double omega = 1e-1;
  double v_prev = kInf;
  bool converged = false;
  bool infeasible = false;

  for (int outer = 1; outer <= options.max_outer; ++outer) {
    std::vector<double>* trace = nullptr;
    if (options.record_merit) trace = &report.merit_traces.emplace_back();
    const double inner_tol = std::max(0.1 * options.tol_kkt, omega);
    InnerResult r = minimize_box(merit_fn, y, sp.lo, sp.hi, b_merit, inner_tol, options.max_inner, trace);
    report.inner_iterations += r.iterations;
    y = r.y;
    report.outer_iterations = outer;

    VectorXd hs, gs;
    eval_scaled(y, hs, gs);
    const double v = std::max(inf_norm(hs), inf_norm(gs.cwiseMax(-mu / rho)));
    lam = (lam + rho * hs).cwiseMax(-kMultMax).cwiseMin(kMultMax);
    mu = (mu + rho * gs).cwiseMax(0.0).cwiseMin(kMultMax);

    // The Lagrangian gradient at the updated multipliers equals the augmented
    // Lagrangian gradient at the old ones.
    const double kkt = r.pg_norm;
    const double feas = std::max(inf_norm(ev.eq), pos_part_norm(ev.ineq));
    const double compl_ = problem.n_ineq ? mu.cwiseProduct(gs).cwiseAbs().maxCoeff() : 0.0;
    report.history.push_back({outer, ev.objective, feas, kkt});

    if (feas <= options.tol_feas && kkt <= options.tol_kkt && compl_ <= options.tol_kkt) {
      converged = true;
      break;
    }
    if (feas > options.tol_feas && v > 0.25 * v_prev) {
      if (rho >= options.rho_max) {
        const VectorXd y_rest = restore(y);
        if (physical_feasibility(y_rest) > options.tol_feas) {
          y = y_rest;
          infeasible = true;
          break;
        }
        y = y_rest;
      } else {
        rho = std::min(rho * options.rho_growth, options.rho_max);
      }
    }
    v_prev = v;
    omega = std::max(0.1 * options.tol_kkt, 0.1 * omega);
  }

  if (!converged && !infeasible) {
    const VectorXd y_rest = restore(y);
    if (physical_feasibility(y_rest) > options.tol_feas) {
      y = y_rest;
      infeasible = true;
    }
  }

  report.x = sp.to_x(y);
  problem.evaluate(report.x, true, ev);
  report.objective = ev.objective;
  report.eq_residual = inf_norm(ev.eq);
  report.ineq_violation = pos_part_norm(ev.ineq);
  VectorXd grad;
  merit(y, grad);
  report.kkt = projected_gradient_norm(y, grad, sp.lo, sp.hi);
  if (!report.history.empty() && converged) report.kkt = report.history.back().kkt;
  report.eq_multipliers = lam.cwiseProduct(sp.inv_eq);
  report.ineq_multipliers = mu.cwiseProduct(sp.inv_ineq);
  report.complementarity =
      problem.n_ineq ? report.ineq_multipliers.cwiseProduct(ev.ineq).cwiseAbs().maxCoeff() : 0.0;
  if (converged) {
    report.status = Status::Converged;
    report.message = "converged";
  } else if (infeasible) {
    report.status = Status::Infeasible;
    std::ostringstream msg;
    msg << "feasibility restoration stalled at violation " << report.feasibility();
    report.message = msg.str();
  } else {
    report.status = Status::IterLimit;
    report.message = "outer iteration limit reached";
  }
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void write_iteration_log(std::ostream& out, const SolveReport& report) {
  out << "iter,obj,feas,kkt\n";
  out.precision(10);
  for (const auto& r : report.history) out << r.iter << ',' << r.objective << ',' << r.feasibility << ',' << r.kkt << '\n';
}

DerivativeCheck check_derivatives(const NlpProblem& problem, const Eigen::VectorXd& x, double h) {
  DerivativeCheck out;
  Evaluation base, plus, minus;
  problem.evaluate(x, true, base);
  const Eigen::MatrixXd jh = Eigen::MatrixXd(base.eq_jac);
  const Eigen::MatrixXd jg = Eigen::MatrixXd(base.ineq_jac);
  auto record = [&](double a, double b, const std::string& where) {
    const double err = std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
    if (err > out.max_error) {
      out.max_error = err;
      out.where = where;
    }
  };
  VectorXd xp = x;
  for (int j = 0; j < problem.n_vars; ++j) {
    xp[j] = x[j] + h;
    problem.evaluate(xp, false, plus);
    xp[j] = x[j] - h;
    problem.evaluate(xp, false, minus);
    xp[j] = x[j];
    const std::string col = "var " + std::to_string(j);
    record(base.gradient[j], (plus.objective - minus.objective) / (2.0 * h), "objective, " + col);
    for (int i = 0; i < problem.n_eq; ++i) {
      record(jh(i, j), (plus.eq[i] - minus.eq[i]) / (2.0 * h), "eq " + std::to_string(i) + ", " + col);
    }
    for (int i = 0; i < problem.n_ineq; ++i) {
      record(jg(i, j), (plus.ineq[i] - minus.ineq[i]) / (2.0 * h), "ineq " + std::to_string(i) + ", " + col);
    }
  }
  return out;
}

}  // namespace riskplan::nlp
