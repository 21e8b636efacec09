#include "sdar/solver.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <string>

#include "sdar/errors.hpp"

namespace sdar {

namespace {

double stationary_residual(const Eigen::MatrixXd& p, const Eigen::RowVectorXd& pi) {
  return (pi * p - pi).cwiseAbs().maxCoeff();
}

Eigen::RowVectorXd power_iteration(const Eigen::MatrixXd& p, double tol, int max_iter) {
  const int n = static_cast<int>(p.rows());
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Constant(n, 1.0 / n);
  for (int it = 0; it < max_iter; ++it) {
    Eigen::RowVectorXd next = v * p;
    next /= next.sum();
    const double delta = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (delta < tol) return v;
  }
  throw SingularSystem("stationary_distribution: power-iteration fallback did not converge");
}

// Strong connectivity of the positive-entry transition graph: forward and
// backward reachability from state 0 must each cover every state. A finite
// irreducible chain has a unique stationary vector; anything else is rejected.
bool strongly_connected(const Eigen::MatrixXd& p) {
  const int n = static_cast<int>(p.rows());
  for (const bool forward : {true, false}) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        const double w = forward ? p(u, v) : p(v, u);
        if (w > 0.0 && !seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    if (count != n) return false;
  }
  return true;
}

}  // namespace

StationaryDist stationary_distribution(const ReducedTPM& tpm) {
  const int dim = tpm.dim();
  if (!strongly_connected(tpm.p))
    throw SingularSystem(
        "stationary_distribution: chain is reducible (q or lambda at zero?)");

  // (P^T - I) x = 0 with the last equation replaced by sum(x) = 1
  Eigen::MatrixXd a = tpm.p.transpose() - Eigen::MatrixXd::Identity(dim, dim);
  a.row(dim - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  rhs(dim - 1) = 1.0;
  Eigen::RowVectorXd pi = Eigen::PartialPivLU<Eigen::MatrixXd>(a).solve(rhs).transpose();

  bool ok = pi.allFinite();
  if (ok) {
    for (int i = 0; i < dim; ++i) {
      if (pi(i) < -1e-12) { ok = false; break; }
      if (pi(i) < 0.0) pi(i) = 0.0;  // rounding on barely-reachable states
    }
  }
  if (ok) {
    pi /= pi.sum();
    ok = stationary_residual(tpm.p, pi) <= 1e-10;
  }
  if (!ok) pi = power_iteration(tpm.p, 1e-14, 200000);

  const double residual = stationary_residual(tpm.p, pi);
  if (!(residual <= 1e-10))
    throw SingularSystem("stationary_distribution: residual " + std::to_string(residual) +
                         " (reducible chain? q or lambda at zero)");

  StationaryDist out;
  out.pi = Eigen::MatrixXd(tpm.k_buf + 1, tpm.m);
  for (int level = 0; level <= tpm.k_buf; ++level)
    for (int k = 0; k < tpm.m; ++k) out.pi(level, k) = pi(tpm.index(level, k));
  out.residual = residual;
  return out;
}

QVector update_q(const StationaryDist& pi, int k_buf, const QVector& previous,
                 double den_floor) {
  const int m = pi.m();
  if (previous.m() != m) throw ConfigError("update_q: previous q covers n = 1..M");
  QVector q = previous;
  for (int n = 1; n <= m; ++n) {
    double den = 0.0;
    for (int j = 1; j <= k_buf; ++j) den += pi.at(j, n - 1);
    if (den > den_floor) q.at(n) = pi.at(1, n - 1) / den;
  }
  return q;
}

SdarSolution solve_sdar_model(const Scenario& scenario, const AttemptProfile& profile,
                              const SolveOptions& options) {
  validate_scenario(scenario);
  if (!scenario.equal_rates())
    throw ConfigError("solve_sdar_model: analytical path requires equal lambda_i");
  if (!scenario.buffer.is_finite)
    throw ConfigError("solve_sdar_model: analytical path requires finite K");
  const double lambda = scenario.lambdas.front();
  if (!(lambda > 0.0))
    throw ConfigError("solve_sdar_model: analytical path requires lambda > 0");
  if (profile.m() < scenario.m)
    throw ConfigError("solve_sdar_model: profile does not cover n = 1..M");

  SdarSolution sol;
  sol.m = scenario.m;
  sol.k_buf = scenario.buffer.k;
  sol.lambda = lambda;
  sol.profile = profile;
  sol.slots = slot_durations_for(scenario);
  sol.pmfs = arrival_pmfs(lambda, sol.slots, sol.k_buf + options.pmf_margin);
  sol.stp = slot_type_probs(profile, sol.m);

  const BlockSet blocks =
      block_matrices(sol.m, sol.pmfs, sol.stp, std::max(0, sol.k_buf - 1));

  QVector q = QVector::constant(sol.m, 0.5);
  sol.report.q_history.push_back(q);

  for (int it = 1; it <= options.max_iterations; ++it) {
    const ReducedTPM tpm = assemble_tpm(blocks, q, sol.k_buf);
    sol.pi = stationary_distribution(tpm);
    QVector next = update_q(sol.pi, sol.k_buf, q, options.den_floor);
    if (options.relaxation != 1.0) {
      for (int n = 1; n <= sol.m; ++n)
        next.at(n) = q.at(n) + options.relaxation * (next.at(n) - q.at(n));
    }
    double delta = 0.0;
    for (int n = 1; n <= sol.m; ++n)
      delta = std::max(delta, std::abs(next.at(n) - q.at(n)));
    q = next;
    sol.report.iterations = it;
    sol.report.q_history.push_back(q);
    sol.report.residuals.push_back(delta);
    if (delta < options.q_tol) {
      sol.report.converged = true;
      break;
    }
  }
  // non-convergence is reported, not thrown: the caller gets the full
  // history and the last iterate
  sol.q = q;
  return sol;
}

}  // namespace sdar
