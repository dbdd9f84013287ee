#pragma once

// Critical value, admissible-set scans and Aubry membership tests.

#include <optional>
#include <string>
#include <vector>

#include "wkam/action.hpp"

namespace wkam {

enum class CriticalValueMethod { discrete_subsolution, oracle };
const char* to_string(CriticalValueMethod method);

struct CriticalValueOptions {
  int x_points = 0;           // 0 selects 128 for N = 1 and 32 for N = 2
  double tolerance = 1e-3;    // width of the final alpha bracket
  int max_sweeps = 100000;
  double feasibility_drop = 1e-6;  // max u below -this certifies infeasibility
  double convergence = 1e-11;      // sweep change that counts as a fixed point
};

struct CriticalValueResult {
  double beta = 0.0;
  CriticalValueMethod method = CriticalValueMethod::discrete_subsolution;
  int x_points = 0;
  double tolerance = 0.0;
  double lower = 0.0;  // largest alpha found infeasible
  int sweeps = 0;      // over the whole bisection
  GridFunction certificate;
  /// max over nodes of (numerical H + coupling term) - beta for the certificate.
  double max_violation = 0.0;
};

/// Infimal alpha within `tolerance` for which the discrete system
///   G_i(x_k, D^- u_i, D^+ u_i) + sum_j a_ij u_j(x_k) <= alpha
/// has a solution, G the monotone (Godunov) numerical Hamiltonian. Feasibility
/// is decided by a decreasing Gauss-Seidel sweep from u = 0: the iterates keep
/// max u = 0 exactly when a subsolution exists and drift down otherwise.
CriticalValueResult critical_value(const HamiltonianSpec& h, const CouplingMatrixd& a,
                                   const CriticalValueOptions& options = {});

struct InfimumEstimate {
  double raw = 0.0;
  double clamped = 0.0;  // max(raw, 0)
  double std_error = 0.0;
  std::optional<CycleSpec> witness;
  std::size_t evaluations = 0;
  bool budget_exhausted = false;
};

/// Grid steps of closure needed for tau_total >> epsilon.
int closure_steps_for(double epsilon, double grid_step);

/// inf E_i[int (L + beta) ds - b_{w(0)} + b_{w(tau)}] over the search family
/// at y. The search's family must close with at least epsilon.
InfimumEstimate aubry_infimum(CycleSearch& search, double beta, int i, const Eigen::VectorXd& b);
/// inf E_a[int (L + beta) ds], a the characteristic vector of each tau.
InfimumEstimate aubry_infimum_characteristic(CycleSearch& search, double beta);

SearchOptions search_options_for(const SearchOptions& base, double epsilon, double grid_step);

struct ScanResult {
  Eigen::VectorXd direction;
  std::vector<double> s;
  std::vector<double> min_objective;  // over every evaluated cycle and index
  std::vector<bool> surviving;
  /// Maximal runs of surviving grid points, as [s_first, s_last].
  std::vector<std::pair<double, double>> intervals;
  double width = 0.0;  // widest interval
  double step = 0.0;
  bool truncated = false;  // an interval touches the end of the range
  std::size_t evaluations = 0;
  bool budget_exhausted = false;
  int refinements = 0;
};

struct ScanOptions {
  double s_min = -0.25;
  double s_max = 0.25;
  int steps = 101;
  double tolerance = 1e-3;
  int refinements = 3;
};

/// s-grid scan of b = s d at alpha = beta. Objectives are affine in b, so
/// every cycle evaluated by any admissibility search at y is reused for
/// every s; full searches run at s = 0, at the range ends and at the edges
/// of the surviving set until it stops shrinking.
ScanResult admissible_scan(CycleSearch& search, double beta, const Eigen::VectorXd& direction,
                           const ScanOptions& options = {});
Eigen::VectorXd default_direction(int m);

enum class Verdict { member, non_member, inconclusive };
const char* to_string(Verdict verdict);

struct VerdictOptions {
  double epsilon = 0.0;   // 0 selects 4 grid steps
  double member_tol = 1e-2;
  double interior_tol = 5e-2;
  double line_tol = 0.0;  // 0 selects 2 scan steps
  SearchOptions search;
  ScanOptions scan;
};

struct AubryReport {
  Eigen::VectorXd y;
  double epsilon = 0.0;
  double beta = 0.0;
  Eigen::VectorXd b;  // center of the widest surviving interval
  std::vector<InfimumEstimate> per_index;
  InfimumEstimate characteristic;
  ScanResult scan;
  Verdict verdict = Verdict::inconclusive;
  std::string reason;
  double member_tol = 0.0;
  double interior_tol = 0.0;
  double line_tol = 0.0;
  bool dichotomy_consistent = false;  // scan width matches the verdict
  std::string family;
  std::size_t budget = 0;
};

/// member: the characteristic infimum is at most member_tol. non_member:
/// every per-index infimum at the scanned b exceeds member_tol and the
/// surviving b-interval is wider than interior_tol. Otherwise inconclusive.
AubryReport aubry_verdict(const SystemInstance& instance, const Eigen::VectorXd& y, double beta,
                          const VerdictOptions& options = {});

struct Lemma55Report {
  std::vector<InfimumEstimate> per_index;
  InfimumEstimate characteristic;
  bool per_index_small = false;
  bool characteristic_small = false;
  bool agree = false;
  /// Glued stopping time tau = tau_i on D_i built from the per-index
  /// witnesses.
  double glued_characteristic = 0.0;
  double glued_combination = 0.0;  // sum_i a_i E_i[objective of witness i]
  double identity_residual = 0.0;  // |glued_characteristic - glued_combination|
  double witness_residual = 0.0;   // max_i |E_i glued - E_i witness_i|
  double max_per_index = 0.0;
  bool glued_bound = false;        // glued <= max per-index + 1e-9
  std::string glued_description;
};

Lemma55Report lemma55_equivalence(CycleSearch& search, double beta, const Eigen::VectorXd& b,
                                  double tolerance);

/// Characteristic infima over a list of base points, in parallel.
std::vector<InfimumEstimate> infimum_curve(const SystemInstance& instance,
                                           const std::vector<Eigen::VectorXd>& points,
                                           double beta, const SearchOptions& options, int jobs);

}  // namespace wkam
