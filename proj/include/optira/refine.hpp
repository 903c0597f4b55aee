#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "optira/convexify.hpp"
#include "optira/curvature.hpp"
#include "optira/sandbox.hpp"

namespace optira {

inline constexpr int kDefaultEclCap = 4;
inline constexpr int kDefaultFdcCap = 5;
inline constexpr double kDefaultEpsilon = 1e-6;
inline constexpr double kDefaultFdcGamma = 0.25;
inline constexpr double kIntegralityTolerance = 1e-6;

// ---- feasibility ---------------------------------------------------------

struct Residual {
  std::string id;  // "g0", "h1", "bound:p", "integer:n"
  double value = 0.0;
  bool pass = false;
};

struct FeasibilityResult {
  int V = 0;
  std::vector<Residual> residuals;
  double epsilon = kDefaultEpsilon;
  std::string reason;  // set when evaluation failed
};

nlohmann::json to_json(const FeasibilityResult& f);

/// Checks x against the original constraints, variable bounds and
/// integrality. Inequality residual is g(x), equality residual |h(x)|, bound
/// residual the distance outside the box.
FeasibilityResult validate_feasibility(const StandardForm& original, const Eigen::VectorXd& x,
                                       double epsilon = kDefaultEpsilon);

// ---- error correction loop -----------------------------------------------

struct EclEntry {
  int k = 0;
  ErrorReport report;
  std::string repair;
  GeneratedCode code;
  int Q = 0;
};

struct EclState {
  int k = 0;
  int K = kDefaultEclCap;
  std::vector<EclEntry> history;
};

nlohmann::json to_json(const EclState& s);

struct EclResult {
  ExecutionOutcome outcome;
  GeneratedCode code;
  EclState state;
};

/// Repairs failing code until it runs or K repairs were executed.
/// Throws std::invalid_argument when called with Q = 1 or K < 1.
EclResult run_ecl(const ExecutionOutcome& outcome, const GeneratedCode& code,
                  Conversation* conversation, int K, const ExecutionContext& ctx);

// ---- feasibility domain correction ---------------------------------------

enum class FdcStage { Adjust, Reanalyze };

std::string_view to_string(FdcStage s);

/// adjust iff l <= floor(L/2), reanalyze for floor(L/2) < l <= L.
FdcStage fdc_stage(int l, int L);

struct FdcEntry {
  int l = 0;
  FdcStage stage = FdcStage::Adjust;
  std::string strategy;
  Eigen::VectorXd x0;
  int V = 0;
  std::string note;
};

struct FdcState {
  int l = 0;
  int L = kDefaultFdcCap;
  FdcStage stage = FdcStage::Adjust;
  double gamma = kDefaultFdcGamma;
  Eigen::VectorXd delta_x;
  Eigen::VectorXd x0;
  std::vector<FdcEntry> history;
};

nlohmann::json to_json(const FdcState& s);

/// Re-solves on behalf of FDC. A failed attempt returns nullopt with a note.
class FdcResolver {
 public:
  virtual ~FdcResolver() = default;
  virtual std::optional<Solution> adjust(const Eigen::VectorXd& x0, std::string& note) = 0;
  virtual std::optional<Solution> reanalyze(const Strategy& strategy, const Eigen::VectorXd& x0,
                                            std::string& note) = 0;
};

struct FdcResult {
  std::optional<Solution> solution;  // present iff feasible
  FeasibilityResult feasibility;
  FdcState state;
};

/// Direction from x* towards the box center; zero along unbounded coordinates.
Eigen::VectorXd default_delta(const StandardForm& original, const Eigen::VectorXd& x_star);

/// Two-stage repair of an infeasible first solution. The start point begins
/// at x* and moves by gamma * delta_x per adjust iteration.
/// Throws std::invalid_argument when the first solution is already feasible.
FdcResult run_fdc(const StandardForm& original, const ConvexityReport& report,
                  const Solution& first_solution, int L, double gamma,
                  const std::optional<Eigen::VectorXd>& delta_x, FdcResolver& resolver,
                  double epsilon = kDefaultEpsilon);

}  // namespace optira
