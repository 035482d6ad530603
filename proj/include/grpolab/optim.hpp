#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "grpolab/grad.hpp"

namespace grpolab {

struct LrSchedule {
  enum class Kind { kConstant, kInverseIter };
  Kind kind = Kind::kConstant;
  double beta = 0.1;

  // learning rate used by the update of outer iteration i (0-based): eta_{i+1}
  double rate(int iter) const {
    return kind == Kind::kConstant ? beta : beta / static_cast<double>(iter + 1);
  }
};

struct PracticalConfig {
  double kappa = 0.0;
  int m = 1;  // minibatch count; must divide B
  double coverage_floor = 1e-9;
};

struct TrainConfig {
  int B = 1;
  int G = 2;
  int n = 100;
  LrSchedule schedule;
  BaselineKind baseline = BaselineKind::leave_one_out();
  std::optional<PracticalConfig> practical;
  std::uint64_t seed = 0;
  double box_radius = 30.0;  // projection onto [-R, R]^d after each update
  int record_stride = 1;
  int snapshot_stride = 0;  // 0: no parameter snapshots
};

struct TraceRow {
  int iter = 0;
  double objective = 0.0;
  double gap = 0.0;
  double grad_norm = 0.0;
  bool clipped = false;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  std::vector<std::pair<int, PolicyParams>> snapshots;
  PolicyParams final_params;
  bool diverged = false;
  int clip_count = 0;

  void save_csv(const std::string& path) const;
};

TrainTrace train_meta(const Environment& env, const PolicyParams& init, const TrainConfig& config,
                      Rng& rng);

// Algorithm-2 loop: one sampling pass per outer iteration under the frozen
// snapshot, then m sequential minibatch updates with importance ratios.
// The reference policy defaults to the initial parameters.
TrainTrace train_grpo_practical(const Environment& env, const PolicyParams& init,
                                const TrainConfig& config, Rng& rng,
                                const PolicyParams* reference = nullptr);

// J* - J(p) against the environment's deterministic-output optimum
double suboptimality_gap(const PolicyParams& p, const Environment& env);
double env_optimum(const Environment& env);

struct BoundParams {
  double mu = 0.0;      // PL constant
  double lipschitz = 0.0;
  double mse_bound = 0.0;  // uniform MSE bound M
  double beta = 0.0;
  double delta0 = 0.0;  // initial gap (also the envelope for the c branch)
};

struct Lemma2Bound {
  double value = 0.0;         // the dominating bound at iteration n
  double main_branch = 0.0;   // geometric-plus-floor (constant) or first branch (1/i)
  double c_branch = 0.0;      // measured c/n branch; 0 for the constant schedule
};

// finite-sample suboptimality bound; schedule constraints are enforced
Lemma2Bound lemma2_bound(const LrSchedule& schedule, const BoundParams& params, int n,
                         double epsilon = 0.1);

// Common surface for probe-based constant estimation: the tabular policy
// landscape over an environment, or a synthetic quadratic.
struct Landscape {
  std::int64_t dim = 0;
  std::function<std::vector<double>(const std::vector<double>&)> gradient;
  std::function<double(const std::vector<double>&)> gap;
};

Landscape env_landscape(const Environment& env, std::shared_ptr<const PolicyShape> shape);

struct SmoothnessPl {
  double lipschitz = 0.0;  // max over probe pairs of ||g1 - g2|| / ||t1 - t2||
  double mu = 0.0;         // min over admissible probes of ||g||^2 / (2 gap)
  int admissible_probes = 0;
};

SmoothnessPl estimate_smoothness_and_pl(const Landscape& landscape,
                                        const std::vector<std::vector<double>>& probes,
                                        double gap_floor = 1e-6);

}  // namespace grpolab
