#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "grpolab/env.hpp"
#include "grpolab/policy.hpp"

namespace grpolab {

struct GroupSample {
  int prompt_id = 0;
  std::vector<TokenSeq> outputs;
  std::vector<double> rewards;
  int size() const { return static_cast<int>(outputs.size()); }
};

struct GroupBatch {
  std::vector<GroupSample> groups;
  std::uint64_t snapshot_id = 0;  // identifies the generating policy snapshot
  int size() const { return static_cast<int>(groups.size()); }
};

struct BaselineKind {
  enum class Tag { kVanilla, kLeaveOneOut, kOracleValue, kCustom };
  Tag tag = Tag::kVanilla;
  std::map<int, double> custom;  // prompt id -> baseline, total over env prompts

  static BaselineKind vanilla() { return {Tag::kVanilla, {}}; }
  static BaselineKind leave_one_out() { return {Tag::kLeaveOneOut, {}}; }
  static BaselineKind oracle_value() { return {Tag::kOracleValue, {}}; }
  static BaselineKind custom_of_prompt(std::map<int, double> map) {
    return {Tag::kCustom, std::move(map)};
  }
  std::string name() const;
};

struct GradientEstimate {
  std::vector<double> vector;
  std::string estimator;
  int B = 0;
  int G = 0;
  std::uint64_t seed = 0;
  std::string to_json() const;
};

std::uint64_t params_snapshot_id(const PolicyParams& p);

GroupBatch collect_batch(const PolicyParams& p, const Environment& env, int B, int G, Rng& rng);

// entry g of the leave-one-out group means; requires G >= 2
std::vector<double> leave_one_out_means(const std::vector<double>& rewards);

GradientEstimate estimate_gradient_meta(const PolicyParams& p, const Environment& env,
                                        const GroupBatch& batch, const BaselineKind& baseline);

struct EpsPolicy {
  double eps_se = 0.0;  // 0: zero advantages when the group std error vanishes
};

// normalized advantages: (z_g - leave-one-out mean) / group standard error
std::vector<double> advantage_normalized(const std::vector<double>& rewards,
                                         const EpsPolicy& eps = {});

struct PracticalOptions {
  double kappa = 0.0;
  double coverage_floor = 1e-9;  // minimum per-token probability (cur/old/ref)
  EpsPolicy eps;
};

// token-level estimator with importance ratios and the KL gradient term;
// batch must have been generated under p_old
GradientEstimate estimate_gradient_practical(const PolicyParams& p_cur,
                                             const PolicyParams& p_old,
                                             const PolicyParams& p_ref, const Environment& env,
                                             const GroupBatch& batch,
                                             const PracticalOptions& opts);

// whole-sequence K3 estimate of KL(p || p_ref); outputs must be sampled from p
double k3_kl_estimate(const PolicyParams& p, const PolicyParams& p_ref, const Environment& env,
                      const GroupBatch& batch);

}  // namespace grpolab
