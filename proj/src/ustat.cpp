#include "grpolab/ustat.hpp"

#include "grpolab/stats.hpp"
#include "json.hpp"

namespace grpolab {

std::string HoeffdingParts::to_json() const {
  nlohmann::json j;
  j["h0"] = h0;
  j["first_order"] = first_order;
  j["second_order"] = second_order;
  j["h0_sq_norm"] = norm2(h0);
  j["first_order_sq_norm"] = norm2(first_order);
  j["second_order_sq_norm"] = norm2(second_order);
  return j.dump();
}

std::vector<double> kernel_h(const PolicyParams& p, const Environment& env, int prompt_id,
                             const std::pair<TokenSeq, double>& yi,
                             const std::pair<TokenSeq, double>& yj) {
  const int prompt_idx = env.prompt_index(prompt_id);
  const std::vector<double> probs = softmax_table(p, prompt_idx);
  std::vector<double> h(static_cast<std::size_t>(p.dim()), 0.0);
  const double dz = 0.5 * (yi.second - yj.second);
  if (dz == 0.0) return h;
  add_score(*p.shape, probs, prompt_idx, env.output_index(yi.first), dz, h.data());
  add_score(*p.shape, probs, prompt_idx, env.output_index(yj.first), -dz, h.data());
  return h;
}

std::vector<double> ustat_average(const PolicyParams& p, const Environment& env,
                                  const GroupSample& group) {
  const int G = group.size();
  if (G < 2) throw RejectionError("ustat_average: needs G >= 2");
  const int prompt_idx = env.prompt_index(group.prompt_id);
  const std::vector<double> probs = softmax_table(p, prompt_idx);
  std::vector<double> acc(static_cast<std::size_t>(p.dim()), 0.0);
  const double pair_count = static_cast<double>(G) * static_cast<double>(G - 1) / 2.0;
  for (int i = 0; i < G; ++i) {
    for (int j = i + 1; j < G; ++j) {
      const double dz = 0.5 *
                        (group.rewards[static_cast<std::size_t>(i)] -
                         group.rewards[static_cast<std::size_t>(j)]) /
                        pair_count;
      if (dz == 0.0) continue;
      add_score(*p.shape, probs, prompt_idx, env.output_index(group.outputs[static_cast<std::size_t>(i)]),
                dz, acc.data());
      add_score(*p.shape, probs, prompt_idx, env.output_index(group.outputs[static_cast<std::size_t>(j)]),
                -dz, acc.data());
    }
  }
  return acc;
}

HoeffdingParts hoeffding_decompose(const PolicyParams& p, const Environment& env,
                                   const GroupSample& group) {
  const int G = group.size();
  if (G < 2) throw RejectionError("hoeffding_decompose: needs G >= 2");
  const int prompt_idx = env.prompt_index(group.prompt_id);
  const std::vector<double> probs = softmax_table(p, prompt_idx);

  HoeffdingParts parts;
  parts.h0 = exact_gradient_prompt(p, env, prompt_idx);
  const double v = value_exact(p, env, group.prompt_id);

  // first order: (2/G) sum_g [h1 - h0] = oracle estimator minus h0
  parts.first_order.assign(static_cast<std::size_t>(p.dim()), 0.0);
  for (int g = 0; g < G; ++g) {
    const double coeff = (group.rewards[static_cast<std::size_t>(g)] - v) / static_cast<double>(G);
    add_score(*p.shape, probs, prompt_idx,
              env.output_index(group.outputs[static_cast<std::size_t>(g)]), coeff,
              parts.first_order.data());
  }
  axpy(-1.0, parts.h0, parts.first_order);

  parts.second_order = ustat_average(p, env, group);
  axpy(-1.0, parts.h0, parts.second_order);
  axpy(-1.0, parts.first_order, parts.second_order);
  return parts;
}

}  // namespace grpolab
