#include "grpolab/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "grpolab/rng.hpp"
#include "json.hpp"

namespace grpolab {

namespace {

void validate_spec(const EnvSpec& spec) {
  if (spec.alphabet_size < 2) throw ValidationError("env: alphabet size must be >= 2");
  if (spec.eos_id < 0 || spec.eos_id >= spec.alphabet_size)
    throw ValidationError("env: eos id must lie inside the alphabet");
  if (spec.max_len < 1) throw ValidationError("env: max_len must be >= 1");
  if (spec.prompts.empty()) throw ValidationError("env: at least one prompt required");
  if (!(spec.z_max > 0.0) || !std::isfinite(spec.z_max))
    throw ValidationError("env: z_max must be positive and finite");
  double total = 0.0;
  for (const auto& p : spec.prompts) {
    if (!(p.weight > 0.0)) throw ValidationError("env: prompt weights must be positive");
    total += p.weight;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw ValidationError("env: prompt weights must sum to 1 within 1e-12");
  std::vector<int> ids;
  for (const auto& p : spec.prompts) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw ValidationError("env: prompt ids must be unique");
}

// cap guard quotes the product bound alphabet^max_len
void check_enumeration_cap(const EnvSpec& spec) {
  const double bound =
      static_cast<double>(spec.max_len) * std::log(static_cast<double>(spec.alphabet_size));
  if (bound > std::log(static_cast<double>(spec.enumeration_cap)) + 1e-12) {
    std::ostringstream msg;
    msg << "env: enumeration cap exceeded: " << spec.alphabet_size << "^" << spec.max_len << " = "
        << std::exp(bound) << " sequences > cap " << spec.enumeration_cap;
    throw RejectionError(msg.str());
  }
}

}  // namespace

TokenSeq match_target_sequence(const EnvSpec& spec, int prompt_position) {
  std::vector<int> content;
  for (int t = 0; t < spec.alphabet_size; ++t)
    if (t != spec.eos_id) content.push_back(t);
  TokenSeq target;
  if (spec.max_len >= 2) {
    const int n_lengths = spec.max_len - 1;
    const int len = 1 + prompt_position % n_lengths;
    const int tok = content[static_cast<std::size_t>(prompt_position) % content.size()];
    target.assign(static_cast<std::size_t>(len), tok);
  }
  target.push_back(spec.eos_id);
  return target;
}

Environment Environment::build(const EnvSpec& spec) {
  validate_spec(spec);
  check_enumeration_cap(spec);

  Environment env;
  env.spec_ = spec;
  env.alphabet_ = TokenAlphabet{spec.alphabet_size, spec.eos_id};
  env.prompts_ = spec.prompts;
  env.max_len_ = spec.max_len;
  env.z_max_ = spec.z_max;

  for (int t = 0; t < spec.alphabet_size; ++t)
    if (t != spec.eos_id) env.content_tokens_.push_back(t);

  // enumerate (c_1..c_k, eos), k = 0..max_len-1, by length then lexicographic
  const int n_content = static_cast<int>(env.content_tokens_.size());
  std::vector<TokenSeq> prefixes{{}};
  for (int k = 0; k <= spec.max_len - 1; ++k) {
    for (const auto& prefix : prefixes) {
      TokenSeq seq = prefix;
      seq.push_back(spec.eos_id);
      env.outputs_.sequences.push_back(std::move(seq));
    }
    if (k == spec.max_len - 1) break;
    std::vector<TokenSeq> next;
    next.reserve(prefixes.size() * static_cast<std::size_t>(n_content));
    for (const auto& prefix : prefixes) {
      for (int c : env.content_tokens_) {
        TokenSeq longer = prefix;
        longer.push_back(c);
        next.push_back(std::move(longer));
      }
    }
    prefixes = std::move(next);
  }

  int min_id = env.prompts_.front().id;
  int max_id = min_id;
  for (const auto& p : env.prompts_) {
    min_id = std::min(min_id, p.id);
    max_id = std::max(max_id, p.id);
  }
  env.min_prompt_id_ = min_id;
  env.prompt_index_of_id_.assign(static_cast<std::size_t>(max_id - min_id + 1), -1);
  for (std::size_t i = 0; i < env.prompts_.size(); ++i)
    env.prompt_index_of_id_[static_cast<std::size_t>(env.prompts_[i].id - min_id)] =
        static_cast<int>(i);

  // freeze the reward table
  env.rewards_.assign(env.prompts_.size(),
                      std::vector<double>(env.outputs_.sequences.size(), 0.0));
  if (spec.reward_rule == RewardRule::kMatchTarget) {
    if (spec.z_max < 1.0) throw ValidationError("env: match-target needs z_max >= 1");
    for (std::size_t p = 0; p < env.prompts_.size(); ++p) {
      const TokenSeq target = match_target_sequence(spec, static_cast<int>(p));
      for (std::size_t o = 0; o < env.outputs_.sequences.size(); ++o)
        env.rewards_[p][o] = env.outputs_.sequences[o] == target ? 1.0 : 0.0;
    }
  } else {
    Rng rng(spec.reward_seed);
    for (auto& row : env.rewards_)
      for (auto& r : row) r = rng.uniform01() * spec.z_max;
  }
  return env;
}

int Environment::prompt_index(int prompt_id) const {
  const int off = prompt_id - min_prompt_id_;
  if (off < 0 || off >= static_cast<int>(prompt_index_of_id_.size()) ||
      prompt_index_of_id_[static_cast<std::size_t>(off)] < 0)
    throw RejectionError("env: unknown prompt id " + std::to_string(prompt_id));
  return prompt_index_of_id_[static_cast<std::size_t>(off)];
}

int Environment::content_rank(int token) const {
  if (token < 0 || token >= alphabet_.size || token == alphabet_.eos_id)
    throw RejectionError("env: token " + std::to_string(token) + " is not a content token");
  return token < alphabet_.eos_id ? token : token - 1;
}

int Environment::output_index(const TokenSeq& y) const {
  // sequences are ordered by content length; index arithmetic on the prefix tree
  if (y.empty() || y.back() != alphabet_.eos_id)
    throw RejectionError("env: output must terminate with eos");
  const int k = static_cast<int>(y.size()) - 1;
  if (k > max_len_ - 1) throw RejectionError("env: output exceeds the horizon");
  const int n_content = content_count();
  std::int64_t index = 0;
  std::int64_t level = 1;
  for (int j = 0; j < k; ++j) {
    index += level;
    level *= n_content;
  }
  std::int64_t offset = 0;
  for (int j = 0; j < k; ++j) {
    if (y[static_cast<std::size_t>(j)] == alphabet_.eos_id)
      throw RejectionError("env: eos may appear only at the end of an output");
    offset = offset * n_content + content_rank(y[static_cast<std::size_t>(j)]);
  }
  return static_cast<int>(index + offset);
}

double Environment::reward(int prompt_id, const TokenSeq& y) const {
  const int p = prompt_index(prompt_id);
  const int o = output_index(y);
  return rewards_[static_cast<std::size_t>(p)][static_cast<std::size_t>(o)];
}

double Environment::max_reward(int prompt_index) const {
  double best = 0.0;
  for (double r : rewards_[static_cast<std::size_t>(prompt_index)]) best = std::max(best, r);
  return best;
}

OutputSpace enumerate_outputs(const Environment& env) { return env.outputs(); }

EnvSpec env_spec_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("env spec: invalid JSON: ") + e.what());
  }
  EnvSpec spec;
  try {
    spec.alphabet_size = j.at("alphabet_size").get<int>();
    spec.eos_id = j.at("eos_id").get<int>();
    spec.max_len = j.at("max_len").get<int>();
    for (const auto& entry : j.at("prompts")) {
      PromptEntry p;
      if (entry.is_array()) {
        p.id = entry.at(0).get<int>();
        p.weight = entry.at(1).get<double>();
      } else {
        p.id = entry.at("id").get<int>();
        p.weight = entry.at("weight").get<double>();
      }
      spec.prompts.push_back(p);
    }
    const std::string rule = j.at("reward_rule").get<std::string>();
    if (rule == "match-target") {
      spec.reward_rule = RewardRule::kMatchTarget;
    } else if (rule == "bounded-random") {
      spec.reward_rule = RewardRule::kBoundedRandom;
    } else {
      throw ValidationError("env spec: unknown reward_rule '" + rule + "'");
    }
    spec.reward_seed = j.value("reward_seed", std::uint64_t{0});
    spec.z_max = j.value("z_max", 2.0);
    spec.enumeration_cap = j.value("enumeration_cap", std::int64_t{1'000'000});
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw ValidationError(std::string("env spec: ") + e.what());
  }
  return spec;
}

EnvSpec load_env_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("env spec: cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return env_spec_from_json_text(buf.str());
}

std::string env_spec_to_json_text(const EnvSpec& spec) {
  nlohmann::json j;
  j["alphabet_size"] = spec.alphabet_size;
  j["eos_id"] = spec.eos_id;
  j["max_len"] = spec.max_len;
  auto prompts = nlohmann::json::array();
  for (const auto& p : spec.prompts) prompts.push_back({p.id, p.weight});
  j["prompts"] = prompts;
  j["reward_rule"] =
      spec.reward_rule == RewardRule::kMatchTarget ? "match-target" : "bounded-random";
  j["reward_seed"] = spec.reward_seed;
  j["z_max"] = spec.z_max;
  j["enumeration_cap"] = spec.enumeration_cap;
  return j.dump(2);
}

}  // namespace grpolab
