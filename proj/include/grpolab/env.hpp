#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grpolab/errors.hpp"

namespace grpolab {

using TokenSeq = std::vector<int>;

struct TokenAlphabet {
  int size = 2;    // token count, end-of-sequence included
  int eos_id = 0;  // must be < size
};

struct PromptEntry {
  int id = 0;
  double weight = 1.0;
};

enum class RewardRule { kMatchTarget, kBoundedRandom };

// Declarative environment description.  Serialized as a JSON file with keys
// alphabet_size, eos_id, prompts ([id, weight] pairs), max_len, reward_rule,
// reward_seed, z_max.
struct EnvSpec {
  int alphabet_size = 2;
  int eos_id = 0;
  std::vector<PromptEntry> prompts;
  int max_len = 2;  // maximum total output length, terminating eos included
  RewardRule reward_rule = RewardRule::kMatchTarget;
  std::uint64_t reward_seed = 0;
  double z_max = 2.0;
  std::int64_t enumeration_cap = 1'000'000;
};

// Exhaustive list of terminating sequences, stable order (by length, then
// lexicographic in content-token rank).
struct OutputSpace {
  std::vector<TokenSeq> sequences;
};

// A fully materialized verifiable-reward environment.  Immutable after
// build; safe for concurrent reads.
//
// Generation convention: positions 1..max_len-1 sample freely over the
// alphabet and emitting eos terminates; a sequence that reaches max_len
// tokens ends in a forced eos.  Every output therefore has the form
// (c_1..c_k, eos) with content tokens c_i != eos and k <= max_len-1.
class Environment {
 public:
  static Environment build(const EnvSpec& spec);

  const TokenAlphabet& alphabet() const { return alphabet_; }
  const std::vector<PromptEntry>& prompts() const { return prompts_; }
  int max_len() const { return max_len_; }
  double z_max() const { return z_max_; }
  int prompt_count() const { return static_cast<int>(prompts_.size()); }
  int content_count() const { return alphabet_.size - 1; }

  // total lookup; throws RejectionError on any (x, y) outside the table
  double reward(int prompt_id, const TokenSeq& y) const;
  double reward_by_index(int prompt_index, int output_index) const {
    return rewards_[static_cast<std::size_t>(prompt_index)][static_cast<std::size_t>(output_index)];
  }

  const OutputSpace& outputs() const { return outputs_; }
  int output_count() const { return static_cast<int>(outputs_.sequences.size()); }

  int prompt_index(int prompt_id) const;           // throws on unknown id
  int output_index(const TokenSeq& y) const;       // throws on unknown sequence
  int content_rank(int token) const;               // rank among non-eos tokens
  int content_token(int rank) const { return content_tokens_[static_cast<std::size_t>(rank)]; }

  double max_reward(int prompt_index) const;       // sup over outputs

  const EnvSpec& spec() const { return spec_; }

 private:
  EnvSpec spec_;
  TokenAlphabet alphabet_;
  std::vector<PromptEntry> prompts_;
  int max_len_ = 0;
  double z_max_ = 0.0;
  OutputSpace outputs_;
  std::vector<std::vector<double>> rewards_;  // [prompt][output]
  std::vector<int> content_tokens_;
  std::vector<int> prompt_index_of_id_;       // dense map, offset by min id
  int min_prompt_id_ = 0;
};

OutputSpace enumerate_outputs(const Environment& env);

// target sequence of the built-in match-target rule for prompt position j
TokenSeq match_target_sequence(const EnvSpec& spec, int prompt_position);

EnvSpec env_spec_from_json_text(const std::string& text);
EnvSpec load_env_spec(const std::string& path);
std::string env_spec_to_json_text(const EnvSpec& spec);

}  // namespace grpolab
