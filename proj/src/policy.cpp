#include "grpolab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace grpolab {

std::shared_ptr<const PolicyShape> PolicyShape::from_env(const Environment& env) {
  auto shape = std::make_shared<PolicyShape>();
  shape->n_prompts = env.prompt_count();
  shape->vocab = env.alphabet().size;
  shape->eos_id = env.alphabet().eos_id;
  shape->max_len = env.max_len();

  const int n_content = env.content_count();
  shape->level_offset.assign(1, 0);
  std::int64_t level_size = 1;
  for (int k = 0; k + 1 <= env.max_len() - 1; ++k) {
    shape->level_offset.push_back(shape->level_offset.back() + level_size);
    level_size *= n_content;
  }
  shape->n_states = static_cast<int>(shape->level_offset.back());
  shape->dim = static_cast<std::int64_t>(shape->n_prompts) * shape->n_states * shape->vocab;

  shape->paths.resize(env.outputs().sequences.size());
  for (std::size_t o = 0; o < env.outputs().sequences.size(); ++o) {
    const TokenSeq& y = env.outputs().sequences[o];
    const int k = static_cast<int>(y.size()) - 1;  // content length
    int state = 0;
    auto& path = shape->paths[o];
    for (int t = 0; t < k; ++t) {
      const int tok = y[static_cast<std::size_t>(t)];
      path.emplace_back(state, tok);
      state = shape->child_state(state, t, env.content_rank(tok), n_content);
    }
    if (k < env.max_len() - 1) path.emplace_back(state, shape->eos_id);  // eos chosen freely
  }
  return shape;
}

PolicyParams PolicyParams::zeros(std::shared_ptr<const PolicyShape> shape) {
  PolicyParams p;
  p.logits.assign(static_cast<std::size_t>(shape->dim), 0.0);
  p.shape = std::move(shape);
  return p;
}

PolicyParams PolicyParams::random_init(std::shared_ptr<const PolicyShape> shape, double scale,
                                       Rng& rng) {
  PolicyParams p = zeros(std::move(shape));
  for (auto& v : p.logits) v = scale * (2.0 * rng.uniform01() - 1.0);
  return p;
}

std::vector<double> softmax_table(const PolicyParams& p, int prompt_idx) {
  const PolicyShape& shape = *p.shape;
  std::vector<double> probs(static_cast<std::size_t>(shape.block_size()));
  const double* logits = p.logits.data() + shape.block_offset(prompt_idx);
  for (int s = 0; s < shape.n_states; ++s) {
    const double* row = logits + static_cast<std::int64_t>(s) * shape.vocab;
    double* out = probs.data() + static_cast<std::int64_t>(s) * shape.vocab;
    double mx = row[0];
    for (int t = 1; t < shape.vocab; ++t) mx = std::max(mx, row[t]);
    double z = 0.0;
    for (int t = 0; t < shape.vocab; ++t) {
      out[t] = std::exp(row[t] - mx);
      z += out[t];
    }
    for (int t = 0; t < shape.vocab; ++t) out[t] /= z;
  }
  return probs;
}

TokenSeq sample_output(const PolicyParams& p, const Environment& env, int prompt_id, Rng& rng) {
  const PolicyShape& shape = *p.shape;
  const int prompt_idx = env.prompt_index(prompt_id);
  const int n_content = env.content_count();
  TokenSeq y;
  int state = 0;
  for (int t = 0; t + 1 <= env.max_len() - 1; ++t) {
    const double* logits =
        p.logits.data() + shape.param_index(prompt_idx, state, 0);
    // softmax sampling on the fly
    double mx = logits[0];
    for (int a = 1; a < shape.vocab; ++a) mx = std::max(mx, logits[a]);
    double z = 0.0;
    std::vector<double> w(static_cast<std::size_t>(shape.vocab));
    for (int a = 0; a < shape.vocab; ++a) {
      w[static_cast<std::size_t>(a)] = std::exp(logits[a] - mx);
      z += w[static_cast<std::size_t>(a)];
    }
    double u = rng.uniform01() * z;
    int tok = shape.vocab - 1;
    double acc = 0.0;
    for (int a = 0; a + 1 < shape.vocab; ++a) {
      acc += w[static_cast<std::size_t>(a)];
      if (u < acc) {
        tok = a;
        break;
      }
    }
    if (tok == shape.eos_id) {
      y.push_back(shape.eos_id);
      return y;
    }
    y.push_back(tok);
    state = shape.child_state(state, t, env.content_rank(tok), n_content);
  }
  y.push_back(shape.eos_id);  // hard truncation at the horizon
  return y;
}

double log_prob(const PolicyParams& p, const Environment& env, int prompt_id, const TokenSeq& y) {
  const PolicyShape& shape = *p.shape;
  const int prompt_idx = env.prompt_index(prompt_id);
  const int output_idx = env.output_index(y);
  const auto& path = shape.paths[static_cast<std::size_t>(output_idx)];
  double lp = 0.0;
  for (const auto& [state, tok] : path) {
    const double* logits = p.logits.data() + shape.param_index(prompt_idx, state, 0);
    double mx = logits[0];
    for (int a = 1; a < shape.vocab; ++a) mx = std::max(mx, logits[a]);
    double z = 0.0;
    for (int a = 0; a < shape.vocab; ++a) z += std::exp(logits[a] - mx);
    lp += logits[tok] - mx - std::log(z);
  }
  return lp;
}

std::vector<double> score(const PolicyParams& p, const Environment& env, int prompt_id,
                          const TokenSeq& y) {
  const PolicyShape& shape = *p.shape;
  const int prompt_idx = env.prompt_index(prompt_id);
  const int output_idx = env.output_index(y);
  std::vector<double> out(static_cast<std::size_t>(shape.dim), 0.0);
  const std::vector<double> probs = softmax_table(p, prompt_idx);
  add_score(shape, probs, prompt_idx, output_idx, 1.0, out.data());
  return out;
}

void add_score(const PolicyShape& shape, const std::vector<double>& probs, int prompt_idx,
               int output_idx, double alpha, double* acc) {
  const auto& path = shape.paths[static_cast<std::size_t>(output_idx)];
  double* block = acc + shape.block_offset(prompt_idx);
  for (const auto& [state, tok] : path) {
    const double* prow = probs.data() + static_cast<std::int64_t>(state) * shape.vocab;
    double* arow = block + static_cast<std::int64_t>(state) * shape.vocab;
    for (int a = 0; a < shape.vocab; ++a) arow[a] -= alpha * prow[a];
    arow[tok] += alpha;
  }
}

namespace {

// probability of each output under the prompt's softmax table
std::vector<double> output_probs(const PolicyShape& shape, const std::vector<double>& probs) {
  std::vector<double> out(shape.paths.size());
  for (std::size_t o = 0; o < shape.paths.size(); ++o) {
    double pr = 1.0;
    for (const auto& [state, tok] : shape.paths[o])
      pr *= probs[static_cast<std::size_t>(state) * shape.vocab + static_cast<std::size_t>(tok)];
    out[o] = pr;
  }
  return out;
}

}  // namespace

double value_exact(const PolicyParams& p, const Environment& env, int prompt_id) {
  const int prompt_idx = env.prompt_index(prompt_id);
  const std::vector<double> probs = softmax_table(p, prompt_idx);
  const std::vector<double> pr = output_probs(*p.shape, probs);
  double v = 0.0;
  for (std::size_t o = 0; o < pr.size(); ++o)
    v += pr[o] * env.reward_by_index(prompt_idx, static_cast<int>(o));
  return v;
}

std::vector<double> exact_gradient_prompt(const PolicyParams& p, const Environment& env,
                                          int prompt_idx) {
  const PolicyShape& shape = *p.shape;
  std::vector<double> g(static_cast<std::size_t>(shape.dim), 0.0);
  const std::vector<double> probs = softmax_table(p, prompt_idx);
  const std::vector<double> pr = output_probs(shape, probs);
  for (std::size_t o = 0; o < pr.size(); ++o) {
    const double z = env.reward_by_index(prompt_idx, static_cast<int>(o));
    if (pr[o] == 0.0 || z == 0.0) continue;
    add_score(shape, probs, prompt_idx, static_cast<int>(o), pr[o] * z, g.data());
  }
  return g;
}

std::vector<double> exact_gradient(const PolicyParams& p, const Environment& env) {
  const PolicyShape& shape = *p.shape;
  std::vector<double> g(static_cast<std::size_t>(shape.dim), 0.0);
  for (int x = 0; x < env.prompt_count(); ++x) {
    const std::vector<double> gx = exact_gradient_prompt(p, env, x);
    const double w = env.prompts()[static_cast<std::size_t>(x)].weight;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += w * gx[i];
  }
  return g;
}

std::vector<std::vector<double>> exact_hessian(const PolicyParams& p, const Environment& env,
                                               const HessianOptions& opts) {
  const std::int64_t d = p.dim();
  if (d > opts.dim_cap)
    throw RejectionError("exact_hessian: dimension " + std::to_string(d) + " exceeds cap " +
                         std::to_string(opts.dim_cap));
  std::vector<std::vector<double>> h(static_cast<std::size_t>(d),
                                     std::vector<double>(static_cast<std::size_t>(d), 0.0));
  PolicyParams work = p;
  for (std::int64_t j = 0; j < d; ++j) {
    const double orig = work.logits[static_cast<std::size_t>(j)];
    work.logits[static_cast<std::size_t>(j)] = orig + opts.step;
    const std::vector<double> gp = exact_gradient(work, env);
    work.logits[static_cast<std::size_t>(j)] = orig - opts.step;
    const std::vector<double> gm = exact_gradient(work, env);
    work.logits[static_cast<std::size_t>(j)] = orig;
    for (std::int64_t i = 0; i < d; ++i)
      h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          (gp[static_cast<std::size_t>(i)] - gm[static_cast<std::size_t>(i)]) / (2.0 * opts.step);
  }
  for (std::int64_t i = 0; i < d; ++i)
    for (std::int64_t j = 0; j < i; ++j) {
      const double sym = 0.5 * (h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +
                                h[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]);
      h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = sym;
      h[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = sym;
    }
  return h;
}

void save_policy_csv(const PolicyParams& p, const Environment& env, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("policy checkpoint: cannot write " + path);
  out << "prompt_id,state_id,token_id,logit\n";
  out.precision(17);
  const PolicyShape& shape = *p.shape;
  for (int x = 0; x < shape.n_prompts; ++x)
    for (int s = 0; s < shape.n_states; ++s)
      for (int t = 0; t < shape.vocab; ++t)
        out << env.prompts()[static_cast<std::size_t>(x)].id << ',' << s << ',' << t << ','
            << p.logits[static_cast<std::size_t>(shape.param_index(x, s, t))] << '\n';
}

PolicyParams load_policy_csv(std::shared_ptr<const PolicyShape> shape, const Environment& env,
                             const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("policy checkpoint: cannot read " + path);
  PolicyParams p = PolicyParams::zeros(std::move(shape));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    int prompt_id, state, token;
    double logit;
    char comma;
    row >> prompt_id >> comma >> state >> comma >> token >> comma >> logit;
    if (!row) throw ValidationError("policy checkpoint: malformed row '" + line + "'");
    const int x = env.prompt_index(prompt_id);
    p.logits[static_cast<std::size_t>(p.shape->param_index(x, state, token))] = logit;
  }
  return p;
}

}  // namespace grpolab
