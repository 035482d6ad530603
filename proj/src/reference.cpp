#include "grpolab/reference.hpp"

#include <cmath>

#include "grpolab/stats.hpp"

namespace grpolab::ref {

namespace {

struct Walker {
  const PolicyParams& p;
  const Environment& env;
  int prompt_id;
  int prompt_idx;

  std::vector<double> softmax_row(int state) const {
    const PolicyShape& shape = *p.shape;
    std::vector<double> row(static_cast<std::size_t>(shape.vocab));
    const double* logits = p.logits.data() + shape.param_index(prompt_idx, state, 0);
    double mx = logits[0];
    for (int a = 1; a < shape.vocab; ++a) mx = std::max(mx, logits[a]);
    double z = 0.0;
    for (int a = 0; a < shape.vocab; ++a) {
      row[static_cast<std::size_t>(a)] = std::exp(logits[a] - mx);
      z += row[static_cast<std::size_t>(a)];
    }
    for (auto& v : row) v /= z;
    return row;
  }

  // enumerate complete outputs depth-first; visit(prob, sequence, score)
  template <typename Visit>
  void walk(Visit&& visit) const {
    TokenSeq prefix;
    std::vector<double> score(static_cast<std::size_t>(p.shape->dim), 0.0);
    recurse(prefix, 0, 0, 1.0, score, visit);
  }

  template <typename Visit>
  void recurse(TokenSeq& prefix, int level, int state, double prob, std::vector<double>& score,
               Visit&& visit) const {
    const PolicyShape& shape = *p.shape;
    if (level == env.max_len() - 1) {  // forced eos, no free choice
      prefix.push_back(shape.eos_id);
      visit(prob, prefix, score);
      prefix.pop_back();
      return;
    }
    const std::vector<double> row = softmax_row(state);
    for (int tok = 0; tok < shape.vocab; ++tok) {
      // apply this decision's score contribution
      std::vector<double> saved(static_cast<std::size_t>(shape.vocab));
      double* arow = score.data() + shape.param_index(prompt_idx, state, 0);
      for (int a = 0; a < shape.vocab; ++a) {
        saved[static_cast<std::size_t>(a)] = arow[a];
        arow[a] += (a == tok ? 1.0 : 0.0) - row[static_cast<std::size_t>(a)];
      }
      prefix.push_back(tok);
      const double child_prob = prob * row[static_cast<std::size_t>(tok)];
      if (tok == shape.eos_id) {
        visit(child_prob, prefix, score);
      } else {
        const int child =
            shape.child_state(state, level, env.content_rank(tok), env.content_count());
        recurse(prefix, level + 1, child, child_prob, score, visit);
      }
      prefix.pop_back();
      for (int a = 0; a < shape.vocab; ++a) arow[a] = saved[static_cast<std::size_t>(a)];
    }
  }
};

}  // namespace

double value_exact(const PolicyParams& p, const Environment& env, int prompt_id) {
  Walker w{p, env, prompt_id, env.prompt_index(prompt_id)};
  double v = 0.0;
  w.walk([&](double prob, const TokenSeq& y, const std::vector<double>&) {
    v += prob * env.reward(prompt_id, y);
  });
  return v;
}

std::vector<double> exact_gradient(const PolicyParams& p, const Environment& env) {
  std::vector<double> g(static_cast<std::size_t>(p.shape->dim), 0.0);
  for (const auto& prompt : env.prompts()) {
    Walker w{p, env, prompt.id, env.prompt_index(prompt.id)};
    w.walk([&](double prob, const TokenSeq& y, const std::vector<double>& score) {
      axpy(prompt.weight * prob * env.reward(prompt.id, y), score, g);
    });
  }
  return g;
}

ScalarMoments scalar_moments(const PolicyParams& p, const Environment& env, int prompt_id) {
  Walker w{p, env, prompt_id, env.prompt_index(prompt_id)};
  ScalarMoments m;
  w.walk([&](double prob, const TokenSeq& y, const std::vector<double>& score) {
    const double z = env.reward(prompt_id, y);
    const double ssq = norm2(score);
    m.value += prob * z;
    m.e_score_sq += prob * ssq;
    m.e_score_sq_z2 += prob * ssq * z * z;
  });
  return m;
}

}  // namespace grpolab::ref
