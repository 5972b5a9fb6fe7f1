// Naive reference implementations and random instances shared by the unit
// and acceptance tests. Everything here is written with plain loops over
// std::vector so it does not share code paths with the library.
#ifndef EDA_TESTS_SUPPORT_H_
#define EDA_TESTS_SUPPORT_H_

#include <cmath>
#include <random>
#include <vector>

#include "eda/decouple.h"
#include "eda/losses.h"
#include "eda/numcore/matrix.h"

namespace eda::testing {

using decouple::ComponentKind;
using numcore::Matrix;
using Grid = std::vector<std::vector<double>>;

inline Grid to_grid(const Matrix& m) {
  Grid g(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) g[r][c] = m(r, c);
  return g;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// One utterance of n tokens laid out in l slots (slot l-1 is the empty
// slot, slots n..l-2 are padding) and k candidates.
struct Instance {
  int k = 0, l = 0, n = 0;
  std::vector<ComponentKind> kinds;  // per token
  int main_cand = 0;
  int aux_cand = -1;
  Matrix o, t, l_pred;
};

inline Matrix random_unit_rows(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> normal;
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double norm = 0;
    for (int c = 0; c < cols; ++c) {
      m(r, c) = normal(rng);
      norm += m(r, c) * m(r, c);
    }
    for (int c = 0; c < cols; ++c) m(r, c) /= std::sqrt(norm);
  }
  return m;
}

inline Instance random_instance(std::mt19937_64& rng, int max_k = 8, int max_l = 8, int d = 64) {
  Instance in;
  in.k = std::uniform_int_distribution<int>(1, max_k)(rng);
  in.l = std::uniform_int_distribution<int>(2, max_l)(rng);
  in.n = std::uniform_int_distribution<int>(1, in.l - 1)(rng);
  const ComponentKind pool[] = {ComponentKind::kMainObject,   ComponentKind::kAttribute,
                                ComponentKind::kPronoun,      ComponentKind::kRelationship,
                                ComponentKind::kAuxiliaryObject, ComponentKind::kNone};
  std::uniform_int_distribution<int> pick(0, 5);
  for (int j = 0; j < in.n; ++j) in.kinds.push_back(pool[pick(rng)]);
  in.kinds[std::uniform_int_distribution<int>(0, in.n - 1)(rng)] = ComponentKind::kMainObject;
  bool has_aux = false;
  for (auto kd : in.kinds) has_aux = has_aux || kd == ComponentKind::kAuxiliaryObject;
  in.main_cand = std::uniform_int_distribution<int>(0, in.k - 1)(rng);
  if (has_aux && in.k > 1) {
    do {
      in.aux_cand = std::uniform_int_distribution<int>(0, in.k - 1)(rng);
    } while (in.aux_cand == in.main_cand);
  }
  in.o = random_unit_rows(rng, in.k, d);
  in.t = random_unit_rows(rng, in.l, d);
  std::normal_distribution<double> normal(0.0, 2.0);
  in.l_pred = Matrix(in.k, in.l);
  for (double& v : in.l_pred.data()) v = normal(rng);
  return in;
}

inline decouple::SemanticComponents components_of(const Instance& in) {
  decouple::SemanticComponents c;
  c.utterance_id = "random";
  c.assignment = in.kinds;
  for (int j = 0; j < in.n; ++j) {
    if (in.kinds[j] == ComponentKind::kMainObject) {
      c.main_head = j;
      break;
    }
  }
  c.owner.assign(in.n, -1);
  for (int j = 0; j < in.n; ++j) {
    if (in.kinds[j] == ComponentKind::kAttribute || in.kinds[j] == ComponentKind::kRelationship)
      c.owner[j] = c.main_head;
    if (in.kinds[j] == ComponentKind::kAuxiliaryObject) c.auxi_heads.push_back(j);
  }
  return c;
}

// Positive weight of a token kind as listed for the main object; everything
// else (auxiliary text, the empty slot) weighs 1.
inline double naive_w_plus(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::kMainObject: return 1.0;
    case ComponentKind::kAttribute: return 0.2;
    case ComponentKind::kPronoun: return 0.2;
    case ComponentKind::kRelationship: return 0.1;
    default: return 1.0;
  }
}

// Positive slots of candidate i, with their w+.
inline std::vector<std::pair<int, double>> naive_positives(const Instance& in, int i) {
  std::vector<std::pair<int, double>> out;
  if (i == in.main_cand) {
    for (int j = 0; j < in.n; ++j) {
      const auto kd = in.kinds[j];
      if (kd == ComponentKind::kMainObject || kd == ComponentKind::kAttribute ||
          kd == ComponentKind::kPronoun || kd == ComponentKind::kRelationship)
        out.push_back({j, naive_w_plus(kd)});
    }
  } else if (i == in.aux_cand) {
    for (int j = 0; j < in.n; ++j)
      if (in.kinds[j] == ComponentKind::kAuxiliaryObject) out.push_back({j, 1.0});
  } else {
    out.push_back({in.l - 1, 1.0});
  }
  return out;
}

inline bool naive_valid(const Instance& in, int j) { return j < in.n || j == in.l - 1; }

// Ground-truth text distribution: weighted main row, uniform auxiliary row,
// empty-slot one-hot for the rest.
inline Grid naive_ptext(const Instance& in, double l1 = 0.6, double l2 = 0.2, double l3 = 0.2,
                        double l4 = 0.1) {
  Grid p(in.k, std::vector<double>(in.l, 0.0));
  for (int i = 0; i < in.k; ++i) {
    if (i == in.main_cand) {
      double total = 0;
      for (int j = 0; j < in.n; ++j) {
        double w = 0;
        switch (in.kinds[j]) {
          case ComponentKind::kMainObject: w = l1; break;
          case ComponentKind::kAttribute: w = l2; break;
          case ComponentKind::kPronoun: w = l3; break;
          case ComponentKind::kRelationship: w = l4; break;
          default: break;
        }
        p[i][j] = w;
        total += w;
      }
      for (int j = 0; j < in.l; ++j) p[i][j] /= total;
    } else if (i == in.aux_cand) {
      int count = 0;
      for (int j = 0; j < in.n; ++j) count += in.kinds[j] == ComponentKind::kAuxiliaryObject;
      for (int j = 0; j < in.n; ++j)
        if (in.kinds[j] == ComponentKind::kAuxiliaryObject) p[i][j] = 1.0 / count;
    } else {
      p[i][in.l - 1] = 1.0;
    }
  }
  return p;
}

// sum_i sum_j P log P - P log softmax(L)
inline double naive_position_loss(const Grid& logits, const Grid& p) {
  double loss = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double z = 0;
    for (double v : logits[i]) z += std::exp(v);
    for (std::size_t j = 0; j < p[i].size(); ++j) {
      if (p[i][j] == 0) continue;
      const double q = std::exp(logits[i][j]) / z;
      loss += p[i][j] * std::log(p[i][j]) - p[i][j] * std::log(q);
    }
  }
  return loss;
}

inline double naive_object_loss(const Instance& in, double tau, double w_aux = 2.0) {
  const Grid o = to_grid(in.o), t = to_grid(in.t);
  double loss = 0;
  for (int i = 0; i < in.k; ++i) {
    const auto pos = naive_positives(in, i);
    double denom = 0;
    for (int j = 0; j < in.l; ++j) {
      if (!naive_valid(in, j)) continue;
      bool own = false;
      for (const auto& [p, w] : pos) own = own || p == j;
      const bool aux = j < in.n && in.kinds[j] == ComponentKind::kAuxiliaryObject;
      const double w_minus = aux && !own ? w_aux : 1.0;
      denom += std::exp(w_minus * dot(o[i], t[j]) / tau);
    }
    double li = 0;
    for (const auto& [p, w] : pos) li += -std::log(std::exp(w * dot(o[i], t[p]) / tau) / denom);
    loss += li / static_cast<double>(pos.size());
  }
  return loss;
}

inline double naive_text_loss(const Instance& in, double tau) {
  const Grid o = to_grid(in.o), t = to_grid(in.t);
  double loss = 0;
  for (int j = 0; j < in.l; ++j) {
    if (!naive_valid(in, j)) continue;
    std::vector<int> owners;
    double w = 1.0;
    for (int i = 0; i < in.k; ++i) {
      for (const auto& [p, wp] : naive_positives(in, i)) {
        if (p == j) {
          owners.push_back(i);
          w = wp;
        }
      }
    }
    if (owners.empty()) continue;
    double denom = 0;
    for (int i = 0; i < in.k; ++i) denom += std::exp(dot(t[j], o[i]) / tau);
    for (int i : owners) {
      loss += w / owners.size() * -std::log(std::exp(dot(t[j], o[i]) / tau) / denom);
    }
  }
  return loss;
}

}  // namespace eda::testing

#endif  // EDA_TESTS_SUPPORT_H_
