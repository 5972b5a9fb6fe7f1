#include <cmath>

#include "eda/error.h"
#include "eda/toybench.h"
#include "random.h"

namespace eda::toybench {

using nlohmann::json;
using numcore::Tape;
using numcore::Var;

namespace {

constexpr int kFormatVersion = 1;
constexpr double kExtent = 10.0;
constexpr double kMaxSize = 2.5;
constexpr double kHeadInitScale = 0.1;

Matrix gaussian(std::size_t rows, std::size_t cols, double sd, Rng& rng) {
  Matrix m(rows, cols);
  for (double& x : m.data()) x = sd * rnd::normal(rng);
  return m;
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

Matrix matrix_from(const json& j, std::size_t rows, std::size_t cols, const char* name) {
  if (!j.is_array() || j.size() != rows) {
    throw InvalidInput(std::string("checkpoint: bad row count for ") + name);
  }
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto v = j[r].get<std::vector<double>>();
    if (v.size() != cols) throw InvalidInput(std::string("checkpoint: bad column count for ") + name);
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = v[c];
  }
  m.check_finite(name);
  return m;
}

}  // namespace

std::size_t descriptor_dim(const Vocab& v) {
  return v.categories.size() + v.colors.size() + v.materials.size() + v.sizes.size() + 6 +
         v.relations.size() * v.categories.size();
}

Matrix object_descriptors(const ToyScene& scene, const Vocab& v) {
  const std::size_t k = scene.objects.size();
  const std::size_t nc = v.categories.size();
  Matrix d(k, descriptor_dim(v));
  for (std::size_t i = 0; i < k; ++i) {
    const ToyObject& o = scene.objects[i];
    std::size_t col = 0;
    d(i, col + o.category) = 1;
    col += nc;
    d(i, col + o.color) = 1;
    col += v.colors.size();
    d(i, col + o.material) = 1;
    col += v.materials.size();
    d(i, col + o.size_tag) = 1;
    col += v.sizes.size();
    for (int a = 0; a < 3; ++a) d(i, col++) = o.box.center[a] / kExtent;
    for (int a = 0; a < 3; ++a) d(i, col++) = o.box.size[a] / kMaxSize;
    for (std::size_t r = 0; r < v.relations.size(); ++r) {
      for (std::size_t j = 0; j < k; ++j) {
        if (j != i && relation_holds(v, static_cast<int>(r), o, scene.objects[j])) {
          d(i, col + r * nc + scene.objects[j].category) = 1;
        }
      }
    }
  }
  return d;
}

ToyModel ToyModel::init(std::uint64_t seed, const Vocab& vocab, int hidden) {
  if (hidden < 1) throw ConfigError("hidden must be >= 1");
  Rng rng(rnd::derive(seed, 0x6d6f64656cULL));
  const std::size_t v = vocab.size();
  const std::size_t in = descriptor_dim(vocab);
  const double d = kFeatureDim;
  ToyModel m;
  m.word = gaussian(v, kFeatureDim, 1 / std::sqrt(d), rng);
  m.head_word = gaussian(v + 1, kFeatureDim, kHeadInitScale, rng);
  m.child_word = gaussian(v, kFeatureDim, kHeadInitScale, rng);
  m.empty = gaussian(1, kFeatureDim, 1 / std::sqrt(d), rng);
  m.w1 = gaussian(in, hidden, 1 / std::sqrt(static_cast<double>(in)), rng);
  m.b1 = Matrix(1, hidden);
  m.w2 = gaussian(hidden, kFeatureDim, 1 / std::sqrt(static_cast<double>(hidden)), rng);
  m.seed = seed;
  m.vocab_hash = vocab.hash;
  return m;
}

std::vector<Matrix*> ToyModel::parameters() {
  return {&word, &head_word, &child_word, &empty, &w1, &b1, &w2};
}

std::vector<const Matrix*> ToyModel::parameters() const {
  return {&word, &head_word, &child_word, &empty, &w1, &b1, &w2};
}

std::size_t ToyModel::parameter_count() const {
  std::size_t n = 0;
  for (const Matrix* p : parameters()) n += p->size();
  return n;
}

json to_json(const ToyModel& m) {
  return {{"format_version", kFormatVersion},
          {"vocab_hash", m.vocab_hash},
          {"seed", m.seed},
          {"hidden", m.w1.cols()},
          {"params",
           {{"word", matrix_json(m.word)},
            {"head_word", matrix_json(m.head_word)},
            {"child_word", matrix_json(m.child_word)},
            {"empty", matrix_json(m.empty)},
            {"w1", matrix_json(m.w1)},
            {"b1", matrix_json(m.b1)},
            {"w2", matrix_json(m.w2)}}}};
}

ToyModel model_from_json(const json& j, const Vocab& vocab) {
  try {
    if (j.at("format_version").get<int>() != kFormatVersion) {
      throw InvalidInput("checkpoint: unsupported format_version");
    }
    if (j.at("vocab_hash").get<std::uint64_t>() != vocab.hash) {
      throw InvalidInput("checkpoint: trained with a different vocabulary");
    }
    const std::size_t hidden = j.at("hidden").get<std::size_t>();
    const std::size_t v = vocab.size();
    const json& p = j.at("params");
    ToyModel m;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.vocab_hash = vocab.hash;
    m.word = matrix_from(p.at("word"), v, kFeatureDim, "word");
    m.head_word = matrix_from(p.at("head_word"), v + 1, kFeatureDim, "head_word");
    m.child_word = matrix_from(p.at("child_word"), v, kFeatureDim, "child_word");
    m.empty = matrix_from(p.at("empty"), 1, kFeatureDim, "empty");
    m.w1 = matrix_from(p.at("w1"), descriptor_dim(vocab), hidden, "w1");
    m.b1 = matrix_from(p.at("b1"), 1, hidden, "b1");
    m.w2 = matrix_from(p.at("w2"), hidden, kFeatureDim, "w2");
    return m;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("checkpoint: ") + e.what());
  }
}

ModelVars bind(Tape& tape, const ToyModel& m, bool trainable) {
  auto b = [&](const Matrix& x) { return trainable ? tape.leaf(x) : tape.constant(x); };
  return {b(m.word), b(m.head_word), b(m.child_word), tape.constant(m.empty), b(m.w1), b(m.b1), b(m.w2)};
}

Var encode_objects(const ModelVars& vars, const Matrix& descriptors) {
  Tape& tape = *vars.w1.tape();
  const Var x = tape.constant(descriptors);
  const Var h = numcore::tanh(numcore::add_row(numcore::matmul(x, vars.w1), vars.b1));
  return numcore::l2_normalize_rows(numcore::matmul(h, vars.w2));
}

Var encode_text(const ModelVars& vars, const deptree::DependencyTree& tree, const Vocab& vocab) {
  const int n = static_cast<int>(tree.token_count());
  if (n == 0) throw InvalidInput("empty utterance");
  std::vector<int> ids(n), heads(n), dependents, owners;
  const int no_head = static_cast<int>(vocab.size());
  for (int g = 0; g < n; ++g) {
    ids[g] = vocab.id(tree.token(g).surface);
    const int h = tree.global_head(g);
    heads[g] = h == deptree::kRoot ? no_head : vocab.id(tree.token(h).surface);
    if (h != deptree::kRoot) {
      dependents.push_back(ids[g]);
      owners.push_back(h);
    }
  }
  Tape& tape = *vars.word.tape();
  const Var w = numcore::gather_rows(vars.word, ids);
  const Var h = numcore::gather_rows(vars.head_word, heads);
  Var x = numcore::add(w, numcore::hadamard(w, h));
  if (!dependents.empty()) {
    // Sums the dependents' rows into their heads.
    Matrix to_head(n, dependents.size());
    for (std::size_t e = 0; e < owners.size(); ++e) to_head(owners[e], e) = 1;
    x = numcore::add(x, numcore::matmul(tape.constant(std::move(to_head)),
                                        numcore::gather_rows(vars.child_word, dependents)));
  }
  const Var t = numcore::l2_normalize_rows(x);
  return numcore::concat_rows(t, numcore::l2_normalize_rows(vars.empty));
}

FeatureBundle forward(const ToyModel& model, const ToyScene& scene,
                      const deptree::DependencyTree& tree, const Vocab& vocab, double tau) {
  if (!(tau > 0)) throw ConfigError("tau must be positive");
  Tape tape;
  const ModelVars vars = bind(tape, model, false);
  const Var o = encode_objects(vars, object_descriptors(scene, vocab));
  const Var t = encode_text(vars, tree, vocab);
  const Var l = numcore::scale(numcore::matmul_nt(o, t), 1 / tau);
  return {o.value(), t.value(), l.value()};
}

}  // namespace eda::toybench
