#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "eda/error.h"
#include "eda/inference.h"
#include "eda/toybench.h"
#include "random.h"

namespace eda::toybench {

using decouple::SemanticComponents;
using nlohmann::json;
using numcore::Tape;
using numcore::Var;

namespace {

struct ComponentName {
  const char* name;
  ComponentKind kind;
};
constexpr ComponentName kComponentNames[] = {
    {"main", ComponentKind::kMainObject},   {"attr", ComponentKind::kAttribute},
    {"pron", ComponentKind::kPronoun},      {"auxi", ComponentKind::kAuxiliaryObject},
    {"rel", ComponentKind::kRelationship}};

bool enabled(const std::vector<ComponentKind>& kinds, ComponentKind k) {
  return std::find(kinds.begin(), kinds.end(), k) != kinds.end();
}

std::string losses_string(bool pos, bool sem) {
  if (pos && sem) return "pos,sem";
  return pos ? "pos" : "sem";
}

void parse_losses(const std::string& s, bool& pos, bool& sem) {
  pos = sem = false;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item == "pos") {
      pos = true;
    } else if (item == "sem") {
      sem = true;
    } else {
      throw ConfigError("unknown loss \"" + item + "\" (expected pos or sem)");
    }
  }
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(std::string(where) + ": unknown key \"" + key + "\"");
  }
}

}  // namespace

std::string components_string(const std::vector<ComponentKind>& kinds) {
  std::string out;
  for (const auto& c : kComponentNames) {
    if (enabled(kinds, c.kind)) out += (out.empty() ? "" : ",") + std::string(c.name);
  }
  return out;
}

namespace {

ComponentKind component_named(const std::string& name) {
  for (const auto& c : kComponentNames) {
    if (name == c.name) return c.kind;
  }
  throw ConfigError("unknown component \"" + name + "\" (expected main,attr,pron,auxi,rel)");
}

}  // namespace

std::vector<ComponentKind> parse_components(const std::string& s) {
  std::set<ComponentKind> seen;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    seen.insert(component_named(item));
  }
  std::vector<ComponentKind> out;
  for (ComponentKind k : kAllComponents) {
    if (seen.count(k)) out.push_back(k);
  }
  if (out.empty()) throw ConfigError("no components given");
  if (out.front() != ComponentKind::kMainObject) throw ConfigError("components must include main");
  return out;
}

SemanticComponents restrict_components(const SemanticComponents& c,
                                       const std::vector<ComponentKind>& kinds) {
  SemanticComponents out = c;
  for (std::size_t g = 0; g < out.size(); ++g) {
    if (out.assignment[g] != ComponentKind::kNone && !enabled(kinds, out.assignment[g])) {
      out.assignment[g] = ComponentKind::kNone;
      out.owner[g] = -1;
    }
  }
  if (!enabled(kinds, ComponentKind::kAuxiliaryObject)) out.auxi_heads.clear();
  if (!enabled(kinds, ComponentKind::kPronoun)) out.pronoun_links.clear();
  return out;
}

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  if (train_scenes < 1 || eval_scenes < 0) throw ConfigError("scene counts must be positive");
  if (utterances_per_scene < 1) throw ConfigError("utterances_per_scene must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (hidden < 1) throw ConfigError("hidden must be >= 1");
  if (capacity < 2) throw ConfigError("capacity must be >= 2");
  if (!enabled(components, ComponentKind::kMainObject)) {
    throw ConfigError("components must include main");
  }
  if (!use_position_loss && !use_semantic_loss) throw ConfigError("enable at least one loss");
  loss.validate();
  lambda.validate();
}

TrainConfig train_config_from_json(const json& j) {
  check_keys(j,
             {"seed", "corpus_seed", "train_scenes", "eval_scenes", "utterances_per_scene",
              "epochs", "lr", "hidden", "components", "losses", "capacity", "tau", "lambda",
              "w_plus", "w_minus_auxi", "w_minus_default", "alpha", "box_weight",
              "decoder_layers", "scene"},
             "config");
  TrainConfig c;
  try {
    read(j, "seed", c.seed);
    read(j, "corpus_seed", c.corpus_seed);
    read(j, "train_scenes", c.train_scenes);
    read(j, "eval_scenes", c.eval_scenes);
    read(j, "utterances_per_scene", c.utterances_per_scene);
    read(j, "epochs", c.epochs);
    read(j, "lr", c.lr);
    read(j, "hidden", c.hidden);
    read(j, "capacity", c.capacity);
    if (j.contains("components")) c.components = parse_components(j["components"].get<std::string>());
    if (j.contains("losses")) {
      parse_losses(j["losses"].get<std::string>(), c.use_position_loss, c.use_semantic_loss);
    }
    read(j, "tau", c.loss.tau);
    if (j.contains("lambda")) {
      const auto v = j["lambda"].get<std::vector<double>>();
      if (v.size() != 4) throw ConfigError("lambda needs four weights");
      c.lambda = {v[0], v[1], v[2], v[3]};
    }
    if (j.contains("w_plus")) {
      const json& w = j["w_plus"];
      check_keys(w, {"main", "attr", "pron", "rel"}, "w_plus");
      for (const auto& [key, value] : w.items()) {
        c.loss.w_plus[component_named(key)] = value.get<double>();
      }
    }
    read(j, "w_minus_auxi", c.loss.w_minus_auxi);
    read(j, "w_minus_default", c.loss.w_minus_default);
    read(j, "alpha", c.loss.alpha);
    read(j, "box_weight", c.loss.box_weight);
    read(j, "decoder_layers", c.loss.decoder_layers);
    if (j.contains("scene")) {
      const json& s = j["scene"];
      check_keys(s, {"min_objects", "max_objects", "multiple_prob", "max_same_category",
                     "max_pair_iou"},
                 "scene");
      read(s, "min_objects", c.scene.min_objects);
      read(s, "max_objects", c.scene.max_objects);
      read(s, "multiple_prob", c.scene.multiple_prob);
      read(s, "max_same_category", c.scene.max_same_category);
      read(s, "max_pair_iou", c.scene.max_pair_iou);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const TrainConfig& c) {
  json w_plus = json::object();
  for (const auto& n : kComponentNames) {
    if (n.kind == ComponentKind::kAuxiliaryObject) continue;
    w_plus[n.name] = c.loss.positive_weight(n.kind);
  }
  return {{"seed", c.seed},
          {"corpus_seed", c.corpus_seed},
          {"train_scenes", c.train_scenes},
          {"eval_scenes", c.eval_scenes},
          {"utterances_per_scene", c.utterances_per_scene},
          {"epochs", c.epochs},
          {"lr", c.lr},
          {"hidden", c.hidden},
          {"components", components_string(c.components)},
          {"losses", losses_string(c.use_position_loss, c.use_semantic_loss)},
          {"capacity", c.capacity},
          {"tau", c.loss.tau},
          {"lambda", {c.lambda.main, c.lambda.attribute, c.lambda.pronoun, c.lambda.relationship}},
          {"w_plus", w_plus},
          {"w_minus_auxi", c.loss.w_minus_auxi},
          {"w_minus_default", c.loss.w_minus_default},
          {"alpha", c.loss.alpha},
          {"box_weight", c.loss.box_weight},
          {"decoder_layers", c.loss.decoder_layers},
          {"scene",
           {{"min_objects", c.scene.min_objects},
            {"max_objects", c.scene.max_objects},
            {"multiple_prob", c.scene.multiple_prob},
            {"max_same_category", c.scene.max_same_category},
            {"max_pair_iou", c.scene.max_pair_iou}}}};
}

// ---------------------------------------------------------------------------
// Training

Var utterance_loss(const ModelVars& vars, const Var& objects, const ToyUtterance& u,
                   const ToyScene& scene, const Vocab& vocab, const TrainConfig& config) {
  Tape& tape = *objects.tape();
  const std::size_t n = u.gold_tree.token_count();
  if (n + 1 > config.capacity) {
    throw CapacityError(u.utterance_id + ": " + std::to_string(n) + " tokens exceed capacity");
  }
  const std::size_t k = scene.objects.size();
  const SemanticComponents comps = restrict_components(u.gold_components, config.components);
  const align::LabelSet labels = align::label_set(comps, n + 1);
  const Var t = encode_text(vars, u.gold_tree, vocab);

  std::map<int, align::RowRole> roles = {{u.target, align::RowRole::kMain}};
  if (u.auxiliary >= 0 && !labels.auxiliary.empty()) roles[u.auxiliary] = align::RowRole::kAuxiliary;

  losses::LossParts parts;
  if (config.use_position_loss) {
    const Var l_pred = numcore::scale(numcore::matmul_nt(objects, t), 1 / config.loss.tau);
    const align::TextDistribution p = align::build_ptext(
        align::main_distribution(labels, config.lambda), labels.auxiliary, k, roles);
    parts.pos = losses::position_loss(l_pred, p.rows);
  }
  if (config.use_semantic_loss) {
    const losses::PositiveSets sets = losses::make_positive_sets(labels, k, roles, n);
    parts.sem = losses::semantic_loss(objects, t, sets, config.loss);
  }
  return losses::total_loss(tape, parts, config.loss);
}

TrainResult train(const TrainConfig& config, const std::vector<CorpusRecord>& corpus,
                  const Vocab& vocab, const EpochCallback& on_epoch) {
  config.validate();
  TrainResult result;
  result.model = ToyModel::init(config.seed, vocab, config.hidden);
  ToyModel& model = result.model;

  std::vector<Matrix> descriptors;
  std::size_t count = 0;
  for (const auto& rec : corpus) {
    descriptors.push_back(object_descriptors(rec.scene, vocab));
    count += rec.utterances.size();
  }
  if (count == 0) throw InvalidInput("training corpus has no utterances");
  const double inv = 1.0 / static_cast<double>(count);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<Matrix> grads;
    for (const Matrix* p : std::as_const(model).parameters()) grads.emplace_back(p->rows(), p->cols());
    double total = 0;
    for (std::size_t s = 0; s < corpus.size(); ++s) {
      const CorpusRecord& rec = corpus[s];
      if (rec.utterances.empty()) continue;
      Tape tape;
      const ModelVars vars = bind(tape, model, true);
      const Var o = encode_objects(vars, descriptors[s]);
      Var acc;
      for (const ToyUtterance& u : rec.utterances) {
        const Var l = utterance_loss(vars, o, u, rec.scene, vocab, config);
        acc = acc.valid() ? numcore::add(acc, l) : l;
      }
      tape.backward(acc);
      total += acc.item();
      const Var* leaves[] = {&vars.word, &vars.head_word, &vars.child_word, &vars.empty,
                             &vars.w1,   &vars.b1,        &vars.w2};
      for (std::size_t i = 0; i < grads.size(); ++i) {
        if (leaves[i]->grad().size() == grads[i].size()) grads[i] += leaves[i]->grad();
      }
    }
    if (!std::isfinite(total)) throw NumericError("training loss is not finite");
    result.loss_history.push_back(total * inv);
    const auto params = model.parameters();
    for (std::size_t i = 0; i < grads.size(); ++i) *params[i] -= grads[i] * (config.lr * inv);
    if (on_epoch) on_epoch(epoch, result.loss_history.back(), model);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalResult evaluate(const ToyModel& model, const std::vector<CorpusRecord>& corpus,
                    EvalMode mode, const std::vector<ComponentKind>& components,
                    const Vocab& vocab, double tau) {
  EvalResult r;
  double chance = 0;
  for (const CorpusRecord& rec : corpus) {
    if (rec.utterances.empty()) continue;
    Tape tape;
    const ModelVars vars = bind(tape, model, false);
    const Matrix o = encode_objects(vars, object_descriptors(rec.scene, vocab)).value();
    for (const ToyUtterance& u : rec.utterances) {
      const bool masked = mode == EvalMode::kMasked;
      if (masked && !u.masked_unique) continue;
      const auto& tree = masked ? u.masked_tree : u.gold_tree;
      const SemanticComponents comps =
          restrict_components(masked ? u.masked_components : u.gold_components, components);
      const Matrix t = encode_text(vars, tree, vocab).value();
      const align::LabelSet labels = align::label_set(comps, tree.token_count() + 1);
      const inference::Inference inf = inference::infer(o, t, labels, tau, components);
      ++r.evaluated;
      if (inf.selected == u.target) ++r.correct;
      chance += 1.0 / static_cast<double>(rec.scene.objects.size());
    }
  }
  if (r.evaluated > 0) {
    r.accuracy = static_cast<double>(r.correct) / r.evaluated;
    r.chance = chance / r.evaluated;
  }
  return r;
}

std::vector<CorpusRecord> train_corpus(const TrainConfig& c, const Vocab& vocab) {
  return gen_corpus({c.corpus_seed, c.train_scenes, c.utterances_per_scene, c.scene, "train"}, vocab);
}

std::vector<CorpusRecord> eval_corpus(const TrainConfig& c, const Vocab& vocab) {
  return gen_corpus(
      {rnd::derive(c.corpus_seed, 0x6576616cULL), c.eval_scenes, c.utterances_per_scene, c.scene,
       "eval"},
      vocab);
}

// ---------------------------------------------------------------------------
// Ablation

double CellResult::mean_regular() const { return mean_of(regular); }
double CellResult::sd_regular() const { return sd_of(regular); }
double CellResult::mean_masked() const { return mean_of(masked); }
double CellResult::sd_masked() const { return sd_of(masked); }

std::vector<AblationCell> loss_grid() {
  return {{"pos", kAllComponents, true, false},
          {"sem", kAllComponents, false, true},
          {"pos+sem", kAllComponents, true, true}};
}

std::vector<AblationCell> component_grid() {
  using K = ComponentKind;
  const K m = K::kMainObject, a = K::kAttribute, p = K::kPronoun, x = K::kAuxiliaryObject,
          r = K::kRelationship;
  return {{"(a)", {m}, true, true},          {"(b)", {m, a}, true, true},
          {"(c)", {m, p}, true, true},       {"(d)", {m, x}, true, true},
          {"(e)", {m, r}, true, true},       {"(f)", {m, a, p}, true, true},
          {"(g)", {m, a, p, x}, true, true}, {"(h)", kAllComponents, true, true}};
}

CellResult run_cell(const TrainConfig& base, const AblationCell& cell,
                    const std::vector<std::uint64_t>& seeds, const Vocab& vocab) {
  const auto start = std::chrono::steady_clock::now();
  TrainConfig cfg = base;
  cfg.components = cell.components;
  cfg.use_position_loss = cell.use_position_loss;
  cfg.use_semantic_loss = cell.use_semantic_loss;
  cfg.validate();
  const auto train_set = train_corpus(cfg, vocab);
  const auto eval_set = eval_corpus(cfg, vocab);
  CellResult out;
  out.cell = cell;
  out.seeds = seeds;
  for (std::uint64_t seed : seeds) {
    cfg.seed = seed;
    const TrainResult tr = train(cfg, train_set, vocab);
    out.regular.push_back(
        evaluate(tr.model, eval_set, EvalMode::kRegular, cell.components, vocab, cfg.loss.tau).accuracy);
    out.masked.push_back(
        evaluate(tr.model, eval_set, EvalMode::kMasked, cell.components, vocab, cfg.loss.tau).accuracy);
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

json to_json(const CellResult& r) {
  return {{"name", r.cell.name},
          {"losses", losses_string(r.cell.use_position_loss, r.cell.use_semantic_loss)},
          {"components", components_string(r.cell.components)},
          {"seeds", r.seeds},
          {"regular", r.regular},
          {"masked", r.masked},
          {"regular_mean", r.mean_regular()},
          {"regular_sd", r.sd_regular()},
          {"masked_mean", r.mean_masked()},
          {"masked_sd", r.sd_masked()}};
}

std::string format_table(const std::vector<CellResult>& rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %-8s %-24s %-16s %-16s\n", "cell", "losses",
                "components", "regular", "masked");
  out += line;
  for (const auto& r : rows) {
    char reg[32], msk[32];
    std::snprintf(reg, sizeof reg, "%.1f +- %.1f", 100 * r.mean_regular(), 100 * r.sd_regular());
    std::snprintf(msk, sizeof msk, "%.1f +- %.1f", 100 * r.mean_masked(), 100 * r.sd_masked());
    std::snprintf(line, sizeof line, "%-8s %-8s %-24s %-16s %-16s\n", r.cell.name.c_str(),
                  losses_string(r.cell.use_position_loss, r.cell.use_semantic_loss).c_str(),
                  components_string(r.cell.components).c_str(), reg, msk);
    out += line;
  }
  return out;
}

}  // namespace eda::toybench
