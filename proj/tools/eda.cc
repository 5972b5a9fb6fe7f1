// eda: command-line driver for decoupling, masking, the synthetic bench and
// the loss/gradient self-checks.
//
// Exit codes: 0 success, 1 runtime failure (including a failed check),
// 2 invalid input or configuration.
// EDA_LOG_LEVEL selects logging on stderr: error, warn, info (default), debug.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "eda/decouple.h"
#include "eda/deptree.h"
#include "eda/error.h"
#include "eda/losses.h"
#include "eda/numcore/gradcheck.h"
#include "eda/toybench.h"
#include "json.hpp"

namespace {

using nlohmann::json;
namespace tb = eda::toybench;

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

Level log_level() {
  static const Level level = [] {
    const char* env = std::getenv("EDA_LOG_LEVEL");
    const std::string s = env ? env : "info";
    if (s == "error") return Level::kError;
    if (s == "warn") return Level::kWarn;
    if (s == "debug") return Level::kDebug;
    return Level::kInfo;
  }();
  return level;
}

void log(Level level, const std::string& msg) {
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= log_level()) std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw eda::InvalidInput("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to path, or stdout when path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw eda::Error("cannot write " + path);
  out << text;
  if (!out) throw eda::Error("write failed: " + path);
}

// Settings shared by the bench subcommands: a config file plus flag
// overrides. Flags win.
struct BenchOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string components, losses, lambda;
  std::optional<double> tau;
  std::optional<int> epochs;

  void add_to(CLI::App* app, bool training_flags) {
    app->add_option("--config", config_path, "JSON config file");
    app->add_option("--seed", seed, "seed override");
    app->add_option("--components", components, "e.g. main,attr,pron,auxi,rel");
    app->add_option("--tau", tau, "temperature");
    if (training_flags) {
      app->add_option("--losses", losses, "pos, sem or pos,sem");
      app->add_option("--lambda", lambda, "four weights, e.g. 0.6,0.2,0.2,0.1");
      app->add_option("--epochs", epochs, "training epochs");
    }
  }

  // seed_key names the config field --seed overrides.
  tb::TrainConfig resolve(const char* seed_key) const {
    json j = config_path.empty() ? json::object() : json::parse(slurp(config_path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw eda::ConfigError("config: not a JSON object");
    if (seed) j[seed_key] = *seed;
    if (!components.empty()) j["components"] = components;
    if (!losses.empty()) j["losses"] = losses;
    if (tau) j["tau"] = *tau;
    if (epochs) j["epochs"] = *epochs;
    if (!lambda.empty()) {
      std::vector<double> w;
      std::stringstream in(lambda);
      for (std::string item; std::getline(in, item, ',');) {
        try {
          std::size_t used = 0;
          w.push_back(std::stod(item, &used));
          if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
          throw eda::ConfigError("--lambda: not a number: \"" + item + "\"");
        }
      }
      j["lambda"] = w;
    }
    tb::TrainConfig c = tb::train_config_from_json(j);
    log(Level::kInfo, "config " + tb::to_json(c).dump());
    return c;
  }
};

tb::EvalMode parse_mode(const std::string& s) {
  if (s == "regular") return tb::EvalMode::kRegular;
  if (s == "masked") return tb::EvalMode::kMasked;
  throw eda::ConfigError("--mode must be regular or masked");
}

json eval_json(const tb::EvalResult& r, const std::string& mode) {
  return {{"mode", mode},
          {"accuracy", r.accuracy},
          {"chance", r.chance},
          {"evaluated", r.evaluated},
          {"correct", r.correct}};
}

// --- subcommands ------------------------------------------------------------

int cmd_decouple(const std::string& in, const std::string& out, bool with_tree) {
  const auto trees = eda::deptree::parse_conllu(slurp(in));
  std::string text;
  for (const auto& tree : trees) {
    const auto c = eda::decouple::decouple_utterance(tree);
    for (const auto& w : c.warnings) log(Level::kWarn, tree.utterance_id() + ": " + w);
    json line = eda::decouple::to_json(c);
    if (with_tree) line["tree"] = eda::deptree::to_json(tree);
    text += line.dump() + "\n";
  }
  emit(out, text);
  log(Level::kInfo, "decoupled " + std::to_string(trees.size()) + " utterances");
  return 0;
}

// Input lines carry a tree under "tree" (decouple --with-tree) or
// "gold_tree" (gen-corpus). Components are recomputed from the tree.
int cmd_mask(const std::string& in, const std::string& out) {
  std::istringstream lines(slurp(in));
  std::string line, text;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw eda::ParseError(line_no, "not JSON");
    const char* key = j.contains("tree") ? "tree" : "gold_tree";
    if (!j.contains(key)) throw eda::ParseError(line_no, "no \"tree\" or \"gold_tree\" field");
    eda::deptree::DependencyTree tree;
    try {
      tree = eda::deptree::tree_from_json(j[key]);
    } catch (const nlohmann::json::exception& e) {
      throw eda::ParseError(line_no, e.what());
    }
    const auto masked =
        eda::decouple::mask_object_name(eda::decouple::decouple_utterance(tree), tree);
    text += json{{"utterance_id", tree.utterance_id()},
                 {"text", masked.text},
                 {"tree", eda::deptree::to_json(masked.tree)},
                 {"components", eda::decouple::to_json(masked.components)}}
                .dump() +
            "\n";
  }
  emit(out, text);
  return 0;
}

int cmd_gen_corpus(const BenchOptions& opt, const std::string& split, const std::string& out) {
  const tb::TrainConfig c = opt.resolve("corpus_seed");
  const tb::Vocab& vocab = tb::default_vocab();
  std::vector<tb::CorpusRecord> corpus;
  if (split == "train") {
    corpus = tb::train_corpus(c, vocab);
  } else if (split == "eval") {
    corpus = tb::eval_corpus(c, vocab);
  } else {
    throw eda::ConfigError("--split must be train or eval");
  }
  emit(out, tb::corpus_to_jsonl(corpus));
  std::size_t n = 0;
  for (const auto& r : corpus) n += r.utterances.size();
  log(Level::kInfo, "wrote " + std::to_string(corpus.size()) + " scenes, " + std::to_string(n) +
                        " utterances");
  return 0;
}

int cmd_train(const BenchOptions& opt, const std::string& out, const std::string& metrics_out) {
  const tb::TrainConfig c = opt.resolve("seed");
  const tb::Vocab& vocab = tb::default_vocab();
  const auto train = tb::train_corpus(c, vocab);
  const auto eval = tb::eval_corpus(c, vocab);
  const int every = std::max(1, c.epochs / 10);
  const auto result = tb::train(c, train, vocab, [&](int epoch, double loss, const tb::ToyModel&) {
    if ((epoch + 1) % every == 0) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "epoch %d loss %.6f", epoch + 1, loss);
      log(Level::kDebug, buf);
    }
  });
  if (!out.empty()) emit(out, tb::to_json(result.model).dump() + "\n");
  const auto reg = tb::evaluate(result.model, eval, tb::EvalMode::kRegular, c.components, vocab,
                                c.loss.tau);
  const auto masked = tb::evaluate(result.model, eval, tb::EvalMode::kMasked, c.components, vocab,
                                   c.loss.tau);
  const json metrics = {{"config", tb::to_json(c)},
                        {"final_loss", result.loss_history.empty() ? 0.0 : result.loss_history.back()},
                        {"loss_history", result.loss_history},
                        {"regular", eval_json(reg, "regular")},
                        {"masked", eval_json(masked, "masked")}};
  emit(metrics_out, metrics.dump(2) + "\n");
  return 0;
}

int cmd_eval(const BenchOptions& opt, const std::string& checkpoint, const std::string& mode,
             const std::string& corpus_path, const std::string& out) {
  const tb::TrainConfig c = opt.resolve("corpus_seed");
  const tb::Vocab& vocab = tb::default_vocab();
  const json cj = json::parse(slurp(checkpoint), nullptr, false);
  if (cj.is_discarded()) throw eda::InvalidInput("checkpoint: not JSON");
  const tb::ToyModel model = tb::model_from_json(cj, vocab);
  const auto corpus = corpus_path.empty() ? tb::eval_corpus(c, vocab)
                                          : tb::corpus_from_jsonl(slurp(corpus_path), vocab);
  const auto r = tb::evaluate(model, corpus, parse_mode(mode), c.components, vocab, c.loss.tau);
  json report = eval_json(r, mode);
  report["components"] = tb::components_string(c.components);
  emit(out, report.dump(2) + "\n");
  return 0;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw eda::ConfigError("--seeds: not an integer: \"" + item + "\"");
    }
  }
  if (out.empty()) throw eda::ConfigError("--seeds is empty");
  return out;
}

int cmd_ablate(const BenchOptions& opt, const std::string& grid, const std::string& seeds,
               const std::string& out) {
  const tb::TrainConfig c = opt.resolve("corpus_seed");
  std::vector<tb::AblationCell> cells;
  if (grid == "loss" || grid == "all") {
    for (auto& cell : tb::loss_grid()) cells.push_back(cell);
  }
  if (grid == "components" || grid == "all") {
    for (auto& cell : tb::component_grid()) cells.push_back(cell);
  }
  if (cells.empty()) throw eda::ConfigError("--grid must be loss, components or all");
  const auto seed_list = parse_seeds(seeds);
  std::vector<tb::CellResult> rows;
  json report = json::array();
  for (const auto& cell : cells) {
    rows.push_back(tb::run_cell(c, cell, seed_list, tb::default_vocab()));
    char buf[160];
    std::snprintf(buf, sizeof buf, "cell %s: regular %.3f masked %.3f (%.0f s)", cell.name.c_str(),
                  rows.back().mean_regular(), rows.back().mean_masked(), rows.back().seconds);
    log(Level::kInfo, buf);
    report.push_back(tb::to_json(rows.back()));
  }
  std::cout << tb::format_table(rows);
  if (!out.empty()) emit(out, report.dump(2) + "\n");
  return 0;
}

// Fixture: {"l_pred": k x l, "p_text": k x l, "expected": x, "tolerance": e}.
int cmd_loss_check(const std::string& fixture) {
  const json j = json::parse(slurp(fixture), nullptr, false);
  if (j.is_discarded()) throw eda::InvalidInput("fixture: not JSON");
  eda::numcore::Matrix l_pred, p_text;
  double expected = 0, tolerance = 0;
  try {
    l_pred = eda::numcore::Matrix::from_rows(j.at("l_pred").get<std::vector<std::vector<double>>>());
    p_text = eda::numcore::Matrix::from_rows(j.at("p_text").get<std::vector<std::vector<double>>>());
    expected = j.at("expected").get<double>();
    tolerance = j.value("tolerance", 1e-12);
  } catch (const nlohmann::json::exception& e) {
    throw eda::InvalidInput(std::string("fixture: ") + e.what());
  }
  eda::numcore::Tape tape;
  const double value = eda::losses::position_loss(tape.constant(l_pred), p_text).value()(0, 0);
  const bool pass = std::fabs(value - expected) <= tolerance;
  std::printf("%.12f\n%s\n", value, pass ? "PASS" : "FAIL");
  return pass ? 0 : 1;
}

// Same order as ToyModel::parameters().
eda::numcore::Var& var_slot(tb::ModelVars& v, std::size_t p) {
  eda::numcore::Var* slots[] = {&v.word, &v.head_word, &v.child_word, &v.empty,
                                &v.w1,   &v.b1,        &v.w2};
  return *slots[p];
}

// Finite differences against reverse mode for the bench loss of a few
// generated utterances, with respect to every parameter matrix.
int cmd_grad_check(std::uint64_t seed, double threshold) {
  const tb::Vocab& vocab = tb::default_vocab();
  tb::CorpusConfig cc;
  cc.seed = seed;
  cc.scenes = 2;
  cc.utterances_per_scene = 1;
  const auto corpus = tb::gen_corpus(cc, vocab);
  const tb::TrainConfig config;
  tb::ToyModel model = tb::ToyModel::init(seed, vocab);
  static const char* names[] = {"word", "head_word", "child_word", "empty", "w1", "b1", "w2"};
  bool pass = true;
  for (const auto& rec : corpus) {
    const auto& u = rec.utterances.at(0);
    const auto desc = tb::object_descriptors(rec.scene, vocab);
    for (std::size_t p = 0; p < model.parameters().size(); ++p) {
      if (std::string(names[p]) == "empty") continue;  // not trained
      eda::numcore::ScalarFn f = [&](eda::numcore::Tape& tape, const eda::numcore::Var& x) {
        tb::ModelVars vars = tb::bind(tape, model, false);
        var_slot(vars, p) = x;
        return tb::utterance_loss(vars, tb::encode_objects(vars, desc), u, rec.scene, vocab, config);
      };
      const auto rep = eda::numcore::fd_check(f, *model.parameters()[p]);
      const bool ok = rep.max_rel_error < threshold;
      pass = pass && ok;
      std::printf("%s %-10s max_rel_error %.3e %s\n", u.utterance_id.c_str(), names[p],
                  rep.max_rel_error, ok ? "ok" : "FAIL");
    }
  }
  std::printf("%s\n", pass ? "PASS" : "FAIL");
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text decoupling, dense alignment losses and a synthetic grounding bench"};
  app.require_subcommand(1);

  std::string in, out, metrics_out, mode = "regular", checkpoint, corpus_path, grid = "all",
                                     seeds = "1,2,3", split = "train", fixture;
  bool with_tree = false;
  std::uint64_t check_seed = 1;
  double threshold = 1e-4;
  BenchOptions bench;

  auto* dec = app.add_subcommand("decouple", "CoNLL-U -> semantic components (JSONL)");
  dec->add_option("input", in, "CoNLL-U file")->required();
  dec->add_option("--out", out, "output JSONL (default stdout)");
  dec->add_flag("--with-tree", with_tree, "embed the tree so the output can be masked");

  auto* msk = app.add_subcommand("mask", "replace the object name by \"object\"");
  msk->add_option("input", in, "JSONL with a tree per line")->required();
  msk->add_option("--out", out, "output JSONL (default stdout)");

  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus (JSONL)");
  bench.add_to(gen, false);
  gen->add_option("--split", split, "train or eval");
  gen->add_option("--out", out, "output JSONL (default stdout)");

  auto* tr = app.add_subcommand("train", "train a bench model and report metrics");
  bench.add_to(tr, true);
  tr->add_option("--out", out, "checkpoint path");
  tr->add_option("--metrics", metrics_out, "metrics JSON (default stdout)");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  bench.add_to(ev, false);
  ev->add_option("--checkpoint", checkpoint, "checkpoint JSON")->required();
  ev->add_option("--mode", mode, "regular or masked");
  ev->add_option("--corpus", corpus_path, "corpus JSONL (default: the config's eval corpus)");
  ev->add_option("--out", out, "report JSON (default stdout)");

  auto* abl = app.add_subcommand("ablate", "loss and component ablation tables");
  bench.add_to(abl, true);
  abl->add_option("--grid", grid, "loss, components or all");
  abl->add_option("--seeds", seeds, "comma-separated model seeds");
  abl->add_option("--out", out, "report JSON");

  auto* lc = app.add_subcommand("loss-check", "evaluate the position loss on a fixture");
  lc->add_option("fixture", fixture, "fixture JSON")->required();

  auto* gc = app.add_subcommand("grad-check", "finite-difference check of the bench loss");
  gc->add_option("--seed", check_seed, "seed");
  gc->add_option("--threshold", threshold, "maximum relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*dec) return cmd_decouple(in, out, with_tree);
    if (*msk) return cmd_mask(in, out);
    if (*gen) return cmd_gen_corpus(bench, split, out);
    if (*tr) return cmd_train(bench, out, metrics_out);
    if (*ev) return cmd_eval(bench, checkpoint, mode, corpus_path, out);
    if (*abl) return cmd_ablate(bench, grid, seeds, out);
    if (*lc) return cmd_loss_check(fixture);
    if (*gc) return cmd_grad_check(check_seed, threshold);
  } catch (const eda::InvalidInput& e) {
    log(Level::kError, e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    log(Level::kError, e.what());
    return 2;
  } catch (const std::exception& e) {
    log(Level::kError, e.what());
    return 1;
  }
  return 1;
}
