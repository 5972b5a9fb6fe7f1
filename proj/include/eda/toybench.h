#ifndef EDA_TOYBENCH_H_
#define EDA_TOYBENCH_H_

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "eda/align.h"
#include "eda/decouple.h"
#include "eda/deptree.h"
#include "eda/losses.h"
#include "eda/numcore/matrix.h"
#include "eda/numcore/tape.h"
#include "json.hpp"

namespace eda::toybench {

using decouple::ComponentKind;
using numcore::Matrix;
using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Vocabulary

struct RelationWords {
  std::string name;                // "next to"
  std::vector<std::string> words;  // {"next", "to"}
};

// Closed word lists of the benchmark, versioned in data/toy_vocab.json.
struct Vocab {
  int version = 0;
  std::vector<std::string> categories, colors, materials, sizes;
  std::vector<RelationWords> relations;
  std::vector<std::string> determiners, pronouns, adverbs, conjunctions;
  std::string copula, punct, mask;

  // Every word, in a fixed order; index = embedding row.
  std::vector<std::string> words;
  std::uint64_t hash = 0;  // FNV-1a of the canonical JSON dump

  int id(const std::string& word) const;  // throws InvalidInput
  std::size_t size() const { return words.size(); }
  deptree::ControlledGrammar grammar() const;

 private:
  friend Vocab vocab_from_json(const nlohmann::json& j);
  std::map<std::string, int> index_;
};

Vocab vocab_from_json(const nlohmann::json& j);
// The vocabulary compiled into the binary.
const Vocab& default_vocab();

// ---------------------------------------------------------------------------
// Scenes

struct Box {
  std::array<double, 3> center{};
  std::array<double, 3> size{};  // w, h, d along x, y, z

  bool operator==(const Box&) const = default;
};

double box_iou(const Box& a, const Box& b);

struct ToyObject {
  int category = 0;
  int color = 0;
  int material = 0;
  int size_tag = 0;
  Box box;

  bool operator==(const ToyObject&) const = default;
};

struct ToyScene {
  std::string scene_id;
  std::vector<ToyObject> objects;
  bool multiple = false;  // the focus category occurs at least twice
  int focus = 0;          // object the scene was built around

  bool operator==(const ToyScene&) const = default;
};

struct SceneConfig {
  int min_objects = 4;
  int max_objects = 12;
  double multiple_prob = 0.8;
  int max_same_category = 4;
  double max_pair_iou = 0.3;

  void validate(const Vocab& vocab) const;  // throws ConfigError
};

ToyScene gen_scene(std::uint64_t seed, const SceneConfig& config, const Vocab& vocab,
                   std::string scene_id = "scene");

// Whether relation r (index into vocab.relations) holds from a to b, e.g.
// "a is under b".
bool relation_holds(const Vocab& vocab, int r, const ToyObject& a, const ToyObject& b);

// ---------------------------------------------------------------------------
// Utterances

// What an utterance says about its target.
struct Description {
  int category = -1;  // -1 when the name is masked
  std::optional<int> color, material, size_tag;
  int relation = -1;  // index into vocab.relations, -1 for none
  int aux_category = -1;
  std::optional<int> aux_color;

  bool operator==(const Description&) const = default;
};

// Objects of the scene matching the description.
std::vector<int> semantic_filter(const ToyScene& scene, const Description& d, const Vocab& vocab);

struct ToyUtterance {
  std::string utterance_id;
  std::string text;
  deptree::DependencyTree gold_tree;
  decouple::SemanticComponents gold_components;
  Description description;
  int target = -1;
  int auxiliary = -1;
  std::string masked_text;
  deptree::DependencyTree masked_tree;
  decouple::SemanticComponents masked_components;
  // The description minus the name still singles out the target.
  bool masked_unique = false;
};

// Picks a random description that singles out target, renders it with one of
// the sentence templates and builds the gold tree and components. Returns
// nullopt when no description is unique (identical twins).
std::optional<ToyUtterance> gen_utterance(const ToyScene& scene, int target, Rng& rng,
                                          const Vocab& vocab, std::string utterance_id);

// ---------------------------------------------------------------------------
// Corpus

struct CorpusRecord {
  ToyScene scene;
  std::vector<ToyUtterance> utterances;
};

struct CorpusConfig {
  std::uint64_t seed = 1;
  int scenes = 500;
  int utterances_per_scene = 4;
  SceneConfig scene;
  std::string prefix = "train";
};

std::vector<CorpusRecord> gen_corpus(const CorpusConfig& config, const Vocab& vocab);

// One JSON line per (scene, utterance).
nlohmann::json to_json(const ToyScene& scene);
ToyScene scene_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ToyUtterance& u, const ToyScene& scene);
std::string corpus_to_jsonl(const std::vector<CorpusRecord>& corpus);
std::vector<CorpusRecord> corpus_from_jsonl(const std::string& text, const Vocab& vocab);

// ---------------------------------------------------------------------------
// Model

inline constexpr int kFeatureDim = 64;

// Per-object input: one-hots of category, color, material and size, the
// normalized box, and for every (relation, category) pair whether the object
// stands in that relation to some object of that category.
Matrix object_descriptors(const ToyScene& scene, const Vocab& vocab);
std::size_t descriptor_dim(const Vocab& vocab);

struct ToyModel {
  Matrix word;       // V x d
  Matrix head_word;  // (V + 1) x d; last row stands for "no head"
  Matrix child_word; // V x d; summed over a token's dependents
  Matrix empty;      // 1 x d feature of the empty slot
  Matrix w1, b1;     // descriptor -> hidden
  Matrix w2;         // hidden -> d, no bias
  std::uint64_t seed = 0;
  std::uint64_t vocab_hash = 0;

  static ToyModel init(std::uint64_t seed, const Vocab& vocab, int hidden = 64);
  std::size_t parameter_count() const;
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
};

nlohmann::json to_json(const ToyModel& model);
ToyModel model_from_json(const nlohmann::json& j, const Vocab& vocab);

struct ModelVars {
  numcore::Var word, head_word, child_word, empty, w1, b1, w2;
};
ModelVars bind(numcore::Tape& tape, const ToyModel& model, bool trainable);

// Unit-norm object features, k x d.
numcore::Var encode_objects(const ModelVars& vars, const Matrix& descriptors);
// Unit-norm text features, (n + 1) x d; the last row is the empty slot.
// Token j gets E[w] + E[w] * H[head] + sum of C[w_c] over its dependents c.
numcore::Var encode_text(const ModelVars& vars, const deptree::DependencyTree& tree,
                         const Vocab& vocab);

struct FeatureBundle {
  Matrix o, t, l_pred;
};
FeatureBundle forward(const ToyModel& model, const ToyScene& scene,
                      const deptree::DependencyTree& tree, const Vocab& vocab, double tau);

// ---------------------------------------------------------------------------
// Training and evaluation

inline const std::vector<ComponentKind> kAllComponents = {
    ComponentKind::kMainObject, ComponentKind::kAttribute, ComponentKind::kPronoun,
    ComponentKind::kAuxiliaryObject, ComponentKind::kRelationship};

// Drops every kind not listed (its tokens become None).
decouple::SemanticComponents restrict_components(const decouple::SemanticComponents& c,
                                                 const std::vector<ComponentKind>& enabled);

struct TrainConfig {
  std::uint64_t seed = 1;         // model initialization
  std::uint64_t corpus_seed = 1;  // scenes and utterances
  int train_scenes = 500;
  int eval_scenes = 200;
  int utterances_per_scene = 4;
  int epochs = 1200;
  double lr = 0.03;
  int hidden = 64;
  std::vector<ComponentKind> components = kAllComponents;
  bool use_position_loss = true;
  bool use_semantic_loss = true;
  // Upper bound on utterance length; each utterance uses l = tokens + 1.
  std::size_t capacity = deptree::kCapacity;
  // No decoder stack here, so the total loss is not divided by 7.
  losses::LossConfig loss = [] {
    losses::LossConfig c;
    c.decoder_layers = 0;
    return c;
  }();
  align::AlignmentWeights lambda;
  SceneConfig scene;

  void validate() const;  // throws ConfigError
};

// Unknown keys are rejected with ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& c);

// Loss of one utterance given the scene's object features.
numcore::Var utterance_loss(const ModelVars& vars, const numcore::Var& objects,
                            const ToyUtterance& u, const ToyScene& scene, const Vocab& vocab,
                            const TrainConfig& config);

struct TrainResult {
  ToyModel model;
  std::vector<double> loss_history;  // mean loss before each epoch's step
};

// Called after each epoch's step with the epoch index and its mean loss.
using EpochCallback = std::function<void(int epoch, double loss, const ToyModel& model)>;

TrainResult train(const TrainConfig& config, const std::vector<CorpusRecord>& corpus,
                  const Vocab& vocab, const EpochCallback& on_epoch = {});

enum class EvalMode { kRegular, kMasked };

struct EvalResult {
  double accuracy = 0;
  double chance = 0;  // mean of 1 / k over the evaluated utterances
  int evaluated = 0;
  int correct = 0;
};

// Grounding accuracy with select_target over the enabled components. Masked
// mode uses the name-masked utterances and skips those whose masked
// description is not unique.
EvalResult evaluate(const ToyModel& model, const std::vector<CorpusRecord>& corpus,
                    EvalMode mode, const std::vector<ComponentKind>& components,
                    const Vocab& vocab, double tau);

// Train and evaluation corpora of a config.
std::vector<CorpusRecord> train_corpus(const TrainConfig& c, const Vocab& vocab);
std::vector<CorpusRecord> eval_corpus(const TrainConfig& c, const Vocab& vocab);

struct AblationCell {
  std::string name;
  std::vector<ComponentKind> components;
  bool use_position_loss = true;
  bool use_semantic_loss = true;
};

struct CellResult {
  AblationCell cell;
  std::vector<std::uint64_t> seeds;
  std::vector<double> regular, masked;
  double seconds = 0;

  double mean_regular() const;
  double sd_regular() const;
  double mean_masked() const;
  double sd_masked() const;
};

// The loss rows and component rows of the ablation tables.
std::vector<AblationCell> loss_grid();
std::vector<AblationCell> component_grid();

CellResult run_cell(const TrainConfig& base, const AblationCell& cell,
                    const std::vector<std::uint64_t>& seeds, const Vocab& vocab);

nlohmann::json to_json(const CellResult& r);
// Aligned columns: name, losses, components, regular mean +- sd, masked.
std::string format_table(const std::vector<CellResult>& rows);

std::string components_string(const std::vector<ComponentKind>& kinds);
// "main,attr,pron,auxi,rel" -> kinds; throws ConfigError.
std::vector<ComponentKind> parse_components(const std::string& s);

}  // namespace eda::toybench

#endif  // EDA_TOYBENCH_H_
