#include <algorithm>
#include <cstdio>
#include <sstream>

#include "eda/error.h"
#include "eda/toybench.h"
#include "random.h"

namespace eda::toybench {

using decouple::SemanticComponents;
using nlohmann::json;

std::vector<int> semantic_filter(const ToyScene& scene, const Description& d, const Vocab& vocab) {
  std::vector<int> out;
  const int n = static_cast<int>(scene.objects.size());
  for (int i = 0; i < n; ++i) {
    const ToyObject& o = scene.objects[i];
    if (d.category >= 0 && o.category != d.category) continue;
    if (d.color && o.color != *d.color) continue;
    if (d.material && o.material != *d.material) continue;
    if (d.size_tag && o.size_tag != *d.size_tag) continue;
    if (d.relation >= 0) {
      bool found = false;
      for (int j = 0; j < n && !found; ++j) {
        const ToyObject& a = scene.objects[j];
        found = j != i && a.category == d.aux_category && (!d.aux_color || a.color == *d.aux_color) &&
                relation_holds(vocab, d.relation, o, a);
      }
      if (!found) continue;
    }
    out.push_back(i);
  }
  return out;
}

namespace {

// Token list with gold kinds. Owners are recorded as symbolic slots and
// resolved once the main and auxiliary heads are placed.
class Builder {
 public:
  enum Owner { kNoOwner, kMainOwner, kAuxOwner };

  void add(const std::string& w, ComponentKind kind, Owner owner = kNoOwner) {
    words_.push_back(w);
    kinds_.push_back(kind);
    owners_.push_back(owner);
  }
  void main_here(const std::string& w) {
    main_ = size();
    add(w, ComponentKind::kMainObject);
  }
  void aux_here(const std::string& w) {
    aux_ = size();
    add(w, ComponentKind::kAuxiliaryObject, kMainOwner);
  }
  void pronoun(const std::string& w) {
    pronouns_.push_back(size());
    add(w, ComponentKind::kPronoun);
  }
  int size() const { return static_cast<int>(words_.size()); }

  std::string text() const {
    std::string s;
    for (const auto& w : words_) s += (s.empty() ? "" : " ") + w;
    return s;
  }

  SemanticComponents components(const std::string& id) const {
    SemanticComponents c;
    c.utterance_id = id;
    c.assignment = kinds_;
    c.main_head = main_;
    if (aux_ >= 0) c.auxi_heads = {aux_};
    for (int p : pronouns_) c.pronoun_links[p] = main_;
    for (Owner o : owners_) c.owner.push_back(o == kMainOwner ? main_ : o == kAuxOwner ? aux_ : -1);
    return c;
  }

 private:
  std::vector<std::string> words_;
  std::vector<ComponentKind> kinds_;
  std::vector<Owner> owners_;
  std::vector<int> pronouns_;
  int main_ = -1;
  int aux_ = -1;
};

std::vector<std::string> attribute_words(const Description& d, const Vocab& v) {
  std::vector<std::string> out;
  if (d.size_tag) out.push_back(v.sizes[*d.size_tag]);
  if (d.color) out.push_back(v.colors[*d.color]);
  if (d.material) out.push_back(v.materials[*d.material]);
  return out;
}

enum class Template {
  kSingle,        // the brown chair next to the table .
  kDeictic,       // this is a brown chair next to the table .
  kRelationNext,  // the brown chair . it is directly under the table .
  kAttributeNext, // the chair next to the table . it is brown and wooden .
  kBoth,          // the chair . it is brown . it is under the table .
  kBarePronoun,   // the brown chair next to the table . it .
};

}  // namespace

std::optional<ToyUtterance> gen_utterance(const ToyScene& scene, int target, Rng& rng,
                                          const Vocab& vocab, std::string utterance_id) {
  const int n = static_cast<int>(scene.objects.size());
  if (target < 0 || target >= n) throw InvalidInput("target index out of range");
  const ToyObject& t = scene.objects[target];

  std::vector<int> category_count(vocab.categories.size(), 0);
  for (const auto& o : scene.objects) ++category_count[o.category];

  // Relation options: an auxiliary object whose category is unique in the
  // scene and differs from the target's.
  struct RelOption {
    int relation = -1, aux = -1;
    bool aux_color = false;
  };
  std::vector<RelOption> rel_options = {RelOption{}};
  for (int j = 0; j < n; ++j) {
    const ToyObject& a = scene.objects[j];
    if (j == target || a.category == t.category || category_count[a.category] != 1) continue;
    for (int r = 0; r < static_cast<int>(vocab.relations.size()); ++r) {
      if (!relation_holds(vocab, r, t, a)) continue;
      rel_options.push_back({r, j, false});
      rel_options.push_back({r, j, true});
    }
  }

  std::vector<std::pair<Description, int>> options;
  for (int mask = 0; mask < 8; ++mask) {
    for (const RelOption& ro : rel_options) {
      Description d;
      d.category = t.category;
      if (mask & 1) d.size_tag = t.size_tag;
      if (mask & 2) d.color = t.color;
      if (mask & 4) d.material = t.material;
      if (ro.relation >= 0) {
        d.relation = ro.relation;
        d.aux_category = scene.objects[ro.aux].category;
        if (ro.aux_color) d.aux_color = scene.objects[ro.aux].color;
      }
      if (semantic_filter(scene, d, vocab) == std::vector<int>{target}) {
        options.emplace_back(d, ro.aux);
      }
    }
  }
  if (options.empty()) return std::nullopt;
  const auto& [desc, aux] = rnd::pick(options, rng);

  const std::vector<std::string> attrs = attribute_words(desc, vocab);
  const bool has_rel = desc.relation >= 0;
  std::vector<Template> templates = {Template::kSingle, Template::kDeictic,
                                     Template::kBarePronoun};
  if (has_rel) templates.push_back(Template::kRelationNext);
  if (!attrs.empty()) templates.push_back(Template::kAttributeNext);
  if (has_rel && !attrs.empty()) templates.push_back(Template::kBoth);
  const Template tmpl = rnd::pick(templates, rng);

  auto det = [&] { return rnd::pick(vocab.determiners, rng); };
  auto pron = [&] { return rnd::pick(vocab.pronouns, rng); };
  const std::string& category = vocab.categories[t.category];

  Builder b;
  auto noun_phrase = [&](const std::vector<std::string>& adjectives) {
    b.add(det(), ComponentKind::kNone);
    for (const auto& a : adjectives) b.add(a, ComponentKind::kAttribute, Builder::kMainOwner);
    b.main_here(category);
  };
  auto relation = [&] {
    for (const auto& w : vocab.relations[desc.relation].words) {
      b.add(w, ComponentKind::kRelationship, Builder::kMainOwner);
    }
    b.add(det(), ComponentKind::kNone);
    if (desc.aux_color) {
      b.add(vocab.colors[*desc.aux_color], ComponentKind::kAuxiliaryObject, Builder::kAuxOwner);
    }
    b.aux_here(vocab.categories[desc.aux_category]);
  };
  auto period = [&] { b.add(vocab.punct, ComponentKind::kNone); };
  auto copula_clause = [&] {
    b.pronoun(pron());
    b.add(vocab.copula, ComponentKind::kNone);
  };
  auto relation_sentence = [&] {
    copula_clause();
    if (rnd::uniform(rng) < 0.5) {
      b.add(rnd::pick(vocab.adverbs, rng), ComponentKind::kRelationship, Builder::kMainOwner);
    }
    relation();
    period();
  };
  // "it is brown and wooden ."; at most two adjectives fit the predicate.
  auto attribute_sentence = [&](const std::vector<std::string>& adjectives) {
    copula_clause();
    b.add(adjectives[0], ComponentKind::kAttribute, Builder::kMainOwner);
    if (adjectives.size() > 1) {
      b.add(rnd::pick(vocab.conjunctions, rng), ComponentKind::kNone);
      b.add(adjectives[1], ComponentKind::kAttribute, Builder::kMainOwner);
    }
    period();
  };
  auto split = [&] {
    // Leading adjectives stay in the noun phrase, the last two move.
    const std::size_t keep = attrs.size() > 2 ? attrs.size() - 2 : 0;
    return std::make_pair(std::vector<std::string>(attrs.begin(), attrs.begin() + keep),
                          std::vector<std::string>(attrs.begin() + keep, attrs.end()));
  };

  switch (tmpl) {
    case Template::kSingle:
    case Template::kBarePronoun:
      noun_phrase(attrs);
      if (has_rel) relation();
      period();
      if (tmpl == Template::kBarePronoun) {
        b.pronoun(pron());
        period();
      }
      break;
    case Template::kDeictic:
      b.pronoun(rnd::pick(vocab.pronouns, rng));
      b.add(vocab.copula, ComponentKind::kNone);
      noun_phrase(attrs);
      if (has_rel) relation();
      period();
      break;
    case Template::kRelationNext:
      noun_phrase(attrs);
      period();
      relation_sentence();
      break;
    case Template::kAttributeNext: {
      auto [front, back] = split();
      noun_phrase(front);
      if (has_rel) relation();
      period();
      attribute_sentence(back);
      break;
    }
    case Template::kBoth: {
      auto [front, back] = split();
      noun_phrase(front);
      period();
      attribute_sentence(back);
      relation_sentence();
      break;
    }
  }

  ToyUtterance u;
  u.utterance_id = std::move(utterance_id);
  u.text = b.text();
  u.gold_tree = deptree::parse_controlled(u.text, vocab.grammar(), u.utterance_id);
  u.gold_components = b.components(u.utterance_id);
  u.description = desc;
  u.target = target;
  u.auxiliary = has_rel ? aux : -1;
  const decouple::MaskedUtterance masked = decouple::mask_object_name(u.gold_components, u.gold_tree);
  u.masked_text = masked.text;
  u.masked_tree = masked.tree;
  u.masked_components = masked.components;
  Description nameless = desc;
  nameless.category = -1;
  u.masked_unique = semantic_filter(scene, nameless, vocab) == std::vector<int>{target};
  return u;
}

std::vector<CorpusRecord> gen_corpus(const CorpusConfig& config, const Vocab& vocab) {
  if (config.scenes < 0) throw ConfigError("scenes must be >= 0");
  if (config.utterances_per_scene < 1) throw ConfigError("utterances_per_scene must be >= 1");
  std::vector<CorpusRecord> out;
  out.reserve(config.scenes);
  for (int s = 0; s < config.scenes; ++s) {
    const std::uint64_t scene_seed = rnd::derive(config.seed, static_cast<std::uint64_t>(s));
    char id[64];
    std::snprintf(id, sizeof id, "%s-%05d", config.prefix.c_str(), s);
    CorpusRecord rec;
    rec.scene = gen_scene(scene_seed, config.scene, vocab, id);
    Rng rng(rnd::derive(scene_seed, 1));
    const int focus_cat = rec.scene.objects[rec.scene.focus].category;
    std::vector<int> targets;
    for (int i = 0; i < static_cast<int>(rec.scene.objects.size()); ++i) {
      if (rec.scene.objects[i].category == focus_cat) targets.push_back(i);
    }
    rnd::shuffle(targets, rng);
    for (int u = 0; u < config.utterances_per_scene; ++u) {
      const int target = targets[u % targets.size()];
      auto utt = gen_utterance(rec.scene, target, rng, vocab, std::string(id) + "-u" + std::to_string(u));
      if (utt) rec.utterances.push_back(std::move(*utt));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json opt(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }
std::optional<int> opt_from(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<int>(j.get<int>());
}

json to_json(const Description& d) {
  return {{"category", d.category},  {"color", opt(d.color)},
          {"material", opt(d.material)}, {"size", opt(d.size_tag)},
          {"relation", d.relation},  {"aux_category", d.aux_category},
          {"aux_color", opt(d.aux_color)}};
}

Description description_from_json(const json& j) {
  Description d;
  d.category = j.at("category").get<int>();
  d.color = opt_from(j.at("color"));
  d.material = opt_from(j.at("material"));
  d.size_tag = opt_from(j.at("size"));
  d.relation = j.at("relation").get<int>();
  d.aux_category = j.at("aux_category").get<int>();
  d.aux_color = opt_from(j.at("aux_color"));
  return d;
}

}  // namespace

json to_json(const ToyScene& scene) {
  json objects = json::array();
  for (const auto& o : scene.objects) {
    objects.push_back({{"category", o.category},
                       {"color", o.color},
                       {"material", o.material},
                       {"size", o.size_tag},
                       {"center", o.box.center},
                       {"extent", o.box.size}});
  }
  return {{"scene_id", scene.scene_id},
          {"multiple", scene.multiple},
          {"focus", scene.focus},
          {"objects", objects}};
}

ToyScene scene_from_json(const json& j) {
  ToyScene s;
  try {
    s.scene_id = j.at("scene_id").get<std::string>();
    s.multiple = j.at("multiple").get<bool>();
    s.focus = j.at("focus").get<int>();
    for (const auto& o : j.at("objects")) {
      ToyObject t;
      t.category = o.at("category").get<int>();
      t.color = o.at("color").get<int>();
      t.material = o.at("material").get<int>();
      t.size_tag = o.at("size").get<int>();
      t.box.center = o.at("center").get<std::array<double, 3>>();
      t.box.size = o.at("extent").get<std::array<double, 3>>();
      s.objects.push_back(t);
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("scene record: ") + e.what());
  }
  return s;
}

json to_json(const ToyUtterance& u, const ToyScene& scene) {
  return {{"scene", to_json(scene)},
          {"utterance_id", u.utterance_id},
          {"text", u.text},
          {"target", u.target},
          {"auxiliary", u.auxiliary},
          {"description", to_json(u.description)},
          {"gold_tree", deptree::to_json(u.gold_tree)},
          {"gold_components", decouple::to_json(u.gold_components)},
          {"masked_text", u.masked_text},
          {"masked_tree", deptree::to_json(u.masked_tree)},
          {"masked_components", decouple::to_json(u.masked_components)},
          {"masked_unique", u.masked_unique}};
}

std::string corpus_to_jsonl(const std::vector<CorpusRecord>& corpus) {
  std::string out;
  for (const auto& rec : corpus) {
    for (const auto& u : rec.utterances) {
      out += to_json(u, rec.scene).dump();
      out += '\n';
    }
  }
  return out;
}

std::vector<CorpusRecord> corpus_from_jsonl(const std::string& text, const Vocab& vocab) {
  std::vector<CorpusRecord> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      ToyScene scene = scene_from_json(j.at("scene"));
      for (const auto& o : scene.objects) {
        if (o.category < 0 || o.category >= static_cast<int>(vocab.categories.size())) {
          throw InvalidInput("category index out of range");
        }
      }
      if (out.empty() || out.back().scene.scene_id != scene.scene_id) {
        out.push_back({std::move(scene), {}});
      }
      ToyUtterance u;
      u.utterance_id = j.at("utterance_id").get<std::string>();
      u.text = j.at("text").get<std::string>();
      u.target = j.at("target").get<int>();
      u.auxiliary = j.at("auxiliary").get<int>();
      u.description = description_from_json(j.at("description"));
      u.gold_tree = deptree::tree_from_json(j.at("gold_tree"));
      u.gold_components = decouple::components_from_json(j.at("gold_components"));
      u.masked_text = j.at("masked_text").get<std::string>();
      u.masked_tree = deptree::tree_from_json(j.at("masked_tree"));
      u.masked_components = decouple::components_from_json(j.at("masked_components"));
      u.masked_unique = j.at("masked_unique").get<bool>();
      const int k = static_cast<int>(out.back().scene.objects.size());
      if (u.target < 0 || u.target >= k || u.auxiliary >= k) {
        throw InvalidInput("target or auxiliary index out of range");
      }
      out.back().utterances.push_back(std::move(u));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const InvalidInput& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

}  // namespace eda::toybench
