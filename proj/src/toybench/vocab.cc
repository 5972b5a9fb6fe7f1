#include <set>

#include "eda/error.h"
#include "eda/toybench.h"
#include "vocab_data.h"

namespace eda::toybench {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> strings(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array()) {
    throw ConfigError(std::string("vocab: missing list \"") + key + "\"");
  }
  auto out = j[key].get<std::vector<std::string>>();
  if (out.empty()) throw ConfigError(std::string("vocab: empty list \"") + key + "\"");
  return out;
}

std::string string_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw ConfigError(std::string("vocab: missing string \"") + key + "\"");
  }
  return j[key].get<std::string>();
}

}  // namespace

Vocab vocab_from_json(const nlohmann::json& j) {
  Vocab v;
  if (!j.is_object()) throw ConfigError("vocab: expected an object");
  v.version = j.value("version", 0);
  v.categories = strings(j, "categories");
  v.colors = strings(j, "colors");
  v.materials = strings(j, "materials");
  v.sizes = strings(j, "sizes");
  v.determiners = strings(j, "determiners");
  v.pronouns = strings(j, "pronouns");
  v.adverbs = strings(j, "adverbs");
  v.conjunctions = strings(j, "conjunctions");
  v.copula = string_field(j, "copula");
  v.punct = string_field(j, "punct");
  v.mask = string_field(j, "mask");
  if (!j.contains("relations") || !j["relations"].is_array() || j["relations"].empty()) {
    throw ConfigError("vocab: missing relations");
  }
  for (const auto& r : j["relations"]) {
    RelationWords rw;
    try {
      rw = {r.at("name").get<std::string>(), r.at("words").get<std::vector<std::string>>()};
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("vocab: relations need \"name\" and \"words\"");
    }
    if (rw.words.empty()) throw ConfigError("vocab: relation without words");
    v.relations.push_back(std::move(rw));
  }

  auto add = [&](const std::string& w) {
    if (!v.index_.count(w)) {
      v.index_[w] = static_cast<int>(v.words.size());
      v.words.push_back(w);
    }
  };
  for (const auto* list : {&v.categories, &v.colors, &v.materials, &v.sizes}) {
    for (const auto& w : *list) add(w);
  }
  for (const auto& r : v.relations) {
    for (const auto& w : r.words) add(w);
  }
  for (const auto* list : {&v.determiners, &v.pronouns, &v.adverbs, &v.conjunctions}) {
    for (const auto& w : *list) add(w);
  }
  add(v.copula);
  add(v.punct);
  add(v.mask);

  // Attribute words must be distinct from each other and from the nouns, or
  // the semantic filter and the parser would disagree.
  std::set<std::string> seen;
  for (const auto* list : {&v.categories, &v.colors, &v.materials, &v.sizes}) {
    for (const auto& w : *list) {
      if (!seen.insert(w).second) throw ConfigError("vocab: duplicate word \"" + w + "\"");
    }
  }
  if (seen.count(v.mask)) throw ConfigError("vocab: mask word collides with a content word");
  v.hash = fnv1a(j.dump());
  return v;
}

const Vocab& default_vocab() {
  static const Vocab vocab = vocab_from_json(nlohmann::json::parse(kDefaultVocabJson));
  return vocab;
}

int Vocab::id(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) throw InvalidInput("word not in vocabulary: \"" + word + "\"");
  return it->second;
}

deptree::ControlledGrammar Vocab::grammar() const {
  deptree::ControlledGrammar g;
  g.determiners = {determiners.begin(), determiners.end()};
  g.pronouns = {pronouns.begin(), pronouns.end()};
  g.copulas = {copula};
  for (const auto* list : {&colors, &materials, &sizes}) g.adjectives.insert(list->begin(), list->end());
  g.nouns = {categories.begin(), categories.end()};
  g.nouns.insert(mask);
  g.adverbs = {adverbs.begin(), adverbs.end()};
  g.conjunctions = {conjunctions.begin(), conjunctions.end()};
  for (const auto& r : relations) g.relations.push_back(r.words);
  return g;
}

}  // namespace eda::toybench
