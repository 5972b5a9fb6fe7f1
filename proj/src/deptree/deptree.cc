#include "eda/deptree.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include "eda/error.h"

namespace eda::deptree {

namespace {

constexpr std::string_view kPosNames[] = {"NOUN", "ADJ", "ADP", "VERB",
                                          "PRON", "DET", "NUM", "OTHER"};

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool has_space(std::string_view s) {
  return std::any_of(s.begin(), s.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

void validate_sentence(const Sentence& s, int sentence_index) {
  const std::string where = "sentence " + std::to_string(sentence_index) + ": ";
  if (s.empty()) throw StructuralError(where + "empty sentence");
  const int n = static_cast<int>(s.size());
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const Token& t = s[i];
    if (t.index != i) throw StructuralError(where + "token indices are not contiguous");
    if (t.surface.empty() || has_space(t.surface)) {
      throw StructuralError(where + "token " + std::to_string(i) + " has an invalid surface");
    }
    if (t.head == kRoot) {
      ++roots;
    } else if (t.head < 0 || t.head >= n || t.head == i) {
      throw StructuralError(where + "token " + std::to_string(i) + " has head out of range");
    }
  }
  if (roots != 1) {
    throw StructuralError(where + "expected exactly one root, found " + std::to_string(roots));
  }
  for (int i = 0; i < n; ++i) {
    int cur = i;
    for (int steps = 0; cur != kRoot; ++steps) {
      if (steps > n) throw StructuralError(where + "cyclic heads at token " + std::to_string(i));
      cur = s[cur].head;
    }
  }
}

template <typename T>
bool parse_int(std::string_view s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t p = s.find(sep, start);
    if (p == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, p - start));
    start = p + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// "# key = value" comment; returns true when the key matches.
bool comment_value(std::string_view line, std::string_view key, std::string& value) {
  std::string_view body = trim(line.substr(1));
  if (body.substr(0, key.size()) != key) return false;
  body = trim(body.substr(key.size()));
  if (body.empty() || body.front() != '=') return false;
  value = std::string(trim(body.substr(1)));
  return true;
}

}  // namespace

std::string_view pos_name(Pos pos) { return kPosNames[static_cast<int>(pos)]; }

Pos pos_from_upos(std::string_view upos) {
  if (upos == "NOUN" || upos == "PROPN") return Pos::kNoun;
  if (upos == "ADJ") return Pos::kAdj;
  if (upos == "ADP") return Pos::kAdp;
  if (upos == "VERB" || upos == "AUX") return Pos::kVerb;
  if (upos == "PRON") return Pos::kPron;
  if (upos == "DET") return Pos::kDet;
  if (upos == "NUM") return Pos::kNum;
  return Pos::kOther;
}

DependencyTree::DependencyTree(std::string utterance_id, std::vector<Sentence> sentences,
                               std::size_t capacity)
    : utterance_id_(std::move(utterance_id)), sentences_(std::move(sentences)) {
  std::size_t total = 0;
  for (std::size_t s = 0; s < sentences_.size(); ++s) {
    validate_sentence(sentences_[s], static_cast<int>(s));
    total += sentences_[s].size();
  }
  if (capacity == 0 || total > capacity - 1) {
    throw CapacityError(utterance_id_ + ": " + std::to_string(total) +
                        " tokens exceed capacity " + std::to_string(capacity) +
                        " (one slot is reserved)");
  }
  for (std::size_t s = 0; s < sentences_.size(); ++s) {
    offsets_.push_back(static_cast<int>(flat_.size()));
    for (std::size_t i = 0; i < sentences_[s].size(); ++i) {
      flat_.emplace_back(static_cast<int>(s), static_cast<int>(i));
      sentence_of_.push_back(static_cast<int>(s));
    }
  }
}

const Token& DependencyTree::token(int global) const {
  const auto [s, i] = flat_.at(global);
  return sentences_[s][i];
}

int DependencyTree::global_head(int global) const {
  const Token& t = token(global);
  return t.head == kRoot ? kRoot : offsets_[sentence_of_[global]] + t.head;
}

std::vector<int> DependencyTree::children(int global) const {
  std::vector<int> out;
  const int s = sentence_of_[global];
  const int begin = offsets_[s];
  const int end = begin + static_cast<int>(sentences_[s].size());
  for (int g = begin; g < end; ++g) {
    if (global_head(g) == global) out.push_back(g);
  }
  return out;
}

int DependencyTree::sentence_root(int sentence) const {
  const Sentence& s = sentences_.at(sentence);
  for (const Token& t : s) {
    if (t.head == kRoot) return offsets_[sentence] + t.index;
  }
  return kRoot;  // unreachable for validated trees
}

int DependencyTree::depth(int global) const {
  int d = 0;
  for (int h = global_head(global); h != kRoot; h = global_head(h)) ++d;
  return d;
}

std::vector<std::string> DependencyTree::surfaces() const {
  std::vector<std::string> out;
  out.reserve(flat_.size());
  for (std::size_t g = 0; g < flat_.size(); ++g) out.push_back(token(static_cast<int>(g)).surface);
  return out;
}

std::string DependencyTree::text() const {
  std::string out;
  for (std::size_t g = 0; g < flat_.size(); ++g) {
    if (g) out += ' ';
    out += token(static_cast<int>(g)).surface;
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view utterance) {
  static constexpr std::string_view kPunct = ".,;:!?()\"";
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : utterance) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (kPunct.find(c) != std::string_view::npos) {
      flush();
      out.emplace_back(1, c);
    } else {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  flush();
  return out;
}

std::vector<DependencyTree> parse_conllu(std::string_view text, std::size_t capacity) {
  struct Pending {
    std::string key;
    std::string id;
    std::vector<Sentence> sentences;
  };
  std::vector<DependencyTree> out;
  std::vector<Pending> pending;

  std::string newdoc, utt_id, sent_id;
  Sentence current;
  int line_no = 0;
  int sentence_line = 0;
  int auto_id = 0;

  auto finish_sentence = [&] {
    if (current.empty()) {
      utt_id.clear();
      sent_id.clear();
      return;
    }
    std::string key, id;
    if (!utt_id.empty()) {
      key = "u:" + utt_id;
      id = utt_id;
    } else if (!newdoc.empty()) {
      key = "d:" + newdoc;
      id = newdoc;
    } else {
      key = "s:" + std::to_string(auto_id);
      id = !sent_id.empty() ? sent_id : "utt-" + std::to_string(auto_id);
    }
    ++auto_id;
    // Heads must form a tree before grouping so the error names the line.
    try {
      validate_sentence(current, 0);
    } catch (const StructuralError& e) {
      throw StructuralError("sentence starting at line " + std::to_string(sentence_line) +
                            ": " + e.what());
    }
    if (!pending.empty() && pending.back().key == key) {
      pending.back().sentences.push_back(std::move(current));
    } else {
      pending.push_back(Pending{key, id, {std::move(current)}});
    }
    current.clear();
    utt_id.clear();
    sent_id.clear();
  };

  for (std::string_view raw : split(text, '\n')) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (trim(raw).empty()) {
      finish_sentence();
      continue;
    }
    if (raw.front() == '#') {
      std::string v;
      if (comment_value(raw, "newdoc id", v)) newdoc = v;
      else if (comment_value(raw, "utterance_id", v)) utt_id = v;
      else if (comment_value(raw, "sent_id", v)) sent_id = v;
      continue;
    }
    const auto cols = split(raw, '\t');
    if (cols.size() != 10) {
      throw ParseError(line_no, "expected 10 tab-separated columns, found " +
                                    std::to_string(cols.size()));
    }
    const std::string_view id_col = cols[0];
    if (id_col.find('-') != std::string_view::npos || id_col.find('.') != std::string_view::npos) {
      continue;  // multiword token range or empty node
    }
    int id = 0, head = 0;
    if (!parse_int(id_col, id) || id < 1) throw ParseError(line_no, "bad ID column");
    if (current.empty()) sentence_line = line_no;
    if (id != static_cast<int>(current.size()) + 1) {
      throw ParseError(line_no, "token IDs must be consecutive from 1");
    }
    if (!parse_int(cols[6], head) || head < 0) throw ParseError(line_no, "bad HEAD column");
    if (cols[1].empty() || cols[1] == "_" || has_space(cols[1])) {
      throw ParseError(line_no, "bad FORM column");
    }
    if (cols[7].empty() || cols[7] == "_") throw ParseError(line_no, "missing DEPREL");
    Token t;
    t.index = id - 1;
    t.surface = lowercase(cols[1]);
    t.pos = pos_from_upos(cols[3]);
    t.head = head == 0 ? kRoot : head - 1;
    t.deprel = std::string(cols[7]);
    current.push_back(std::move(t));
  }
  finish_sentence();

  out.reserve(pending.size());
  for (Pending& p : pending) out.emplace_back(p.id, std::move(p.sentences), capacity);
  return out;
}

std::string to_conllu(const std::vector<DependencyTree>& trees) {
  std::ostringstream os;
  for (const DependencyTree& tree : trees) {
    for (const Sentence& s : tree.sentences()) {
      os << "# utterance_id = " << tree.utterance_id() << "\n";
      for (const Token& t : s) {
        os << t.index + 1 << '\t' << t.surface << "\t_\t"
           << (t.pos == Pos::kOther ? std::string_view("X") : pos_name(t.pos)) << "\t_\t_\t"
           << (t.head == kRoot ? 0 : t.head + 1) << '\t' << t.deprel << "\t_\t_\n";
      }
      os << "\n";
    }
  }
  return os.str();
}

nlohmann::json to_json(const DependencyTree& tree) {
  nlohmann::json sentences = nlohmann::json::array();
  for (const Sentence& s : tree.sentences()) {
    nlohmann::json js = nlohmann::json::array();
    for (const Token& t : s) {
      js.push_back({{"i", t.index},
                    {"surface", t.surface},
                    {"pos", pos_name(t.pos)},
                    {"head", t.head},
                    {"deprel", t.deprel}});
    }
    sentences.push_back(std::move(js));
  }
  return {{"utterance_id", tree.utterance_id()}, {"sentences", std::move(sentences)}};
}

DependencyTree tree_from_json(const nlohmann::json& j) {
  try {
    std::vector<Sentence> sentences;
    for (const auto& js : j.at("sentences")) {
      Sentence s;
      for (const auto& jt : js) {
        Token t;
        t.index = jt.at("i").get<int>();
        t.surface = jt.at("surface").get<std::string>();
        t.pos = pos_from_upos(jt.at("pos").get<std::string>());
        t.head = jt.at("head").get<int>();
        t.deprel = jt.at("deprel").get<std::string>();
        s.push_back(std::move(t));
      }
      sentences.push_back(std::move(s));
    }
    return DependencyTree(j.at("utterance_id").get<std::string>(), std::move(sentences));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("bad dependency tree JSON: ") + e.what());
  }
}

}  // namespace eda::deptree
