#include "actweave/vo_extract.hpp"

#include <cctype>
#include <fstream>

#include "actweave/common.hpp"

namespace actweave {
namespace {

std::vector<std::string> read_word_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("lexicon: cannot open " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string w = to_lower(trim(line));
    if (!w.empty()) words.push_back(w);
  }
  return words;
}

std::vector<std::vector<std::string>> read_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("lexicon: cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() < 2) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected two tab-separated fields");
    }
    for (auto& f : fields) f = to_lower(trim(f));
    rows.push_back(std::move(fields));
  }
  return rows;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Lexicon Lexicon::load(const std::filesystem::path& dir) {
  Lexicon lex;
  for (const auto& row : read_tsv(dir / "verbs.tsv")) {
    lex.verbs.insert(row[0]);
    for (const auto& form : split(row[1], ',')) {
      const std::string f = trim(form);
      if (!f.empty() && f != row[0]) lex.forms.emplace(f, row[0]);
    }
  }
  for (auto& w : read_word_list(dir / "nouns.txt")) lex.nouns.insert(std::move(w));
  for (auto& w : read_word_list(dir / "humans.txt")) lex.human_subjects.insert(std::move(w));
  for (auto& w : read_word_list(dir / "stopwords.txt")) lex.stopwords.insert(std::move(w));
  lex.determiners = {"a", "an", "the", "his", "her", "their", "its", "my", "your", "our", "this", "that", "these", "those", "some"};
  for (const auto& row : read_tsv(dir / "lemma_exceptions.tsv")) {
    if (!lex.is_lemma(row[1])) {
      throw InputError("lexicon: exception '" + row[0] + "' maps to unknown lemma '" + row[1] + "'");
    }
    lex.forms[row[0]] = row[1];
  }
  for (const auto& [form, lemma] : lex.forms) {
    if (auto it = lex.forms.find(lemma); it != lex.forms.end() && it->second != lemma) {
      throw InputError("lexicon: lemma '" + lemma + "' is itself listed as a form of '" + it->second + "'");
    }
  }
  return lex;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& raw : split_whitespace(text)) {
    std::string w;
    for (unsigned char c : raw) {
      if (!std::ispunct(c)) w.push_back(static_cast<char>(std::tolower(c)));
    }
    if (!w.empty()) out.push_back(std::move(w));
  }
  return out;
}

std::string lemmatize(const std::string& word, const Lexicon& lexicon) {
  if (auto it = lexicon.forms.find(word); it != lexicon.forms.end()) return it->second;
  if (lexicon.is_lemma(word)) return word;

  std::vector<std::string> candidates;
  auto strip = [&](std::string_view suffix) { return word.substr(0, word.size() - suffix.size()); };
  if (ends_with(word, "ing") || ends_with(word, "ed")) {
    const std::string stem = strip(ends_with(word, "ing") ? "ing" : "ed");
    candidates.push_back(stem + "e");
    if (stem.size() >= 2 && stem.back() == stem[stem.size() - 2] && !is_vowel(stem.back())) {
      candidates.push_back(stem.substr(0, stem.size() - 1));
    }
    if (ends_with(word, "ied")) candidates.push_back(word.substr(0, word.size() - 3) + "y");
    candidates.push_back(stem);
  }
  if (ends_with(word, "ies")) candidates.push_back(word.substr(0, word.size() - 3) + "y");
  if (ends_with(word, "es")) candidates.push_back(strip("es"));
  if (ends_with(word, "s") && !ends_with(word, "ss")) candidates.push_back(strip("s"));

  for (const auto& c : candidates) {
    if (lexicon.is_lemma(c)) return c;
  }
  return word;
}

std::vector<Token> tag_tokens(const std::string& description, const Lexicon& lexicon) {
  std::vector<Token> tokens;
  for (const auto& raw : split_whitespace(description)) {
    Token tok;
    bool trailing_punct = false;
    for (unsigned char c : raw) {
      if (std::ispunct(c)) {
        if (c != '\'' && c != '-') trailing_punct = true;
      } else {
        tok.surface.push_back(static_cast<char>(std::tolower(c)));
      }
    }
    if (tok.surface.empty()) {
      if (trailing_punct && !tokens.empty()) tokens.back().clause_break = true;
      continue;
    }
    tok.clause_break = trailing_punct;
    tokens.push_back(std::move(tok));
  }

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    Token& tok = tokens[i];
    tok.lemma = lemmatize(tok.surface, lexicon);
    // An ambiguous verb/noun form reads as a noun after a determiner, a verb
    // or a modifier ("rides waves", "a big drink").
    const bool noun_position =
        i > 0 && (lexicon.determiners.count(tokens[i - 1].surface) != 0 ||
                  tokens[i - 1].tag == Tag::kVerb || tokens[i - 1].tag == Tag::kOther);
    const bool noun_like = lexicon.nouns.count(tok.lemma) || lexicon.human_subjects.count(tok.lemma);
    if (lexicon.stopwords.count(tok.surface) || lexicon.determiners.count(tok.surface)) {
      tok.tag = Tag::kStop;
    } else if (lexicon.verbs.count(tok.lemma) && !(noun_position && noun_like)) {
      tok.tag = Tag::kVerb;
    } else if (noun_like) {
      tok.tag = Tag::kNoun;
    } else {
      tok.tag = Tag::kOther;
    }
  }
  return tokens;
}

bool has_human_subject(const std::string& description, const Lexicon& lexicon) {
  bool human_seen = false;
  for (const auto& tok : tag_tokens(description, lexicon)) {
    if (tok.tag == Tag::kVerb) return human_seen;
    if (lexicon.human_subjects.count(tok.lemma)) human_seen = true;
  }
  return false;
}

std::vector<VOPair> extract_vo(const std::string& description, const Lexicon& lexicon) {
  const auto tokens = tag_tokens(description, lexicon);
  std::vector<VOPair> pairs;
  for (std::size_t v = 0; v < tokens.size(); ++v) {
    if (tokens[v].tag != Tag::kVerb) continue;
    std::string head;
    bool in_phrase = false;
    if (!tokens[v].clause_break) {
      for (std::size_t i = v + 1; i < tokens.size(); ++i) {
        const Token& tok = tokens[i];
        if (tok.tag == Tag::kVerb) break;
        if (tok.tag == Tag::kNoun) {
          head = tok.lemma;
          in_phrase = true;
        } else if (in_phrase) {
          break;
        }
        if (tok.clause_break) break;
      }
    }
    if (!head.empty()) pairs.push_back({tokens[v].lemma, head});
  }
  return pairs;
}

std::vector<std::string> content_tokens(const std::string& description, const Lexicon& lexicon) {
  std::vector<std::string> out;
  for (const auto& tok : tag_tokens(description, lexicon)) {
    if (tok.tag != Tag::kStop) out.push_back(tok.lemma);
  }
  return out;
}

}  // namespace actweave
