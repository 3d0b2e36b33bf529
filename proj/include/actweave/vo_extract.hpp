#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace actweave {

struct VOPair {
  std::string verb;
  std::string object;

  auto operator<=>(const VOPair&) const = default;
  std::string str() const { return verb + " " + object; }
};

/// Word lists driving tagging and lemmatization. Loaded from a directory of
/// plain-text files so the vocabulary can be edited without rebuilding.
struct Lexicon {
  std::set<std::string> verbs;
  std::set<std::string> nouns;
  std::set<std::string> human_subjects;
  std::set<std::string> stopwords;
  std::set<std::string> determiners;
  /// Inflected form -> lemma. Holds lemma_exceptions.tsv plus the verb
  /// inflection table; exception entries win on conflict.
  std::map<std::string, std::string> forms;

  static Lexicon load(const std::filesystem::path& dir);

  bool is_lemma(const std::string& w) const { return verbs.count(w) || nouns.count(w) || human_subjects.count(w); }
};

enum class Tag { kVerb, kNoun, kStop, kOther };

struct Token {
  std::string surface;  // lowercased, punctuation stripped
  std::string lemma;
  Tag tag = Tag::kOther;
  bool clause_break = false;  // punctuation followed this token
};

/// Whitespace split, ASCII punctuation stripped, lowercased. Tokens that
/// were pure punctuation become clause breaks on the previous token.
std::vector<std::string> tokenize(const std::string& text);

std::string lemmatize(const std::string& word, const Lexicon& lexicon);

/// Tokenizes and tags a description.
std::vector<Token> tag_tokens(const std::string& description, const Lexicon& lexicon);

bool has_human_subject(const std::string& description, const Lexicon& lexicon);

/// Pairs each verb with the head (last noun) of the first noun phrase that
/// follows it, stopping at the next verb or clause break.
std::vector<VOPair> extract_vo(const std::string& description, const Lexicon& lexicon);

/// Content-word lemmas of a description (stopwords and determiners dropped);
/// this is the text the encoder sees.
std::vector<std::string> content_tokens(const std::string& description, const Lexicon& lexicon);

}  // namespace actweave
