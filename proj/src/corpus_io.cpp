#include "actweave/corpus_io.hpp"

#include <charconv>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "actweave/common.hpp"

namespace actweave {
namespace {

using nlohmann::json;

double parse_real(const std::string& text, const std::string& where) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw InputError(where + ": non-numeric field '" + text + "'");
  }
  return value;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

const Eigen::VectorXd& FeatureTable::at(const std::string& id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw InputError("no features for image '" + id + "'");
  return it->second;
}

void FeatureTable::insert(const std::string& id, Eigen::VectorXd v) {
  if (v.size() != dim_) {
    throw InputError("feature for '" + id + "' has " + std::to_string(v.size()) +
                     " entries, expected " + std::to_string(dim_));
  }
  if (!v.allFinite()) throw InputError("feature for '" + id + "' has non-finite values");
  entries_[id] = std::move(v);
}

void EmbeddingTable::insert(const std::string& word, Eigen::VectorXd v) {
  if (v.size() != dim_) {
    throw InputError("embedding for '" + word + "' has " + std::to_string(v.size()) +
                     " entries, expected " + std::to_string(dim_));
  }
  entries_[to_lower(word)] = std::move(v);
}

Eigen::VectorXd EmbeddingTable::lookup(const std::string& word) const {
  if (auto it = entries_.find(word); it != entries_.end()) return it->second;
  Rng rng(fnv1a64(word) ^ (seed_ * 0x9e3779b97f4a7c15ULL));
  Eigen::VectorXd v(dim_);
  for (int i = 0; i < dim_; ++i) v[i] = rng.normal();
  const double n = v.norm();
  return n > 0.0 ? Eigen::VectorXd(v / n) : v;
}

Eigen::MatrixXd EmbeddingTable::embed(const std::vector<std::string>& tokens) const {
  Eigen::MatrixXd x(dim_, static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t t = 0; t < tokens.size(); ++t) x.col(static_cast<Eigen::Index>(t)) = lookup(tokens[t]);
  return x;
}

std::vector<ImagedDescription> load_corpus(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<ImagedDescription> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError(where + ": malformed JSON (" + e.what() + ")");
    }
    auto field = [&](const char* name) -> std::string {
      if (!j.is_object() || !j.contains(name) || !j[name].is_string()) {
        throw InputError(where + ": missing string field '" + name + "'");
      }
      return j[name].get<std::string>();
    };
    ImagedDescription rec;
    rec.image_id = field("image_id");
    rec.description = field("description");
    const std::string split = field("split");
    if (split == "train") rec.split = Split::kTrain;
    else if (split == "test") rec.split = Split::kTest;
    else throw InputError(where + ": split must be train or test, got '" + split + "'");
    if (rec.image_id.empty()) throw InputError(where + ": empty image_id");
    if (trim(rec.description).empty()) throw InputError(where + ": empty description");
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw InputError(path.string() + ": corpus is empty");
  return records;
}

void save_corpus(const std::vector<ImagedDescription>& corpus, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& r : corpus) {
    json j;
    j["image_id"] = r.image_id;
    j["description"] = r.description;
    j["split"] = r.split == Split::kTrain ? "train" : "test";
    out << j.dump() << '\n';
  }
}

FeatureTable load_features(const std::filesystem::path& path) {
  auto in = open_input(path);
  FeatureTable table;
  bool first = true;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto fields = split(line, '\t');
    if (fields.size() < 2) throw InputError(where + ": expected image_id and at least one value");
    const int dim = static_cast<int>(fields.size()) - 1;
    if (first) {
      table = FeatureTable(dim);
      first = false;
    } else if (dim != table.dim()) {
      throw InputError(where + ": row has " + std::to_string(dim) + " values, expected " +
                       std::to_string(table.dim()));
    }
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = parse_real(trim(fields[static_cast<std::size_t>(i) + 1]), where);
    try {
      table.insert(fields[0], std::move(v));
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
  }
  if (first) throw InputError(path.string() + ": no feature rows");
  return table;
}

void save_features(const FeatureTable& table, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& [id, v] : table.entries()) {
    out << id;
    for (Eigen::Index i = 0; i < v.size(); ++i) out << '\t' << format_real(v[i]);
    out << '\n';
  }
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, std::uint64_t seed) {
  auto in = open_input(path);
  std::string line;
  int line_no = 0;
  int dim = -1;
  std::vector<std::pair<std::string, Eigen::VectorXd>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (line_no == 1 && fields.size() == 2) {
      // `<count> <dim>` header; a one-dimensional vocabulary line would also
      // have two fields, so only treat it as a header when both are integers.
      int count = 0, header_dim = 0;
      auto r1 = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), count);
      auto r2 = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), header_dim);
      if (r1.ec == std::errc() && r1.ptr == fields[0].data() + fields[0].size() &&
          r2.ec == std::errc() && r2.ptr == fields[1].data() + fields[1].size()) {
        dim = header_dim;
        continue;
      }
    }
    const int row_dim = static_cast<int>(fields.size()) - 1;
    if (row_dim < 1) throw InputError(where + ": word without a vector");
    if (dim < 0) dim = row_dim;
    if (row_dim != dim) {
      throw InputError(where + ": vector has " + std::to_string(row_dim) + " values, expected " +
                       std::to_string(dim));
    }
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = parse_real(fields[static_cast<std::size_t>(i) + 1], where);
    rows.emplace_back(to_lower(fields[0]), std::move(v));
  }
  if (dim < 1) throw InputError(path.string() + ": no embedding rows");
  EmbeddingTable table(dim, seed);
  for (auto& [w, v] : rows) table.insert(w, std::move(v));
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << table.size() << ' ' << table.dim() << '\n';
  for (const auto& [w, v] : table.entries()) {
    out << w;
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << format_real(v[i]);
    out << '\n';
  }
}

void require_features(const FeatureTable& table, const std::vector<std::string>& ids,
                      const std::string& context) {
  std::set<std::string> missing;
  for (const auto& id : ids) {
    if (!table.contains(id)) missing.insert(id);
  }
  if (missing.empty()) return;
  std::string msg = context + ": " + std::to_string(missing.size()) + " image(s) without features (";
  int shown = 0;
  for (const auto& id : missing) {
    if (shown++ == 3) {
      msg += ", ...";
      break;
    }
    msg += (shown > 1 ? ", " : "") + id;
  }
  throw InputError(msg + ")");
}

}  // namespace actweave
