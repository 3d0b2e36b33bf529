#include "actweave/eval.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>

#include "actweave/common.hpp"

namespace actweave {

double average_precision(const std::vector<bool>& ranked_relevance) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < ranked_relevance.size(); ++r) {
    if (!ranked_relevance[r]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  if (hits == 0) throw InputError("average_precision: no positives in ranking");
  return sum / static_cast<double>(hits);
}

std::vector<std::string> rank_by_score(std::vector<std::pair<std::string, double>> items) {
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> ids;
  ids.reserve(items.size());
  for (auto& [id, s] : items) ids.push_back(std::move(id));
  return ids;
}

EvalReport evaluate(const ScoreTable& scores, const GroundTruth& truth, const std::vector<int>& ks) {
  EvalReport report;
  if (scores.empty()) throw InputError("evaluate: no scored images");
  const Eigen::Index m = scores.begin()->second.size();
  if (m < 1) throw InputError("evaluate: score vectors are empty");
  for (const auto& [id, s] : scores) {
    if (s.size() != m) throw InputError("evaluate: ragged score vector for '" + id + "'");
    auto it = truth.find(id);
    if (it == truth.end() || it->second.empty()) throw InputError("evaluate: no ground truth for '" + id + "'");
    for (int c : it->second) {
      if (c < 0 || c >= m) throw InputError("evaluate: label out of range for '" + id + "'");
    }
  }
  report.n_images = scores.size();
  report.n_categories = static_cast<std::size_t>(m);

  double ap_sum = 0.0;
  int ap_count = 0;
  for (Eigen::Index j = 0; j < m; ++j) {
    std::vector<std::pair<std::string, double>> column;
    column.reserve(scores.size());
    for (const auto& [id, s] : scores) column.emplace_back(id, s[j]);
    std::vector<bool> relevance;
    relevance.reserve(column.size());
    for (const auto& id : rank_by_score(std::move(column))) {
      relevance.push_back(truth.at(id).count(static_cast<int>(j)) != 0);
    }
    if (std::find(relevance.begin(), relevance.end(), true) == relevance.end()) {
      report.per_category_ap.push_back(std::nullopt);
      continue;
    }
    const double ap = average_precision(relevance);
    report.per_category_ap.push_back(ap);
    ap_sum += ap;
    ++ap_count;
  }
  report.mean_ap = ap_count > 0 ? ap_sum / ap_count : 0.0;

  for (int k : ks) {
    if (k < 1) throw InputError("evaluate: recall cutoff must be >= 1");
    std::size_t hits = 0;
    for (const auto& [id, s] : scores) {
      std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return s[a] > s[b]; });
      const auto& labels = truth.at(id);
      const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
      for (std::size_t r = 0; r < top; ++r) {
        if (labels.count(static_cast<int>(order[r]))) {
          ++hits;
          break;
        }
      }
    }
    report.recall_at[k] = static_cast<double>(hits) / static_cast<double>(scores.size());
  }
  return report;
}

GroundTruth load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": malformed JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw InputError(path.string() + ": expected an object of image_id -> [labels]");
  GroundTruth truth;
  for (const auto& [id, labels] : j.items()) {
    if (!labels.is_array() || labels.empty()) throw InputError(path.string() + ": empty labels for '" + id + "'");
    for (const auto& l : labels) {
      if (!l.is_number_integer()) throw InputError(path.string() + ": non-integer label for '" + id + "'");
      truth[id].insert(l.get<int>());
    }
  }
  return truth;
}

void save_truth(const GroundTruth& truth, const std::filesystem::path& path) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [id, labels] : truth) j[id] = std::vector<int>(labels.begin(), labels.end());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void save_report(const EvalReport& report, const std::vector<std::string>& category_names,
                 const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["mAP"] = report.mean_ap;
  nlohmann::ordered_json recall = nlohmann::ordered_json::object();
  for (const auto& [k, r] : report.recall_at) recall[std::to_string(k)] = r;
  j["recall"] = recall;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < report.per_category_ap.size(); ++c) {
    nlohmann::ordered_json e;
    e["name"] = c < category_names.size() ? category_names[c] : std::to_string(c);
    if (report.per_category_ap[c]) e["ap"] = *report.per_category_ap[c];
    else e["ap"] = nullptr;
    per.push_back(e);
  }
  j["per_category"] = per;
  j["n_images"] = report.n_images;
  j["n_categories"] = report.n_categories;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace actweave
