#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace actweave {

/// image_id -> category indices (multi-label).
using GroundTruth = std::map<std::string, std::set<int>>;
/// image_id -> one score per category.
using ScoreTable = std::map<std::string, Eigen::VectorXd>;

struct EvalReport {
  std::vector<std::optional<double>> per_category_ap;  // nullopt: no positives
  double mean_ap = 0.0;
  std::map<int, double> recall_at;
  std::size_t n_images = 0;
  std::size_t n_categories = 0;
};

/// Mean over positive ranks r of precision@r. Throws InputError when the
/// list has no positives.
double average_precision(const std::vector<bool>& ranked_relevance);

/// Orders (id, score) pairs by descending score, ties by ascending id, and
/// returns the ids.
std::vector<std::string> rank_by_score(std::vector<std::pair<std::string, double>> items);

/// Per-category AP over score-ranked images, mAP over categories with at
/// least one positive, and Recall@k as the fraction of images whose top-k
/// categories (ties to the lower index) hit the truth set.
EvalReport evaluate(const ScoreTable& scores, const GroundTruth& truth, const std::vector<int>& ks);

GroundTruth load_truth(const std::filesystem::path& path);
void save_truth(const GroundTruth& truth, const std::filesystem::path& path);

/// report.json: {mAP, recall, per_category:[{name, ap}], n_images, n_categories}.
void save_report(const EvalReport& report, const std::vector<std::string>& category_names,
                 const std::filesystem::path& path);

}  // namespace actweave
