#include "actweave/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "actweave/common.hpp"
#include "actweave/corpus_io.hpp"

namespace actweave {
namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw InputError("config: bad value for " + key + ": '" + text + "'");
  }
  return value;
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

std::string format_double(double v) { return format_real(v); }

}  // namespace

void PipelineConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InputError(std::string("config: ") + what);
  };
  require(d_img > 0 && d_w2v > 0 && d_text > 0 && d_alg > 0, "dimensions must be positive");
  require(alpha_c > 0.0, "alpha_c must be > 0");
  require(alpha_w >= 0.0, "alpha_w must be >= 0");
  require(batch_size > 0, "batch_size must be positive");
  require(c_nn >= 1, "c_nn must be >= 1");
  require(lr_encoder > 0.0 && lr_align > 0.0, "learning rates must be positive");
  require(max_seq_len >= 1, "max_seq_len must be >= 1");
  require(visualness_threshold >= 0.0 && visualness_threshold <= 1.0,
          "visualness_threshold must be in [0, 1]");
  require(min_concept_samples >= 1, "min_concept_samples must be positive");
  require(stage1_steps >= 0 && finetune_steps >= 0, "step counts must be >= 0");
}

void PipelineConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = unquote(trim(raw_value));
  if (key == "d_img") d_img = parse_number<int>(key, value);
  else if (key == "d_w2v") d_w2v = parse_number<int>(key, value);
  else if (key == "d_text") d_text = parse_number<int>(key, value);
  else if (key == "d_alg") d_alg = parse_number<int>(key, value);
  else if (key == "alpha_c") alpha_c = parse_number<double>(key, value);
  else if (key == "alpha_w") alpha_w = parse_number<double>(key, value);
  else if (key == "batch_size") batch_size = parse_number<int>(key, value);
  else if (key == "c_nn") c_nn = parse_number<int>(key, value);
  else if (key == "theta_init") theta_init = parse_number<double>(key, value);
  else if (key == "lr_encoder") lr_encoder = parse_number<double>(key, value);
  else if (key == "lr_align") lr_align = parse_number<double>(key, value);
  else if (key == "max_seq_len") max_seq_len = parse_number<int>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "visualness_threshold") visualness_threshold = parse_number<double>(key, value);
  else if (key == "min_concept_samples") min_concept_samples = parse_number<int>(key, value);
  else if (key == "stage1_steps") stage1_steps = parse_number<int>(key, value);
  else if (key == "finetune_steps") finetune_steps = parse_number<int>(key, value);
  else throw InputError("config: unknown key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> PipelineConfig::entries() const {
  return {
      {"d_img", std::to_string(d_img)},
      {"d_w2v", std::to_string(d_w2v)},
      {"d_text", std::to_string(d_text)},
      {"d_alg", std::to_string(d_alg)},
      {"alpha_c", format_double(alpha_c)},
      {"alpha_w", format_double(alpha_w)},
      {"batch_size", std::to_string(batch_size)},
      {"c_nn", std::to_string(c_nn)},
      {"theta_init", format_double(theta_init)},
      {"lr_encoder", format_double(lr_encoder)},
      {"lr_align", format_double(lr_align)},
      {"max_seq_len", std::to_string(max_seq_len)},
      {"seed", std::to_string(seed)},
      {"visualness_threshold", format_double(visualness_threshold)},
      {"min_concept_samples", std::to_string(min_concept_samples)},
      {"stage1_steps", std::to_string(stage1_steps)},
      {"finetune_steps", std::to_string(finetune_steps)},
  };
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open " + path.string());
  PipelineConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty() || t.front() == '[') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    try {
      config.set(t.substr(0, eq), t.substr(eq + 1));
    } catch (const InputError& e) {
      throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

void apply_overrides(PipelineConfig& config, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw InputError("--set expects KEY=VAL, got '" + o + "'");
    config.set(o.substr(0, eq), o.substr(eq + 1));
  }
  config.validate();
}

}  // namespace actweave
