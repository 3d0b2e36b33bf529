#include "actweave/persistence.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "actweave/common.hpp"

namespace actweave {
namespace {

using ordered_json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'A', 'C', 'T', 'W', 'C', 'K', 'P', 'T'};

ordered_json node_to_json(const ActTree& tree, std::size_t index) {
  const ActNode& node = tree.nodes[index];
  ordered_json j;
  j["name"] = node.name.str();
  j["verb"] = node.name.verb;
  j["object"] = node.name.object;
  j["images"] = node.images;
  if (node.action) {
    ordered_json c;
    c["verb"] = node.action->pair.verb;
    c["object"] = node.action->pair.object;
    c["visualness_ap"] = node.action->visualness_ap;
    c["representation"] = std::vector<double>(node.action->representation.data(),
                                              node.action->representation.data() + node.action->representation.size());
    j["concept"] = c;
  }
  ordered_json children = ordered_json::array();
  for (std::size_t c : node.children) children.push_back(node_to_json(tree, c));
  j["children"] = children;
  return j;
}

std::string required_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) throw InputError(std::string("act.json: missing string '") + key + "'");
  return j[key].get<std::string>();
}

std::size_t node_from_json(const nlohmann::json& j, ActTree& tree) {
  if (!j.is_object()) throw InputError("act.json: node must be an object");
  const std::size_t index = tree.nodes.size();
  tree.nodes.emplace_back();
  ActNode node;
  if (!j.contains("verb") || !j.contains("object")) throw InputError("act.json: node without verb/object");
  if (j["verb"].is_null() || j["object"].is_null()) {
    // Only a display name is present; split at the last space.
    const std::string name = required_string(j, "name");
    const auto space = name.rfind(' ');
    if (space == std::string::npos) throw InputError("act.json: cannot split node name '" + name + "'");
    node.name = {name.substr(0, space), name.substr(space + 1)};
  } else {
    node.name = {required_string(j, "verb"), required_string(j, "object")};
  }
  if (!j.contains("images") || !j["images"].is_array()) throw InputError("act.json: node without images");
  node.images = j["images"].get<std::vector<std::string>>();
  if (j.contains("concept")) {
    const auto& c = j["concept"];
    ActionConcept action;
    action.pair = {required_string(c, "verb"), required_string(c, "object")};
    action.image_ids = node.images;
    if (!c.contains("visualness_ap") || !c["visualness_ap"].is_number()) {
      throw InputError("act.json: concept without visualness_ap");
    }
    action.visualness_ap = c["visualness_ap"].get<double>();
    const auto rep = c.at("representation").get<std::vector<double>>();
    action.representation = Eigen::Map<const Eigen::VectorXd>(rep.data(), static_cast<Eigen::Index>(rep.size()));
    node.action = std::move(action);
  }
  if (!j.contains("children") || !j["children"].is_array()) throw InputError("act.json: node without children");
  for (const auto& child : j["children"]) node.children.push_back(node_from_json(child, tree));
  tree.nodes[index] = std::move(node);
  return index;
}

ordered_json dims_json(const ModelDims& d) {
  ordered_json j;
  j["d_img"] = d.d_img;
  j["d_w2v"] = d.d_w2v;
  j["d_text"] = d.d_text;
  j["d_alg"] = d.d_alg;
  j["max_seq_len"] = d.max_seq_len;
  return j;
}

void write_array(std::ostream& out, const Eigen::MatrixXd& m) {
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
}

void read_array(std::istream& in, Eigen::MatrixXd& m) {
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw InputError("checkpoint: truncated parameter data");
}

template <typename Group>
ordered_json shapes_json(const Group& group) {
  ordered_json arr = ordered_json::array();
  group.for_each([&](const char* name, const Eigen::MatrixXd& m) {
    arr.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  });
  return arr;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_act(const ActTree& tree, const std::filesystem::path& path) {
  tree.validate();
  ordered_json j;
  j["version"] = kActFormatVersion;
  j["root"] = node_to_json(tree, ActTree::kRoot);
  write_file_atomic(path, j.dump(2) + "\n");
}

ActTree load_act(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": malformed act.json (" + e.what() + ")");
  }
  if (!j.is_object() || !j.contains("version") || !j["version"].is_number_integer()) {
    throw InputError(path.string() + ": missing format version");
  }
  if (j["version"].get<int>() != kActFormatVersion) {
    throw InputError(path.string() + ": unsupported act.json version " + std::to_string(j["version"].get<int>()));
  }
  if (!j.contains("root")) throw InputError(path.string() + ": missing root");
  ActTree tree;
  try {
    node_from_json(j["root"], tree);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  tree.validate();
  return tree;
}

void save_checkpoint(const AsaModel& model, const AsaOptimizer& optimizer, const std::filesystem::path& path) {
  const auto& params = model.params();
  ordered_json header;
  header["version"] = kCheckpointVersion;
  header["dims"] = dims_json(model.dims());
  header["encoder"] = shapes_json(params.encoder);
  header["aligner"] = shapes_json(params.aligner);
  auto opt_json = [](const Adam& a) {
    return ordered_json{{"lr", a.lr()}, {"step", a.steps()}, {"has_moments", !a.first_moments().empty()}};
  };
  header["optimizer"] = {{"encoder", opt_json(optimizer.encoder)}, {"aligner", opt_json(optimizer.aligner)}};
  const std::string header_text = header.dump();

  std::ostringstream out(std::ios::binary);
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t header_len = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out << header_text;
  params.for_each([&](const char*, const Eigen::MatrixXd& m) { write_array(out, m); });
  for (const Adam* a : {&optimizer.encoder, &optimizer.aligner}) {
    for (const auto& m : a->first_moments()) write_array(out, m);
    for (const auto& v : a->second_moments()) write_array(out, v);
  }
  write_file_atomic(path, out.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw InputError(path.string() + ": not a checkpoint");
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in) throw InputError(path.string() + ": truncated checkpoint header");
  if (version != kCheckpointVersion) {
    throw InputError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw InputError(path.string() + ": truncated checkpoint header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": malformed checkpoint header (" + e.what() + ")");
  }
  Checkpoint ckpt;
  try {
    const auto& dj = header.at("dims");
    const ModelDims dims{dj.at("d_img").get<int>(), dj.at("d_w2v").get<int>(), dj.at("d_text").get<int>(),
                         dj.at("d_alg").get<int>(), dj.at("max_seq_len").get<int>()};
    ckpt = Checkpoint{AsaModel(dims), AsaOptimizer{Adam(), Adam()}};

    auto check_shapes = [&](const nlohmann::json& shapes, auto& group) {
      std::size_t k = 0;
      group.for_each([&](const char* name, Eigen::MatrixXd& m) {
        if (k >= shapes.size() || shapes[k].at("name").get<std::string>() != name ||
            shapes[k].at("rows").get<Eigen::Index>() != m.rows() || shapes[k].at("cols").get<Eigen::Index>() != m.cols()) {
          throw InputError(path.string() + ": parameter '" + name + "' does not match the stored dimensions");
        }
        ++k;
      });
    };
    check_shapes(header.at("encoder"), ckpt.model.params().encoder);
    check_shapes(header.at("aligner"), ckpt.model.params().aligner);
    ckpt.model.params().for_each([&](const char*, Eigen::MatrixXd& m) { read_array(in, m); });

    auto restore = [&](const nlohmann::json& oj, auto& group) {
      Adam adam(oj.at("lr").get<double>());
      std::vector<Eigen::MatrixXd> m, v;
      if (oj.at("has_moments").get<bool>()) {
        group.for_each([&](const char*, const Eigen::MatrixXd& p) { m.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols())); });
        v = m;
        for (auto& x : m) read_array(in, x);
        for (auto& x : v) read_array(in, x);
      }
      adam.restore(oj.at("step").get<std::int64_t>(), std::move(m), std::move(v));
      return adam;
    };
    const auto& opt = header.at("optimizer");
    ckpt.optimizer.encoder = restore(opt.at("encoder"), ckpt.model.params().encoder);
    ckpt.optimizer.aligner = restore(opt.at("aligner"), ckpt.model.params().aligner);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": malformed checkpoint header (" + e.what() + ")");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw InputError(path.string() + ": trailing bytes in checkpoint");
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelDims& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  const ModelDims& got = ckpt.model.dims();
  if (!(got == expected)) {
    std::ostringstream msg;
    msg << path.string() << ": checkpoint dimensions (d_img=" << got.d_img << ", d_w2v=" << got.d_w2v
        << ", d_text=" << got.d_text << ", d_alg=" << got.d_alg << ", max_seq_len=" << got.max_seq_len
        << ") do not match the configuration (d_img=" << expected.d_img << ", d_w2v=" << expected.d_w2v
        << ", d_text=" << expected.d_text << ", d_alg=" << expected.d_alg << ", max_seq_len=" << expected.max_seq_len
        << ")";
    throw InputError(msg.str());
  }
  return ckpt;
}

}  // namespace actweave
