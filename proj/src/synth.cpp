#include "actweave/synth.hpp"

#include <fstream>
#include <sstream>

#include "actweave/common.hpp"
#include "actweave/persistence.hpp"

namespace actweave {
namespace {

const char* const kSubjects[] = {"man", "woman", "boy", "girl", "person", "child"};

std::string inflect(const std::string& verb, const Lexicon& lexicon, bool progressive) {
  // The lexicon maps forms to lemmas; pick the matching surface form back out.
  for (const auto& [form, lemma] : lexicon.forms) {
    if (lemma != verb) continue;
    const bool ing = form.size() > 3 && form.compare(form.size() - 3, 3, "ing") == 0;
    const bool third = !ing && form.back() == 's';
    if (progressive ? ing : third) return form;
  }
  return progressive ? verb + "ing" : verb + "s";
}

Eigen::VectorXd gaussian(Rng& rng, int dim, double scale) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = scale * rng.normal();
  return v;
}

std::string description_for(const VOPair& pair, Rng& rng, const Lexicon& lexicon) {
  const std::string subject = kSubjects[rng.index(std::size(kSubjects))];
  if (rng.index(2) == 0) return "A " + subject + " " + inflect(pair.verb, lexicon, false) + " a " + pair.object + ".";
  return "The " + subject + " is " + inflect(pair.verb, lexicon, true) + " the " + pair.object + ".";
}

}  // namespace

const std::vector<SynthTopic>& synth_topics() {
  static const std::vector<SynthTopic> topics = {
      {{{"ride", "bike"}, {"ride", "bicycle"}, {"ride", "motorcycle"}, {"ride", "tricycle"}, {"ride", "scooter"}},
       "ride bike"},
      {{{"catch", "frisbee"}, {"hold", "frisbee"}, {"throw", "frisbee"}, {"play", "frisbee"}, {"toss", "frisbee"}},
       "throw frisbee"},
      {{{"eat", "pizza"}, {"eat", "sandwich"}, {"eat", "banana"}, {"eat", "apple"}, {"eat", "donut"}}, "eat pizza"},
      {{{"drink", "coffee"}, {"drink", "tea"}, {"drink", "juice"}, {"drink", "milk"}, {"drink", "water"}},
       "drink coffee"},
  };
  return topics;
}

SynthData make_synth(const SynthOptions& options, const Lexicon& lexicon) {
  const auto& topics = synth_topics();
  if (options.n_topics < 2 || options.n_topics > static_cast<int>(topics.size())) {
    throw InputError("synth: n_topics must be in [2, " + std::to_string(topics.size()) + "]");
  }
  if (options.train_per_topic < 1 || options.test_per_topic < 0 || options.noise < 0.0) {
    throw InputError("synth: image counts must be positive and noise non-negative");
  }
  if (options.d_img < 1 || options.d_w2v < 1) throw InputError("synth: dimensions must be positive");

  SynthData data;
  data.features = FeatureTable(options.d_img);
  data.embeddings = EmbeddingTable(options.d_w2v, options.seed);
  Rng rng(options.seed ^ 0x73796e7468ULL);

  // Words of one topic sit near a shared direction so their concepts are
  // also close in text space.
  auto unit = [](Eigen::VectorXd v) { return Eigen::VectorXd(v / v.norm()); };
  for (int t = 0; t < options.n_topics; ++t) {
    const Eigen::VectorXd word_centre = gaussian(rng, options.d_w2v, 1.0);
    for (const auto& c : topics[t].concepts) {
      for (const auto& w : {c.verb, c.object}) {
        if (!data.embeddings.contains(w)) data.embeddings.insert(w, unit(word_centre + gaussian(rng, options.d_w2v, 0.5)));
      }
    }
  }
  for (const char* s : kSubjects) data.embeddings.insert(s, unit(gaussian(rng, options.d_w2v, 1.0)));

  for (int t = 0; t < options.n_topics; ++t) {
    const Eigen::VectorXd centre = gaussian(rng, options.d_img, 1.0);
    for (const auto& c : topics[t].concepts) data.centroids[c] = centre + gaussian(rng, options.d_img, 0.5);
    data.categories.push_back(topics[t].category);
  }

  const std::size_t n_concepts = topics[0].concepts.size();
  int serial = 0;
  for (const Split split : {Split::kTrain, Split::kTest}) {
    const int per_topic = split == Split::kTrain ? options.train_per_topic : options.test_per_topic;
    for (int t = 0; t < options.n_topics; ++t) {
      for (int i = 0; i < per_topic; ++i) {
        const VOPair& pair = topics[t].concepts[static_cast<std::size_t>(i) % n_concepts];
        char id[32];
        std::snprintf(id, sizeof id, "%s%05d", split == Split::kTrain ? "tr" : "te", serial++);
        data.corpus.push_back({id, description_for(pair, rng, lexicon), split});
        data.features.insert(id, data.centroids.at(pair) + gaussian(rng, options.d_img, options.noise));
        data.image_concept[id] = pair;
        if (split == Split::kTest) data.truth[id] = {t};
      }
    }
  }
  return data;
}

void write_synth(const SynthData& data, const std::filesystem::path& taxonomy_source, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_corpus(data.corpus, dir / "corpus.jsonl");
  save_features(data.features, dir / "features.tsv");
  save_embeddings(data.embeddings, dir / "embeddings.vec");
  std::ifstream in(taxonomy_source, std::ios::binary);
  if (!in) throw InputError("cannot open " + taxonomy_source.string());
  std::ostringstream taxonomy;
  taxonomy << in.rdbuf();
  write_file_atomic(dir / "taxonomy.tsv", taxonomy.str());
  std::string cats;
  for (const auto& c : data.categories) cats += c + "\n";
  write_file_atomic(dir / "categories.txt", cats);
  save_truth(data.truth, dir / "truth.json");
}

}  // namespace actweave
