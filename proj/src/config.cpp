#include "snet/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "snet/errors.hpp"

namespace snet {

bool RunConfig::has_ablation(const std::string& name) const {
  std::stringstream ss(ablation);
  std::string item;
  while (std::getline(ss, item, ','))
    if (item == name) return true;
  return false;
}

void RunConfig::validate() const {
  if (loss_weight_r < 0.0f || loss_weight_r > 1.0f)
    throw ConfigError("loss_weight_r must be in [0,1]");
  if (dropout < 0.0f || dropout >= 1.0f)
    throw ConfigError("dropout must be in [0,1)");
  if (beam < 1) throw ConfigError("beam must be >= 1");
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  if (vocab_size < 4) throw ConfigError("vocab_size must be >= 4");
  if (epochs < 1 || batch < 1)
    throw ConfigError("epochs and batch must be >= 1");
  static const char* kKnown[] = {"no-ranking", "rank-then-extract",
                                 "no-position-features", "categorical-ce",
                                 "bidirectional-match"};
  std::stringstream ss(ablation);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (std::find_if(std::begin(kKnown), std::end(kKnown),
                     [&](const char* k) { return item == k; }) ==
        std::end(kKnown))
      throw ConfigError("unknown ablation '" + item + "'");
  }
  if (answer_style != "exact-span" && answer_style != "span-plus-prefix" &&
      answer_style != "yes-no")
    throw ConfigError("unknown answer_style '" + answer_style + "'");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto as_int = [&] { return std::stoi(value); };
  auto as_float = [&] { return std::stof(value); };
  auto as_bool = [&] {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("boolean key '" + key + "' got '" + value + "'");
  };
  try {
    if (key == "data") data = value;
    else if (key == "dev_data") dev_data = value;
    else if (key == "out") out = value;
    else if (key == "ckpt") ckpts.push_back(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "hidden") hidden = as_int();
    else if (key == "embed_dim") embed_dim = as_int();
    else if (key == "char_embed_dim") char_embed_dim = as_int();
    else if (key == "char_hidden") char_hidden = as_int();
    else if (key == "use_char") use_char = as_bool();
    else if (key == "feat_dim") feat_dim = as_int();
    else if (key == "vocab_size") vocab_size = as_int();
    else if (key == "dropout") dropout = as_float();
    else if (key == "loss_weight_r") loss_weight_r = as_float();
    else if (key == "grad_clip") grad_clip = as_float();
    else if (key == "beam") beam = as_int();
    else if (key == "max_len") max_len = as_int();
    else if (key == "epochs") epochs = as_int();
    else if (key == "batch") batch = as_int();
    else if (key == "max_span_len") max_span_len = as_int();
    else if (key == "extraction_threshold") extraction_threshold = as_float();
    else if (key == "synthesis_threshold") synthesis_threshold = as_float();
    else if (key == "embeddings") embeddings = value;
    else if (key == "answers") answers = value;
    else if (key == "ablation") ablation = value;
    else if (key == "corpus_examples") corpus_examples = as_int();
    else if (key == "corpus_vocab") corpus_vocab = as_int();
    else if (key == "passage_len") passage_len = as_int();
    else if (key == "k_passages") k_passages = as_int();
    else if (key == "answer_len") answer_len = as_int();
    else if (key == "answer_style") answer_style = value;
    else if (key == "distractor_overlap") distractor_overlap = as_float();
    else
      throw ConfigError("unknown config key '" + key + "'");
  } catch (const std::invalid_argument&) {
    throw ConfigError("bad value '" + value + "' for config key '" + key +
                      "'");
  } catch (const std::out_of_range&) {
    throw ConfigError("out-of-range value '" + value + "' for config key '" +
                      key + "'");
  }
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const size_t last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto strip = [](std::string& s) {
      const size_t b = s.find_first_not_of(" \t");
      const size_t e = s.find_last_not_of(" \t");
      s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
    };
    strip(key);
    strip(value);
    cfg.set(key, value);
  }
  return cfg;
}

int thread_cap() {
  const char* env = std::getenv("SNET_THREADS");
  if (!env) return 1;
  int n = std::atoi(env);
  return n < 1 ? 1 : n;
}

}  // namespace snet
