#include "kanwm/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "kanwm/error.hpp"
#include "kanwm/rng.hpp"

namespace kanwm {

using nlohmann::json;

namespace {

// Reads members of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& node, std::string where) : node_(node), where_(std::move(where)) {
    require(node_.is_object(), ErrorKind::config, where_ + ": expected an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return node_.contains(key);
  }

  template <typename T>
  T get(const char* key, T fallback) {
    if (!has(key)) return fallback;
    return as<T>(node_.at(key), key);
  }

  template <typename T>
  T need(const char* key) {
    require(has(key), ErrorKind::config, where_ + ": missing \"" + key + "\"");
    return as<T>(node_.at(key), key);
  }

  const json& at(const char* key) {
    require(has(key), ErrorKind::config, where_ + ": missing \"" + key + "\"");
    return node_.at(key);
  }

  std::string path(const char* key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& item : node_.items())
      require(seen_.count(item.key()) != 0, ErrorKind::config,
              where_ + ": unknown key \"" + item.key() + "\"");
  }

 private:
  template <typename T>
  T as(const json& v, const char* key) const {
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        require(v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0),
                ErrorKind::config,
                path(key) + ": expected a non-negative integer");
      } else if constexpr (std::is_same_v<T, double>) {
        require(v.is_number(), ErrorKind::config, path(key) + ": expected a number");
      } else if constexpr (std::is_same_v<T, int>) {
        require(v.is_number_integer(), ErrorKind::config, path(key) + ": expected an integer");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      fail(ErrorKind::config, path(key) + ": " + e.what());
    }
  }

  const json& node_;
  std::string where_;
  std::set<std::string> seen_;
};

std::vector<std::size_t> count_list(const json& v, const std::string& where) {
  require(v.is_array(), ErrorKind::config, where + ": expected an array");
  std::vector<std::size_t> out;
  for (const auto& x : v) {
    require(x.is_number_integer() && x.get<std::int64_t>() > 0, ErrorKind::config,
            where + ": entries must be positive integers");
    out.push_back(x.get<std::size_t>());
  }
  return out;
}

std::string task_name(TaskKind t) {
  return t == TaskKind::classification ? "classification" : "regression";
}

AttackSpec parse_attack(const json& node, std::size_t index, std::uint64_t seed) {
  Section s(node, "attacks[" + std::to_string(index) + "]");
  AttackSpec spec;
  std::string kind = s.need<std::string>("kind");
  try {
    spec.kind = parse_attack_kind(kind);
  } catch (const Error& e) {
    fail(ErrorKind::config, s.path("kind") + ": " + e.what());
  }
  switch (spec.kind) {
    case AttackKind::finetune: spec = AttackSpec::finetune_small_lr(seed); break;
    case AttackKind::prune: spec = AttackSpec::pruning(seed); break;
    case AttackKind::retrain_after_prune: spec = AttackSpec::retrain(seed); break;
  }
  spec.lr = s.get<double>("lr", spec.lr);
  spec.epochs = s.get<std::size_t>("epochs", spec.epochs);
  spec.prune_ratio = s.get<double>("ratio", spec.prune_ratio);
  s.finish();
  try {
    spec.validate();
  } catch (const Error& e) {
    fail(ErrorKind::config, std::string("attacks[") + std::to_string(index) + "]: " + e.what());
  }
  return spec;
}

json attack_to_json(const AttackSpec& a) {
  json j{{"kind", std::string(to_string(a.kind))}, {"lr", a.lr}, {"epochs", a.epochs}};
  if (a.kind != AttackKind::finetune) j["ratio"] = a.prune_ratio;
  return j;
}

}  // namespace

SeedBundle SeedBundle::from_master(std::uint64_t master) {
  SeedBundle b;
  b.master = master;
  b.init = derive_seed(master, "init");
  b.data = derive_seed(master, "data");
  b.shuffle = derive_seed(master, "shuffle");
  b.signal = derive_seed(master, "signal");
  b.detector = derive_seed(master, "detector");
  b.attack = derive_seed(master, "attack");
  return b;
}

json seeds_to_json(const SeedBundle& s) {
  return json{{"master", s.master}, {"init", s.init},         {"data", s.data},
              {"shuffle", s.shuffle}, {"signal", s.signal}, {"detector", s.detector},
              {"attack", s.attack}};
}

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  c.base_dir = base_dir;
  Section top(doc, "config");

  int version = top.get<int>("format_version", kConfigFormatVersion);
  require(version == kConfigFormatVersion, ErrorKind::config,
          "config: unsupported format_version " + std::to_string(version));

  std::string task = top.get<std::string>("task", "classification");
  if (task == "classification") c.task = TaskKind::classification;
  else if (task == "regression") c.task = TaskKind::regression;
  else fail(ErrorKind::config, "config.task: expected classification or regression");

  {
    Section d(top.at("dataset"), "dataset");
    std::string kind = d.need<std::string>("kind");
    if (kind == "idx") {
      c.dataset.kind = DatasetKind::idx;
      c.dataset.train_images = d.need<std::string>("train_images");
      c.dataset.train_labels = d.need<std::string>("train_labels");
      c.dataset.test_images = d.need<std::string>("test_images");
      c.dataset.test_labels = d.need<std::string>("test_labels");
      c.dataset.train_limit = d.get<std::size_t>("train_limit", c.dataset.train_limit);
      c.dataset.test_limit = d.get<std::size_t>("test_limit", c.dataset.test_limit);
      c.dataset.pool = d.get<std::size_t>("pool", c.dataset.pool);
      require(c.dataset.pool >= 1, ErrorKind::config, "dataset.pool: must be >= 1");
      require(c.task == TaskKind::classification, ErrorKind::config,
              "dataset: idx data requires task classification");
    } else if (kind == "feynman") {
      c.dataset.kind = DatasetKind::feynman;
      c.dataset.formula = d.need<std::string>("formula");
      find_feynman(c.dataset.formula);
      c.dataset.n_train = d.get<std::size_t>("n_train", c.dataset.n_train);
      c.dataset.n_test = d.get<std::size_t>("n_test", c.dataset.n_test);
      require(c.dataset.n_train >= 1 && c.dataset.n_test >= 1, ErrorKind::config,
              "dataset: n_train and n_test must be >= 1");
      require(c.task == TaskKind::regression, ErrorKind::config,
              "dataset: feynman data requires task regression");
    } else {
      fail(ErrorKind::config, "dataset.kind: expected idx or feynman");
    }
    d.finish();
  }

  if (top.has("model")) {
    Section m(top.at("model"), "model");
    if (m.has("hidden")) c.hidden = count_list(m.at("hidden"), "model.hidden");
    if (m.has("widths")) {
      c.widths = count_list(m.at("widths"), "model.widths");
      require(c.widths.size() >= 2, ErrorKind::config, "model.widths: need at least 2 entries");
    }
    if (m.has("grid")) {
      Section g(m.at("grid"), "model.grid");
      c.grid.degree = g.get<int>("degree", c.grid.degree);
      c.grid.intervals = g.get<int>("intervals", c.grid.intervals);
      c.grid.t_min = g.get<double>("t_min", c.grid.t_min);
      c.grid.t_max = g.get<double>("t_max", c.grid.t_max);
      c.grid.coeff_stddev = g.get<double>("coeff_stddev", c.grid.coeff_stddev);
      g.finish();
      require(c.grid.degree >= 1 && c.grid.degree <= kMaxSplineDegree, ErrorKind::config,
              "model.grid.degree: must be in [1, " + std::to_string(kMaxSplineDegree) + "]");
      require(c.grid.intervals >= 1, ErrorKind::config, "model.grid.intervals: must be >= 1");
      require(c.grid.t_min < c.grid.t_max, ErrorKind::config,
              "model.grid: t_min must be below t_max");
      require(c.grid.coeff_stddev >= 0.0, ErrorKind::config,
              "model.grid.coeff_stddev: must be >= 0");
    }
    m.finish();
  }

  if (top.has("training")) {
    Section t(top.at("training"), "training");
    c.training.epochs = t.get<std::size_t>("epochs", c.training.epochs);
    c.training.lr = t.get<double>("lr", c.training.lr);
    c.training.batch_size = t.get<std::size_t>("batch_size", c.training.batch_size);
    t.finish();
    require(c.training.lr > 0.0, ErrorKind::config, "training.lr: must be positive");
    require(c.training.batch_size >= 1, ErrorKind::config, "training.batch_size: must be >= 1");
  }

  if (top.has("watermark")) {
    Section w(top.at("watermark"), "watermark");
    if (w.has("key")) c.watermark.key = w.need<std::uint64_t>("key");
    if (w.has("band")) {
      auto b = count_list(w.at("band"), "watermark.band");
      require(b.size() == 2 && b[0] <= b[1], ErrorKind::config,
              "watermark.band: expected [lo, hi] with lo <= hi");
      c.watermark.band = FrequencyBand{b[0], b[1]};
    }
    if (w.has("alpha")) c.watermark.alpha = w.need<double>("alpha");
    c.watermark.alpha_factor = w.get<double>("alpha_factor", c.watermark.alpha_factor);
    c.watermark.lr = w.get<double>("lr", c.watermark.lr);
    std::string opt = w.get<std::string>("optimizer", "sgd");
    if (opt == "adam") c.watermark.optimizer = OptimizerKind::adam;
    else if (opt == "sgd") c.watermark.optimizer = OptimizerKind::sgd;
    else fail(ErrorKind::config, "watermark.optimizer: expected adam or sgd");
    w.finish();
    require(!c.watermark.alpha || *c.watermark.alpha >= 0.0, ErrorKind::config,
            "watermark.alpha: must be >= 0");
    require(c.watermark.alpha_factor >= 0.0, ErrorKind::config,
            "watermark.alpha_factor: must be >= 0");
    require(c.watermark.lr >= 0.0, ErrorKind::config, "watermark.lr: must be >= 0");
  }

  if (top.has("detector")) {
    Section d(top.at("detector"), "detector");
    if (d.has("hidden")) c.detector.hidden = count_list(d.at("hidden"), "detector.hidden");
    c.detector.epochs = d.get<std::size_t>("epochs", c.detector.epochs);
    c.detector.lr = d.get<double>("lr", c.detector.lr);
    c.detector.batch_size = d.get<std::size_t>("batch_size", c.detector.batch_size);
    c.detector.n_shuffles = d.get<std::size_t>("n_shuffles", c.detector.n_shuffles);
    c.detector.samples = d.get<std::size_t>("samples", c.detector.samples);
    d.finish();
    require(c.detector.lr >= 0.0, ErrorKind::config, "detector.lr: must be >= 0");
    require(c.detector.batch_size >= 1, ErrorKind::config, "detector.batch_size: must be >= 1");
    require(c.detector.samples >= 1, ErrorKind::config, "detector.samples: must be >= 1");
  }

  c.threshold = top.get<double>("threshold", c.threshold);
  require(c.threshold >= 0.0 && c.threshold <= 1.0, ErrorKind::config,
          "config.threshold: must be in [0, 1]");
  c.calibration_rows = top.get<std::size_t>("calibration_rows", c.calibration_rows);
  require(c.calibration_rows >= 1, ErrorKind::config, "config.calibration_rows: must be >= 1");

  c.seeds = SeedBundle::from_master(top.get<std::uint64_t>("seed", 0));
  if (top.has("seeds")) {
    Section s(top.at("seeds"), "seeds");
    // The canonical form repeats the master seed here; it must agree.
    require(s.get<std::uint64_t>("master", c.seeds.master) == c.seeds.master, ErrorKind::config,
            "seeds.master: disagrees with config.seed");
    c.seeds.init = s.get<std::uint64_t>("init", c.seeds.init);
    c.seeds.data = s.get<std::uint64_t>("data", c.seeds.data);
    c.seeds.shuffle = s.get<std::uint64_t>("shuffle", c.seeds.shuffle);
    c.seeds.signal = s.get<std::uint64_t>("signal", c.seeds.signal);
    c.seeds.detector = s.get<std::uint64_t>("detector", c.seeds.detector);
    c.seeds.attack = s.get<std::uint64_t>("attack", c.seeds.attack);
    s.finish();
  }

  if (top.has("attacks")) {
    const json& list = top.at("attacks");
    require(list.is_array(), ErrorKind::config, "config.attacks: expected an array");
    for (std::size_t i = 0; i < list.size(); ++i)
      c.attacks.push_back(parse_attack(list[i], i, c.seeds.attack));
  }

  top.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::config, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::config, path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

json config_to_json(const ExperimentConfig& c) {
  json dataset;
  if (c.dataset.kind == DatasetKind::idx) {
    dataset = json{{"kind", "idx"},
                   {"train_images", c.dataset.train_images.generic_string()},
                   {"train_labels", c.dataset.train_labels.generic_string()},
                   {"test_images", c.dataset.test_images.generic_string()},
                   {"test_labels", c.dataset.test_labels.generic_string()},
                   {"train_limit", c.dataset.train_limit},
                   {"test_limit", c.dataset.test_limit},
                   {"pool", c.dataset.pool}};
  } else {
    dataset = json{{"kind", "feynman"},
                   {"formula", c.dataset.formula},
                   {"n_train", c.dataset.n_train},
                   {"n_test", c.dataset.n_test}};
  }
  json model{{"hidden", c.hidden},
             {"grid",
              {{"degree", c.grid.degree},
               {"intervals", c.grid.intervals},
               {"t_min", c.grid.t_min},
               {"t_max", c.grid.t_max},
               {"coeff_stddev", c.grid.coeff_stddev}}}};
  if (!c.widths.empty()) model["widths"] = c.widths;
  json watermark{{"alpha_factor", c.watermark.alpha_factor},
                 {"lr", c.watermark.lr},
                 {"optimizer", c.watermark.optimizer == OptimizerKind::adam ? "adam" : "sgd"}};
  if (c.watermark.key) watermark["key"] = *c.watermark.key;
  if (c.watermark.band) watermark["band"] = {c.watermark.band->lo, c.watermark.band->hi};
  if (c.watermark.alpha) watermark["alpha"] = *c.watermark.alpha;
  json attacks = json::array();
  for (const auto& a : c.attacks) attacks.push_back(attack_to_json(a));

  return json{{"format_version", kConfigFormatVersion},
              {"task", task_name(c.task)},
              {"dataset", dataset},
              {"model", model},
              {"training",
               {{"epochs", c.training.epochs},
                {"lr", c.training.lr},
                {"batch_size", c.training.batch_size}}},
              {"watermark", watermark},
              {"detector",
               {{"hidden", c.detector.hidden},
                {"epochs", c.detector.epochs},
                {"lr", c.detector.lr},
                {"batch_size", c.detector.batch_size},
                {"n_shuffles", c.detector.n_shuffles},
                {"samples", c.detector.samples}}},
              {"attacks", attacks},
              {"calibration_rows", c.calibration_rows},
              {"threshold", c.threshold},
              {"seed", c.seeds.master},
              {"seeds", seeds_to_json(c.seeds)}};
}

void override_seed(ExperimentConfig& config, std::uint64_t master) {
  config.seeds = SeedBundle::from_master(master);
  for (auto& a : config.attacks) a.seed = config.seeds.attack;
}

std::string config_hash(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_to_json(config).dump())));
  return buf;
}

ExperimentData load_experiment_data(const ExperimentConfig& c) {
  ExperimentData out;
  if (c.dataset.kind == DatasetKind::idx) {
    auto resolve = [&](const std::filesystem::path& p) {
      return p.is_absolute() || c.base_dir.empty() ? p : c.base_dir / p;
    };
    auto prepare = [&](const std::filesystem::path& images, const std::filesystem::path& labels,
                       std::size_t limit, SplitTag tag) {
      Dataset d = load_idx(resolve(images), resolve(labels));
      if (limit != 0 && limit < d.size()) d = d.head(limit);
      if (c.dataset.pool > 1) d = avg_pool(d, c.dataset.pool);
      d.split = tag;
      return d;
    };
    out.train = prepare(c.dataset.train_images, c.dataset.train_labels, c.dataset.train_limit,
                        SplitTag::train);
    out.test = prepare(c.dataset.test_images, c.dataset.test_labels, c.dataset.test_limit,
                       SplitTag::test);
  } else {
    const FeynmanFormula& f = find_feynman(c.dataset.formula);
    out.train = gen_feynman(f, c.dataset.n_train, derive_seed(c.seeds.data, "train"));
    out.test = gen_feynman(f, c.dataset.n_test, derive_seed(c.seeds.data, "test"));
    out.test.split = SplitTag::test;
  }
  require(out.train.dim() == out.test.dim(), ErrorKind::dimension,
          "train and test inputs differ in dimension");
  return out;
}

std::vector<std::size_t> model_widths(const ExperimentConfig& c, const Dataset& train) {
  std::size_t out_dim = c.task == TaskKind::classification ? 10 : 1;
  if (!c.widths.empty()) {
    require(c.widths.front() == train.dim(), ErrorKind::dimension,
            "model.widths starts at " + std::to_string(c.widths.front()) +
                " but the data has dimension " + std::to_string(train.dim()));
    require(c.widths.back() == out_dim, ErrorKind::dimension,
            "model.widths ends at " + std::to_string(c.widths.back()) + ", expected " +
                std::to_string(out_dim));
    return c.widths;
  }
  std::vector<std::size_t> w{train.dim()};
  w.insert(w.end(), c.hidden.begin(), c.hidden.end());
  w.push_back(out_dim);
  return w;
}

TrainOptions main_train_options(const ExperimentConfig& c) {
  TrainOptions o;
  o.epochs = c.training.epochs;
  o.batch_size = c.training.batch_size;
  o.optimizer.learning_rate = c.training.lr;
  return o;
}

}  // namespace kanwm
