#include "nnadapt/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "nnadapt/dataset.hpp"
#include "nnadapt/errors.hpp"
#include "nnadapt/evalreport.hpp"
#include "nnadapt/selflabel.hpp"

namespace nnadapt {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

NeighborMode parse_mode(const std::string& s) {
  if (s == "nnh") return NeighborMode::Nnh;
  if (s == "shnnh") return NeighborMode::Shnnh;
  throw ConfigError("mode must be 'nnh' or 'shnnh', got '" + s + "'");
}

std::string mode_name(NeighborMode m) { return m == NeighborMode::Nnh ? "nnh" : "shnnh"; }

ConfidentRule parse_rule(const std::string& s) {
  if (s == "intersection") return ConfidentRule::Intersection;
  if (s == "entropy") return ConfidentRule::EntropyOnly;
  if (s == "distance") return ConfidentRule::DistanceOnly;
  throw ConfigError("confident_rule must be intersection|entropy|distance, got '" + s + "'");
}

std::string rule_name(ConfidentRule r) {
  switch (r) {
    case ConfidentRule::Intersection: return "intersection";
    case ConfidentRule::EntropyOnly: return "entropy";
    case ConfidentRule::DistanceOnly: return "distance";
  }
  return "intersection";
}

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + key + "' has the wrong type");
  }
}

void apply_field(RunConfig& cfg, const std::string& key, const json& v) {
  // task
  if (key == "n_per_domain") cfg.n_per_domain = get_as<int>(v, key);
  else if (key == "num_classes") cfg.num_classes = get_as<int>(v, key);
  else if (key == "dims") cfg.dims = get_as<int>(v, key);
  else if (key == "rotation_degrees") cfg.rotation_degrees = get_as<double>(v, key);
  else if (key == "noise_std") cfg.noise_std = get_as<double>(v, key);
  else if (key == "class_sep") cfg.class_sep = get_as<double>(v, key);
  else if (key == "translation") {
    if (v.is_number()) cfg.translation.assign(1, v.get<double>());  // resized to dims later
    else cfg.translation = get_as<std::vector<double>>(v, key);
  }
  // model + source training
  else if (key == "hidden_dim") cfg.pretrain.hidden_dim = get_as<int>(v, key);
  else if (key == "bottleneck_dim") cfg.pretrain.bottleneck_dim = get_as<int>(v, key);
  else if (key == "pretrain_epochs") cfg.pretrain.epochs = get_as<int>(v, key);
  else if (key == "pretrain_batch") cfg.pretrain.batch = get_as<int>(v, key);
  else if (key == "pretrain_lr") cfg.pretrain.lr = get_as<double>(v, key);
  else if (key == "pretrain_momentum") cfg.pretrain.momentum = get_as<double>(v, key);
  else if (key == "pretrain_lr_decay") cfg.pretrain.lr_decay = get_as<double>(v, key);
  else if (key == "label_smoothing") cfg.pretrain.label_smoothing = get_as<double>(v, key);
  // adaptation
  else if (key == "beta") cfg.adapt.beta = get_as<double>(v, key);
  else if (key == "alpha") cfg.adapt.alpha = get_as<double>(v, key);
  else if (key == "delta") cfg.adapt.delta = get_as<double>(v, key);
  else if (key == "omega_i") cfg.adapt.omega_i = get_as<double>(v, key);
  else if (key == "omega_in") cfg.adapt.omega_in = get_as<double>(v, key);
  else if (key == "eta_i") cfg.adapt.eta_i = get_as<double>(v, key);
  else if (key == "eta_in") cfg.adapt.eta_in = get_as<double>(v, key);
  else if (key == "max_epochs") cfg.adapt.max_epochs = get_as<int>(v, key);
  else if (key == "iters_per_epoch") cfg.adapt.iters_per_epoch = get_as<int>(v, key);
  else if (key == "adapt_batch") cfg.adapt.batch = get_as<int>(v, key);
  else if (key == "adapt_lr") cfg.adapt.lr = get_as<double>(v, key);
  else if (key == "adapt_momentum") cfg.adapt.momentum = get_as<double>(v, key);
  else if (key == "adapt_lr_decay") cfg.adapt.lr_decay = get_as<double>(v, key);
  else if (key == "mode") cfg.adapt.mode = parse_mode(get_as<std::string>(v, key));
  else if (key == "use_im") cfg.adapt.use_im = get_as<bool>(v, key);
  else if (key == "min_similarity_labels") cfg.adapt.min_similarity_labels = get_as<bool>(v, key);
  else if (key == "min_logit_distance") cfg.adapt.min_logit_distance = get_as<bool>(v, key);
  else if (key == "use_chain_search") cfg.adapt.use_chain_search = get_as<bool>(v, key);
  else if (key == "confident_rule") cfg.adapt.confident_rule = parse_rule(get_as<std::string>(v, key));
  else if (key == "kmeans_rounds") cfg.adapt.kmeans_rounds = get_as<int>(v, key);
  // shared
  else if (key == "seed") cfg.seed = get_as<uint64_t>(v, key);
  else if (key == "out_dir") cfg.out_dir = get_as<std::string>(v, key);
  else if (key == "ablate_rounds") cfg.ablate_rounds = get_as<int>(v, key);
  // paths
  else if (key == "source_data") cfg.source_data = get_as<std::string>(v, key);
  else if (key == "target_data") cfg.target_data = get_as<std::string>(v, key);
  else if (key == "source_checkpoint") cfg.source_checkpoint = get_as<std::string>(v, key);
  else if (key == "adapted_checkpoint") cfg.adapted_checkpoint = get_as<std::string>(v, key);
  else if (key == "eval_data") cfg.eval_data = get_as<std::string>(v, key);
  else if (key == "eval_checkpoint") cfg.eval_checkpoint = get_as<std::string>(v, key);
  else throw ConfigError("unknown config field '" + key + "'");
}

void validate_config(RunConfig& cfg) {
  if (cfg.n_per_domain < 2) throw ConfigError("n_per_domain must be at least 2");
  if (cfg.num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (cfg.dims < 2) throw ConfigError("dims must be at least 2");
  if (cfg.noise_std < 0.0) throw ConfigError("noise_std must be non-negative");
  if (cfg.class_sep <= 0.0) throw ConfigError("class_sep must be positive");
  if (cfg.translation.size() == 1)
    cfg.translation.assign(static_cast<size_t>(cfg.dims), cfg.translation[0]);
  if (!cfg.translation.empty() && static_cast<int>(cfg.translation.size()) != cfg.dims)
    throw ConfigError("translation must be a scalar or have one entry per dim");
  if (cfg.pretrain.hidden_dim < 1 || cfg.pretrain.bottleneck_dim < 1)
    throw ConfigError("model dims must be positive");
  if (cfg.pretrain.epochs < 0) throw ConfigError("pretrain_epochs must be non-negative");
  if (cfg.pretrain.batch < 2) throw ConfigError("pretrain_batch must be at least 2");
  if (cfg.pretrain.lr <= 0.0) throw ConfigError("pretrain_lr must be positive");
  if (cfg.pretrain.label_smoothing < 0.0 || cfg.pretrain.label_smoothing >= 1.0)
    throw ConfigError("label_smoothing must be in [0,1)");
  if (cfg.ablate_rounds < 1) throw ConfigError("ablate_rounds must be at least 1");
  cfg.adapt.validate();
}

void write_snapshot(const RunConfig& cfg, const std::string& subcommand) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.out_dir + ": " + ec.message());
  const std::string path = join(cfg.out_dir, "resolved_config_" + subcommand + ".json");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config snapshot: " + path);
  out << canonical_config_json(cfg) << "\n";
  if (!out) throw IoError("failed writing config snapshot: " + path);
}

ShiftSpec make_shift_spec(const RunConfig& cfg) {
  ShiftSpec spec;
  spec.rotation = cfg.rotation_degrees * M_PI / 180.0;
  spec.translation = cfg.translation;
  spec.noise_std = cfg.noise_std;
  spec.class_sep = cfg.class_sep;
  spec.seed = SeededRng(cfg.seed).derive("data").seed();
  return spec;
}

ExperimentTask make_task(const RunConfig& cfg) {
  ExperimentTask task;
  task.n_per_domain = cfg.n_per_domain;
  task.num_classes = cfg.num_classes;
  task.dims = cfg.dims;
  task.rotation = cfg.rotation_degrees * M_PI / 180.0;
  task.translation = cfg.translation;
  task.noise_std = cfg.noise_std;
  task.class_sep = cfg.class_sep;
  task.pretrain = cfg.pretrain;
  task.adapt = cfg.adapt;
  task.rounds = cfg.ablate_rounds;
  task.master_seed = cfg.seed;
  return task;
}

}  // namespace

std::string RunConfig::resolved_source_data() const {
  return source_data.empty() ? join(out_dir, "source.csv") : source_data;
}
std::string RunConfig::resolved_target_data() const {
  return target_data.empty() ? join(out_dir, "target.csv") : target_data;
}
std::string RunConfig::resolved_source_checkpoint() const {
  return source_checkpoint.empty() ? join(out_dir, "source_model.json") : source_checkpoint;
}
std::string RunConfig::resolved_adapted_checkpoint() const {
  return adapted_checkpoint.empty() ? join(out_dir, "adapted_model.json") : adapted_checkpoint;
}
std::string RunConfig::resolved_eval_data() const {
  return eval_data.empty() ? resolved_target_data() : eval_data;
}
std::string RunConfig::resolved_eval_checkpoint() const {
  return eval_checkpoint.empty() ? resolved_adapted_checkpoint() : eval_checkpoint;
}

RunConfig load_run_config(const std::string& config_path, const CliOverrides& overrides) {
  RunConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open config file: " + config_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ConfigError("malformed config json in " + config_path + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a json object");
    for (const auto& [key, value] : j.items()) apply_field(cfg, key, value);
  }
  if (overrides.seed) cfg.seed = *overrides.seed;
  if (overrides.out_dir) cfg.out_dir = *overrides.out_dir;
  if (overrides.mode) cfg.adapt.mode = parse_mode(*overrides.mode);
  validate_config(cfg);
  return cfg;
}

std::string canonical_config_json(const RunConfig& cfg) {
  json j;  // nlohmann objects are key-sorted, so dump() is canonical
  j["n_per_domain"] = cfg.n_per_domain;
  j["num_classes"] = cfg.num_classes;
  j["dims"] = cfg.dims;
  j["rotation_degrees"] = cfg.rotation_degrees;
  j["translation"] = cfg.translation;
  j["noise_std"] = cfg.noise_std;
  j["class_sep"] = cfg.class_sep;
  j["hidden_dim"] = cfg.pretrain.hidden_dim;
  j["bottleneck_dim"] = cfg.pretrain.bottleneck_dim;
  j["pretrain_epochs"] = cfg.pretrain.epochs;
  j["pretrain_batch"] = cfg.pretrain.batch;
  j["pretrain_lr"] = cfg.pretrain.lr;
  j["pretrain_momentum"] = cfg.pretrain.momentum;
  j["pretrain_lr_decay"] = cfg.pretrain.lr_decay;
  j["label_smoothing"] = cfg.pretrain.label_smoothing;
  j["beta"] = cfg.adapt.beta;
  j["alpha"] = cfg.adapt.alpha;
  j["delta"] = cfg.adapt.delta;
  j["omega_i"] = cfg.adapt.omega_i;
  j["omega_in"] = cfg.adapt.omega_in;
  j["eta_i"] = cfg.adapt.eta_i;
  j["eta_in"] = cfg.adapt.eta_in;
  j["max_epochs"] = cfg.adapt.max_epochs;
  j["iters_per_epoch"] = cfg.adapt.iters_per_epoch;
  j["adapt_batch"] = cfg.adapt.batch;
  j["adapt_lr"] = cfg.adapt.lr;
  j["adapt_momentum"] = cfg.adapt.momentum;
  j["adapt_lr_decay"] = cfg.adapt.lr_decay;
  j["mode"] = mode_name(cfg.adapt.mode);
  j["use_im"] = cfg.adapt.use_im;
  j["min_similarity_labels"] = cfg.adapt.min_similarity_labels;
  j["min_logit_distance"] = cfg.adapt.min_logit_distance;
  j["use_chain_search"] = cfg.adapt.use_chain_search;
  j["confident_rule"] = rule_name(cfg.adapt.confident_rule);
  j["kmeans_rounds"] = cfg.adapt.kmeans_rounds;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["ablate_rounds"] = cfg.ablate_rounds;
  j["source_data"] = cfg.resolved_source_data();
  j["target_data"] = cfg.resolved_target_data();
  j["source_checkpoint"] = cfg.resolved_source_checkpoint();
  j["adapted_checkpoint"] = cfg.resolved_adapted_checkpoint();
  j["eval_data"] = cfg.resolved_eval_data();
  j["eval_checkpoint"] = cfg.resolved_eval_checkpoint();
  return j.dump();
}

int cmd_gen_data(const RunConfig& cfg) {
  write_snapshot(cfg, "gen-data");
  auto [source, target] = generate_pair(cfg.n_per_domain, cfg.num_classes, cfg.dims,
                                        make_shift_spec(cfg));
  save_csv(source, cfg.resolved_source_data());
  save_csv(target, cfg.resolved_target_data());
  std::cout << "gen-data: wrote " << cfg.resolved_source_data() << " and "
            << cfg.resolved_target_data() << " (" << cfg.n_per_domain << " rows each, "
            << cfg.num_classes << " classes)\n";
  return 0;
}

int cmd_pretrain(const RunConfig& cfg) {
  write_snapshot(cfg, "pretrain");
  DomainDataset source = load_csv(cfg.resolved_source_data(), cfg.num_classes);
  PretrainConfig pc = cfg.pretrain;
  pc.seed = SeededRng(cfg.seed).derive("pretrain").seed();
  PretrainResult res = train_source(source, pc);
  save_checkpoint(res.model, cfg.resolved_source_checkpoint());
  save_pretrain_log(res.log, join(cfg.out_dir, "pretrain_log.csv"));
  const double acc = res.log.empty() ? 0.0 : res.log.back().accuracy;
  std::cout << "pretrain: source accuracy " << acc << " after " << pc.epochs << " epochs, wrote "
            << cfg.resolved_source_checkpoint() << "\n";
  return 0;
}

int cmd_adapt(const RunConfig& cfg) {
  write_snapshot(cfg, "adapt");
  DomainDataset target = load_csv(cfg.resolved_target_data(), cfg.num_classes);
  TargetModel source_model = load_checkpoint(cfg.resolved_source_checkpoint());
  AdaptConfig ac = cfg.adapt;
  ac.seed = SeededRng(cfg.seed).derive("adapt").seed();
  AdaptResult res = adapt_loop(source_model, target.features, ac, &target.labels);
  save_checkpoint(res.model, cfg.resolved_adapted_checkpoint());
  save_history(res.history, join(cfg.out_dir, "history.csv"));
  if (res.aborted) {
    std::cerr << "error: adaptation aborted (" << res.message << "); last checkpoint saved to "
              << cfg.resolved_adapted_checkpoint() << "\n";
    return 4;
  }
  const double acc = res.history.empty() ? -1.0 : res.history.back().target_accuracy;
  std::cout << "adapt: mode " << mode_name(ac.mode) << ", final target accuracy " << acc
            << ", wrote " << cfg.resolved_adapted_checkpoint() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  write_snapshot(cfg, "eval");
  TargetModel model = load_checkpoint(cfg.resolved_eval_checkpoint());
  DomainDataset data = load_csv(cfg.resolved_eval_data(), model.num_classes);
  if (data.features.cols != model.in_dim)
    throw ConfigError("eval data width does not match checkpoint input dim");

  EvalReport rep = evaluate(predict(model, data.features), data.labels, model.num_classes);
  rep.seed = cfg.seed;
  rep.fingerprint = config_fingerprint(canonical_config_json(cfg));
  save_report(rep, join(cfg.out_dir, "report.json"));
  save_confusion(rep, join(cfg.out_dir, "confusion.csv"));

  model.set_eval();
  AuxiliaryCache aux = compute_aux(model, data.features);
  save_projection(project2d(aux.Bbar), data.labels, "eval", join(cfg.out_dir, "projection.csv"));
  std::cout << "eval: accuracy " << rep.accuracy << ", wrote report.json/confusion.csv/projection.csv under "
            << cfg.out_dir << "\n";
  return 0;
}

int cmd_ablate(const RunConfig& cfg) {
  write_snapshot(cfg, "ablate");
  std::vector<AblationRow> rows = run_ablation_suite(make_task(cfg));
  const std::string path = join(cfg.out_dir, "ablation.csv");
  save_ablation(rows, path);
  std::cout << "ablate: " << rows.size() << " variants over " << cfg.ablate_rounds
            << " rounds, wrote " << path << "\n";
  return 0;
}

}  // namespace nnadapt
