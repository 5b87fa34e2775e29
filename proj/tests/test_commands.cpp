#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "nnadapt/commands.hpp"
#include "nnadapt/dataset.hpp"
#include "nnadapt/errors.hpp"
#include "nnadapt/evalreport.hpp"
#include "nnadapt/model.hpp"

using namespace nnadapt;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string write_config(const std::string& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2);
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::path("/tmp") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("load_run_config: defaults when no file is given") {
  RunConfig cfg = load_run_config("", {});
  CHECK(cfg.n_per_domain == 1000);
  CHECK(cfg.num_classes == 4);
  CHECK(cfg.dims == 10);
  CHECK(cfg.rotation_degrees == 45.0);
  REQUIRE(cfg.translation.size() == 10);  // scalar default expanded to one entry per dim
  for (double t : cfg.translation) CHECK(t == 2.0);
  CHECK(cfg.noise_std == 1.0);
  CHECK(cfg.class_sep == 6.0);
  CHECK(cfg.seed == 2020);
  CHECK(cfg.out_dir == "out");
  CHECK(cfg.adapt.mode == NeighborMode::Nnh);
  CHECK(cfg.resolved_source_data() == "out/source.csv");
  CHECK(cfg.resolved_target_data() == "out/target.csv");
  CHECK(cfg.resolved_source_checkpoint() == "out/source_model.json");
  CHECK(cfg.resolved_adapted_checkpoint() == "out/adapted_model.json");
  CHECK(cfg.resolved_eval_data() == "out/target.csv");
  CHECK(cfg.resolved_eval_checkpoint() == "out/adapted_model.json");
}

TEST_CASE("load_run_config: file fields land in the right places") {
  fs::path dir = fresh_dir("nnadapt_cfg_fields");
  json j{{"n_per_domain", 80},
         {"num_classes", 3},
         {"dims", 5},
         {"rotation_degrees", 30.0},
         {"translation", json::array({0.5, -1.0, 0.0, 2.0, 1.0})},
         {"hidden_dim", 16},
         {"pretrain_epochs", 4},
         {"beta", 0.4},
         {"mode", "shnnh"},
         {"confident_rule", "entropy"},
         {"use_chain_search", false},
         {"seed", 99},
         {"out_dir", "elsewhere"},
         {"eval_data", "custom.csv"}};
  RunConfig cfg = load_run_config(write_config((dir / "c.json").string(), j), {});
  CHECK(cfg.n_per_domain == 80);
  CHECK(cfg.num_classes == 3);
  CHECK(cfg.dims == 5);
  CHECK(cfg.rotation_degrees == 30.0);
  REQUIRE(cfg.translation.size() == 5);
  CHECK(cfg.translation[1] == -1.0);
  CHECK(cfg.pretrain.hidden_dim == 16);
  CHECK(cfg.pretrain.epochs == 4);
  CHECK(cfg.adapt.beta == 0.4);
  CHECK(cfg.adapt.mode == NeighborMode::Shnnh);
  CHECK(cfg.adapt.confident_rule == ConfidentRule::EntropyOnly);
  CHECK_FALSE(cfg.adapt.use_chain_search);
  CHECK(cfg.seed == 99);
  CHECK(cfg.out_dir == "elsewhere");
  CHECK(cfg.resolved_eval_data() == "custom.csv");
  CHECK(cfg.resolved_target_data() == "elsewhere/target.csv");
}

TEST_CASE("load_run_config: scalar translation expands to every dim") {
  fs::path dir = fresh_dir("nnadapt_cfg_scalar");
  json j{{"dims", 4}, {"translation", 1.25}};
  RunConfig cfg = load_run_config(write_config((dir / "c.json").string(), j), {});
  REQUIRE(cfg.translation.size() == 4);
  for (double t : cfg.translation) CHECK(t == 1.25);

  json bad{{"dims", 4}, {"translation", json::array({1.0, 2.0})}};
  CHECK_THROWS_AS(load_run_config(write_config((dir / "bad.json").string(), bad), {}),
                  ConfigError);
}

TEST_CASE("load_run_config: rejects unknown keys, bad types, bad values") {
  fs::path dir = fresh_dir("nnadapt_cfg_bad");
  CHECK_THROWS_WITH_AS(
      load_run_config(write_config((dir / "a.json").string(), json{{"n_samples", 10}}), {}),
      doctest::Contains("unknown config field"), ConfigError);
  CHECK_THROWS_WITH_AS(
      load_run_config(write_config((dir / "b.json").string(), json{{"dims", "ten"}}), {}),
      doctest::Contains("wrong type"), ConfigError);
  CHECK_THROWS_AS(
      load_run_config(write_config((dir / "c.json").string(), json{{"mode", "magic"}}), {}),
      ConfigError);
  CHECK_THROWS_AS(
      load_run_config(write_config((dir / "d.json").string(), json{{"n_per_domain", 1}}), {}),
      ConfigError);
  CHECK_THROWS_AS(
      load_run_config(write_config((dir / "e.json").string(), json{{"label_smoothing", 1.0}}), {}),
      ConfigError);
  // malformed json and non-object roots are config errors; a missing file is io
  {
    std::ofstream out(dir / "mangled.json");
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_run_config((dir / "mangled.json").string(), {}), ConfigError);
  {
    std::ofstream out(dir / "list.json");
    out << "[1,2]";
  }
  CHECK_THROWS_AS(load_run_config((dir / "list.json").string(), {}), ConfigError);
  CHECK_THROWS_AS(load_run_config((dir / "nope.json").string(), {}), IoError);
}

TEST_CASE("load_run_config: flag overrides beat the file") {
  fs::path dir = fresh_dir("nnadapt_cfg_override");
  json j{{"seed", 5}, {"out_dir", "from_file"}, {"mode", "nnh"}};
  CliOverrides ov;
  ov.seed = 123;
  ov.out_dir = "from_flag";
  ov.mode = "shnnh";
  RunConfig cfg = load_run_config(write_config((dir / "c.json").string(), j), ov);
  CHECK(cfg.seed == 123);
  CHECK(cfg.out_dir == "from_flag");
  CHECK(cfg.adapt.mode == NeighborMode::Shnnh);

  CliOverrides bad;
  bad.mode = "magic";
  CHECK_THROWS_AS(load_run_config("", bad), ConfigError);
}

TEST_CASE("canonical_config_json: single sorted line, sensitive to every change") {
  RunConfig cfg = load_run_config("", {});
  const std::string a = canonical_config_json(cfg);
  const std::string b = canonical_config_json(cfg);
  CHECK(a == b);
  CHECK(a.find('\n') == std::string::npos);
  // nlohmann objects iterate key-sorted, so the dump starts at the first key alphabetically
  CHECK(a.rfind("{\"ablate_rounds\":", 0) == 0);
  cfg.adapt.beta = 0.37;
  CHECK(canonical_config_json(cfg) != a);

  json parsed = json::parse(a);
  CHECK(parsed["mode"] == "nnh");
  CHECK(parsed["source_data"] == "out/source.csv");
}

TEST_CASE("command pipeline: gen-data, pretrain, adapt, eval, ablate") {
  fs::path dir = fresh_dir("nnadapt_cmd_pipeline");
  json j{{"n_per_domain", 120},   {"num_classes", 3},
         {"dims", 4},             {"rotation_degrees", 25.0},
         {"translation", 1.0},    {"noise_std", 0.8},
         {"class_sep", 5.0},      {"hidden_dim", 12},
         {"bottleneck_dim", 6},   {"pretrain_epochs", 8},
         {"pretrain_batch", 30},  {"max_epochs", 3},
         {"adapt_batch", 30},     {"ablate_rounds", 1},
         {"seed", 31},            {"out_dir", (dir / "out").string()}};
  RunConfig cfg = load_run_config(write_config((dir / "cfg.json").string(), j), {});

  REQUIRE(cmd_gen_data(cfg) == 0);
  CHECK(fs::exists(cfg.resolved_source_data()));
  CHECK(fs::exists(cfg.resolved_target_data()));
  CHECK(slurp((dir / "out" / "resolved_config_gen-data.json").string()) ==
        canonical_config_json(cfg) + "\n");
  DomainDataset src = load_csv(cfg.resolved_source_data(), 3);
  CHECK(src.features.rows == 120);
  CHECK(src.features.cols == 4);

  REQUIRE(cmd_pretrain(cfg) == 0);
  CHECK(fs::exists(dir / "out" / "resolved_config_pretrain.json"));
  CHECK(fs::exists(dir / "out" / "pretrain_log.csv"));
  TargetModel source_model = load_checkpoint(cfg.resolved_source_checkpoint());
  CHECK(source_model.in_dim == 4);
  CHECK(source_model.num_classes == 3);
  CHECK_FALSE(source_model.classifier_frozen);  // freezing happens at adaptation start

  REQUIRE(cmd_adapt(cfg) == 0);
  CHECK(fs::exists(cfg.resolved_adapted_checkpoint()));
  CHECK(load_checkpoint(cfg.resolved_adapted_checkpoint()).classifier_frozen);
  const std::string history1 = slurp((dir / "out" / "history.csv").string());
  const std::string model1 = slurp(cfg.resolved_adapted_checkpoint());
  CHECK(history1.rfind("epoch,", 0) == 0);

  // rerunning the same resolved config reproduces both artifacts byte for byte
  REQUIRE(cmd_adapt(cfg) == 0);
  CHECK(slurp((dir / "out" / "history.csv").string()) == history1);
  CHECK(slurp(cfg.resolved_adapted_checkpoint()) == model1);

  REQUIRE(cmd_eval(cfg) == 0);
  {
    std::ifstream in(dir / "out" / "report.json");
    json rep;
    in >> rep;
    CHECK(rep["accuracy"].get<double>() >= 0.0);
    CHECK(rep["accuracy"].get<double>() <= 1.0);
    CHECK(rep["num_classes"].get<int>() == 3);
    CHECK(rep["seed"].get<uint64_t>() == 31);
    CHECK(rep["config_fingerprint"].get<std::string>() ==
          config_fingerprint(canonical_config_json(cfg)));
  }
  {
    std::ifstream in(dir / "out" / "projection.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "x,y,label,domain");
    int rows = 0;
    std::string last;
    while (std::getline(in, line))
      if (!line.empty()) {
        ++rows;
        last = line;
      }
    CHECK(rows == 120);
    CHECK(last.find(",eval") != std::string::npos);
  }
  CHECK(fs::exists(dir / "out" / "confusion.csv"));

  RunConfig ablate_cfg = cfg;
  ablate_cfg.adapt.max_epochs = 2;
  REQUIRE(cmd_ablate(ablate_cfg) == 0);
  {
    std::ifstream in(dir / "out" / "ablation.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "variant,mean_accuracy,rounds_ok,status");
    std::getline(in, line);
    CHECK(line.rfind("source-only,", 0) == 0);
    int rows = 1;
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 7);
  }

  fs::remove_all(dir);
}

TEST_CASE("cmd_adapt: missing checkpoint is an io error naming the path") {
  fs::path dir = fresh_dir("nnadapt_cmd_missing");
  json j{{"n_per_domain", 40}, {"num_classes", 2}, {"dims", 3},
         {"translation", 0.5}, {"seed", 7},        {"out_dir", (dir / "out").string()}};
  RunConfig cfg = load_run_config(write_config((dir / "cfg.json").string(), j), {});
  REQUIRE(cmd_gen_data(cfg) == 0);
  CHECK_THROWS_WITH_AS(cmd_adapt(cfg), doctest::Contains("source_model.json"), IoError);
  // eval before adapt fails the same way on the adapted checkpoint
  CHECK_THROWS_AS(cmd_eval(cfg), IoError);
  fs::remove_all(dir);
}
