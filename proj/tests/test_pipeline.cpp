#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "snnkit/pipeline.hpp"

using namespace snnkit;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

PipelineConfig tiny_config(const std::string& out_dir) {
  RawConfig raw = parse_config_text(
      "[stages]\n"
      "train = true\nfuse = true\nfinetune = true\nnormalize = true\n"
      "convert = true\nsimulate = true\nsweep = true\nreport = true\n"
      "[network]\narch = mlp\nhidden = 16\nbatchnorm = true\n"
      "[dataset]\nkind = patterns\ntrain_per_class = 6\neval_per_class = 2\n"
      "[train]\nepochs = 4\nlr = 0.1\n"
      "[quant]\nlevels = 16\nepochs = 4\nlr = 0.05\n"
      "[sim]\nT = 16\nv0 = 0.5\n"
      "[sweep]\nt_list = 8,16\n"
      "[run]\nseed = 321\nthreads = 1\n");
  PipelineConfig cfg = make_pipeline_config(raw);
  cfg.out_dir = out_dir;
  return cfg;
}

}  // namespace

TEST_CASE("a disabled pipeline writes nothing and succeeds") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "snnkit_pipe_empty").string();
  fs::remove_all(dir);
  PipelineConfig cfg;
  cfg.out_dir = dir;
  std::ostringstream sink;
  const PipelineResult res = run_pipeline(cfg, sink);
  CHECK(res.ok);
  CHECK_FALSE(fs::exists(dir));
}

TEST_CASE("the full pipeline produces every stage artifact deterministically") {
  namespace fs = std::filesystem;
  const std::string dir_a = (fs::temp_directory_path() / "snnkit_pipe_a").string();
  const std::string dir_b = (fs::temp_directory_path() / "snnkit_pipe_b").string();
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  std::ostringstream sink_a, sink_b;
  const PipelineResult a = run_pipeline(tiny_config(dir_a), sink_a);
  REQUIRE_MESSAGE(a.ok, (a.failed_stage + ": " + a.error));
  const PipelineResult b = run_pipeline(tiny_config(dir_b), sink_b);
  REQUIRE(b.ok);

  const std::vector<std::string> expected = {
      "00-train.network.json",    "00-train.metrics.csv",
      "02-fuse.network.json",     "03-finetune.network.json",
      "03-finetune.metrics.csv",  "04-normalize.network.json",
      "05-convert.snn.json",      "06-simulate.trace.csv",
      "06-simulate.trace.bin",    "06-simulate.profile.csv",
      "06-simulate.error_report.csv", "06-simulate.error_report.txt",
      "07-sweep.csv",             "08-report.txt",
      "08-report.rate_curve.svg", "08-report.sweep.svg"};
  for (const auto& name : expected) {
    CAPTURE(name);
    CHECK(fs::exists(dir_a + "/" + name));
    // identical config + seed means byte-identical artifacts
    CHECK(read_file(dir_a + "/" + name) == read_file(dir_b + "/" + name));
  }
  CHECK(fs::exists(dir_a + "/run.log"));  // timestamps live here only

  // every stage output is independently loadable
  CHECK_NOTHROW(load_network(dir_a + "/00-train.network.json"));
  CHECK_NOTHROW(load_network(dir_a + "/04-normalize.network.json"));
  CHECK_NOTHROW(load_snn(dir_a + "/05-convert.snn.json"));
  const NetworkGraph normalized = load_network(dir_a + "/04-normalize.network.json");
  CHECK(normalized.normalization.has_value());

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("a failing stage is named and earlier artifacts survive") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "snnkit_pipe_fail").string();
  fs::remove_all(dir);
  PipelineConfig cfg = tiny_config(dir);
  cfg.stages.fuse = false;  // leave BatchNorm in the graph: finetune must fail
  std::ostringstream sink;
  const PipelineResult res = run_pipeline(cfg, sink);
  CHECK_FALSE(res.ok);
  CHECK(res.failed_stage == "finetune");
  CHECK(fs::exists(dir + "/00-train.network.json"));
  fs::remove_all(dir);
}

TEST_CASE("later stages resume from artifacts left by earlier runs") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "snnkit_pipe_resume").string();
  fs::remove_all(dir);

  PipelineConfig first = tiny_config(dir);
  first.stages.simulate = false;
  first.stages.sweep = false;
  first.stages.report = false;
  std::ostringstream sink;
  REQUIRE(run_pipeline(first, sink).ok);

  PipelineConfig second = tiny_config(dir);
  second.stages.train = false;
  second.stages.fuse = false;
  second.stages.finetune = false;
  second.stages.normalize = false;
  second.stages.convert = false;
  const PipelineResult res = run_pipeline(second, sink);
  REQUIRE_MESSAGE(res.ok, (res.failed_stage + ": " + res.error));
  CHECK(fs::exists(dir + "/07-sweep.csv"));
  fs::remove_all(dir);
}

TEST_CASE("snn artifacts reconstruct the simulator bit-exactly") {
  namespace fs = std::filesystem;
  const std::string dir = (fs::temp_directory_path() / "snnkit_pipe_snn").string();
  fs::remove_all(dir);
  PipelineConfig cfg = tiny_config(dir);
  cfg.stages.simulate = false;
  cfg.stages.sweep = false;
  cfg.stages.report = false;
  std::ostringstream sink;
  REQUIRE(run_pipeline(cfg, sink).ok);

  LoadedSnn loaded = load_snn(dir + "/05-convert.snn.json");
  const NetworkGraph normalized = load_network(dir + "/04-normalize.network.json");
  CHECK(loaded.source == normalized);
  CHECK(loaded.options.v0 == 0.5);
  CHECK(loaded.snn.readout == Readout::MembraneAccumulate);
  fs::remove_all(dir);
}
