#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "scene/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = scene::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

constexpr const char* kTinyConfig =
    "seed = 3\n"
    "train.epochs = 1\n"
    "train.K = 20\n"
    "train.p_u = 2\n"
    "model.gen_arch = 8,8\n"
    "model.phi_arch = 6\n";

}  // namespace

TEST_CASE("simulate then km yields a non-increasing curve") {
  TempDir dir("scene_cli_km");
  Result r = invoke({"simulate", "--model", "ph", "--n", "300", "--p", "5", "--tau", "19", "--seed", "2",
                     "--out", dir / "d.csv"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "d.json"));
  const auto side = nlohmann::json::parse(scene::io::read_text(dir / "d.json"));
  CHECK(side.at("N") == 300);

  r = invoke({"km", "--data", dir / "d.csv", "--out", dir / "km.csv"});
  REQUIRE(r.code == 0);
  const auto curve = scene::io::parse_series_csv(scene::io::read_text(dir / "km.csv"), "t,s");
  REQUIRE(!curve.y.empty());
  for (std::size_t i = 1; i < curve.y.size(); ++i) {
    CHECK(curve.x[i] > curve.x[i - 1]);
    CHECK(curve.y[i] <= curve.y[i - 1]);
  }
}

TEST_CASE("selfcheck passes") {
  const Result r = invoke({"selfcheck"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("config and usage errors exit with 1") {
  TempDir dir("scene_cli_errors");
  REQUIRE(invoke({"simulate", "--model", "ph", "--n", "30", "--p", "2", "--tau", "5", "--seed", "1", "--out",
                  dir / "d.csv"})
              .code == 0);
  scene::io::write_text_atomic(dir / "bad.cfg", "seed = 1\nlearning_rate = 0.1\n");
  Result r = invoke({"train", "--data", dir / "d.csv", "--config", dir / "bad.cfg", "--out-model",
                     dir / "m.json", "--out-history", dir / "h.csv"});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: config: unknown key", 0) == 0);
  CHECK_FALSE(fs::exists(dir / "m.json"));

  scene::io::write_text_atomic(dir / "noseed.cfg", "train.epochs = 1\n");
  r = invoke({"train", "--data", dir / "d.csv", "--config", dir / "noseed.cfg", "--out-model", dir / "m.json",
              "--out-history", dir / "h.csv"});
  CHECK(r.code == 1);
  CHECK(r.err.find("seed") != std::string::npos);

  r = invoke({"simulate", "--model", "weibull", "--n", "3"});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: usage:", 0) == 0);
  CHECK(invoke({}).code == 1);
}

TEST_CASE("runtime errors exit with 2") {
  TempDir dir("scene_cli_runtime");
  const Result r = invoke({"km", "--data", dir / "missing.csv", "--out", dir / "km.csv"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: io:", 0) == 0);

  scene::io::write_text_atomic(dir / "bad.csv", "time,evt,x1\n1,1,0\n");
  CHECK(invoke({"km", "--data", dir / "bad.csv", "--out", dir / "km.csv"}).code == 2);
}

TEST_CASE("train, predict, importance and qq are deterministic and leave inputs alone") {
  TempDir dir("scene_cli_train");
  REQUIRE(invoke({"simulate", "--model", "po", "--n", "40", "--p", "3", "--tau", "35", "--seed", "5", "--out",
                  dir / "d.csv"})
              .code == 0);
  scene::io::write_text_atomic(dir / "c.cfg", kTinyConfig);
  const std::string data_before = scene::io::read_text(dir / "d.csv");
  const std::string cfg_before = scene::io::read_text(dir / "c.cfg");

  for (const char* tag : {"a", "b"}) {
    const std::string t(tag);
    REQUIRE(invoke({"train", "--data", dir / "d.csv", "--config", dir / "c.cfg", "--out-model",
                    dir / ("m" + t + ".json"), "--out-history", dir / ("h" + t + ".csv")})
                .code == 0);
    REQUIRE(invoke({"predict", "--model", dir / ("m" + t + ".json"), "--x", "0.1,0.2,0.3", "--grid", "1,2,4",
                    "--seed", "9", "--k", "200", "--out", dir / ("p" + t + ".csv")})
                .code == 0);
  }
  CHECK(scene::io::read_text(dir / "ma.json") == scene::io::read_text(dir / "mb.json"));
  CHECK(scene::io::read_text(dir / "ha.csv") == scene::io::read_text(dir / "hb.csv"));
  CHECK(scene::io::read_text(dir / "pa.csv") == scene::io::read_text(dir / "pb.csv"));
  CHECK(scene::io::read_text(dir / "d.csv") == data_before);
  CHECK(scene::io::read_text(dir / "c.cfg") == cfg_before);

  const auto pred = scene::io::parse_series_csv(scene::io::read_text(dir / "pa.csv"), "t,s");
  CHECK(pred.x == std::vector<double>{1, 2, 4});

  REQUIRE(invoke({"importance", "--model", dir / "ma.json", "--out", dir / "imp.json"}).code == 0);
  const auto imp = nlohmann::json::parse(scene::io::read_text(dir / "imp.json"));
  CHECK(imp.at("aux").size() == 2);
  CHECK(imp.at("covariates").size() == 3);

  REQUIRE(invoke({"qq", "--model", dir / "ma.json", "--truth", "po", "--x", "0,0,0", "--seed", "1", "--k", "500",
                  "--out", dir / "qq.csv"})
              .code == 0);
  CHECK(scene::io::read_text(dir / "qq.csv").rfind("q,true_q,gen_q\n", 0) == 0);

  CHECK(invoke({"predict", "--model", dir / "ma.json", "--x", "0.1", "--grid", "1", "--seed", "9", "--out",
                dir / "p.csv"})
            .code == 1);
}

TEST_CASE("band over a directory of curves") {
  TempDir dir("scene_cli_band");
  fs::create_directories(dir.path / "curves");
  scene::io::write_text_atomic(dir / "curves/a.csv", "t,s\n1,0.8\n2,0.2\n");
  scene::io::write_text_atomic(dir / "curves/b.csv", "t,s\n1,0.6\n2,0.4\n");
  REQUIRE(invoke({"band", "--curves-dir", dir / "curves", "--out", dir / "band.csv"}).code == 0);
  CHECK(scene::io::read_text(dir / "band.csv").rfind("t,lower,mean,upper\n1,", 0) == 0);
  scene::io::write_text_atomic(dir / "curves/c.csv", "t,s\n1,0.6\n3,0.4\n");
  const Result r = invoke({"band", "--curves-dir", dir / "curves", "--out", dir / "band2.csv"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: misaligned-curves", 0) == 0);
}

TEST_CASE("cv writes a report") {
  TempDir dir("scene_cli_cv");
  REQUIRE(invoke({"simulate", "--model", "ph", "--n", "60", "--p", "2", "--tau", "19", "--seed", "1", "--out",
                  dir / "d.csv"})
              .code == 0);
  scene::io::write_text_atomic(dir / "c.cfg", kTinyConfig);
  REQUIRE(invoke({"cv", "--data", dir / "d.csv", "--config", dir / "c.cfg", "--folds", "3", "--noise-columns", "2",
                  "--out", dir / "cv.json"})
              .code == 0);
  const auto rep = nlohmann::json::parse(scene::io::read_text(dir / "cv.json"));
  CHECK(rep.at("folds").size() == 3);
}
