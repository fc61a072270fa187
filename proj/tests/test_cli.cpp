#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "oracles.hpp"
#include "paddle/io.hpp"

using namespace paddle;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "paddle_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir.parent_path());
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> trace_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::map<std::string, std::string> report(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace

TEST_CASE("gen") {
  const fs::path a = fresh_dir("gen_a");
  const fs::path b = fresh_dir("gen_b");
  const std::vector<std::string> flags{"--variant", "low-rank", "--d", "25", "--k-true",
                                       "15", "--n", "2000", "--seed", "7"};
  auto with_out = [&](const fs::path& dir) {
    std::vector<std::string> args{"gen"};
    args.insert(args.end(), flags.begin(), flags.end());
    args.push_back("--out");
    args.push_back(dir.string());
    return args;
  };
  REQUIRE(run(with_out(a)).code == 0);
  const Matrix X = io::read_matrix(a / "X.pad");
  CHECK(X.rows() == 25);
  CHECK(X.cols() == 2000);
  CHECK(io::read_matrix(a / "generators.pad").cols() == 15);
  REQUIRE(run(with_out(b)).code == 0);
  for (const char* name : {"X.pad", "generators.pad", "coefficients.pad"}) {
    CHECK(slurp(a / name) == slurp(b / name));
  }
  // The manifest records the output directory, so compare it in place.
  const std::string manifest = slurp(a / "manifest.txt");
  REQUIRE(run(with_out(a)).code == 0);
  CHECK(slurp(a / "manifest.txt") == manifest);

  const fs::path bad = fresh_dir("gen_bad");
  const Result r = run({"gen", "--k-true", "0", "--out", bad.string()});
  CHECK(r.code == cli::kUsageError);
  CHECK(!fs::exists(bad));
  CHECK(run({"gen", "--variant", "nope", "--out", bad.string()}).code == cli::kUsageError);
  CHECK(!fs::exists(bad));
}

TEST_CASE("gen patches") {
  const fs::path dir = fresh_dir("gen_patches");
  const fs::path img = fresh_dir("gen_patches_img");
  fs::create_directories(img);
  std::mt19937_64 rng(1);
  io::write_matrix(img / "a.pad", Matrix(255.0 * oracle::gaussian(20, 20, rng).cwiseAbs()));
  REQUIRE(run({"gen", "--variant", "patches", "--images", (img / "a.pad").string(),
               "--patch-side", "6", "--count", "40", "--out", dir.string()})
              .code == 0);
  const Matrix P = io::read_matrix(dir / "X.pad");
  CHECK(P.rows() == 36);
  CHECK(P.cols() == 40);
  CHECK(run({"gen", "--variant", "patches", "--out", dir.string()}).code == cli::kUsageError);
}

TEST_CASE("train") {
  const fs::path data = fresh_dir("train_data");
  REQUIRE(run({"gen", "--n", "400", "--seed", "3", "--out", data.string()}).code == 0);
  const std::string x = (data / "X.pad").string();

  const fs::path out = fresh_dir("train_run");
  const std::vector<std::string> args{"train", "--x", x, "--k", "15", "--tau", "0", "--eta",
                                      "1", "--mu", "1e-4", "--rtol", "1e-4", "--t-max", "60",
                                      "--out", out.string()};
  const Result r = run(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* name : {"D.pad", "C.pad", "U.pad", "trace.csv", "config.ini"}) {
    CHECK(fs::exists(out / name));
  }
  const auto rows = trace_rows(out / "trace.csv");
  REQUIRE(!rows.empty());
  double previous = std::stod(rows[0][1]);
  for (const auto& row : rows) {
    CHECK(row.size() == 8);
    const double e = std::stod(row[1]);
    CHECK(e <= previous * (1.0 + 1e-9));
    previous = e;
  }

  const fs::path again = fresh_dir("train_again");
  std::vector<std::string> rerun = args;
  rerun.back() = again.string();
  REQUIRE(run(rerun).code == 0);
  CHECK(slurp(out / "trace.csv") == slurp(again / "trace.csv"));
  CHECK(slurp(out / "D.pad") == slurp(again / "D.pad"));

  const fs::path once = fresh_dir("train_once");
  REQUIRE(run({"train", "--x", x, "--k", "5", "--t-max", "1", "--out", once.string()}).code == 0);
  CHECK(trace_rows(once / "trace.csv").size() == 1);

  const fs::path snap = fresh_dir("train_snap");
  REQUIRE(run({"train", "--x", x, "--k", "5", "--t-max", "4", "--snapshot-every", "2", "--out",
               snap.string()})
              .code == 0);
  CHECK(fs::exists(snap / "snapshots" / "D_00002.pad"));
  CHECK(fs::exists(snap / "snapshots" / "C_00004.pad"));

  const fs::path provided = fresh_dir("train_provided");
  REQUIRE(run({"train", "--x", x, "--init", "provided", "--d0", (out / "D.pad").string(), "--c0",
               (out / "C.pad").string(), "--t-max", "2", "--out", provided.string()})
              .code == 0);
  CHECK(io::read_matrix(provided / "D.pad").cols() == 15);
  CHECK(run({"train", "--x", x, "--init", "provided", "--out", provided.string()}).code ==
        cli::kUsageError);

  CHECK(run({"train", "--x", x, "--k", "1000", "--out", fresh_dir("t").string()}).code ==
        cli::kUsageError);
  CHECK(run({"train", "--x", x, "--tau", "-1", "--out", fresh_dir("t").string()}).code ==
        cli::kUsageError);
  CHECK(run({"train", "--x", (data / "missing.pad").string(), "--out", fresh_dir("t").string()})
            .code == cli::kRuntimeError);
}

TEST_CASE("config files") {
  const fs::path data = fresh_dir("config_data");
  REQUIRE(run({"gen", "--n", "100", "--out", data.string()}).code == 0);
  const fs::path cfg = fresh_dir("config_file");
  fs::create_directories(cfg);
  {
    std::ofstream f(cfg / "train.ini");
    f << "x=" << (data / "X.pad").string() << "\nk=4\nt-max=1\ntau=0.5\n";
  }
  const fs::path out = fresh_dir("config_run");
  const Result r = run({"train", "--config", (cfg / "train.ini").string(), "--out", out.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(trace_rows(out / "trace.csv").size() == 1);
  CHECK(slurp(out / "config.ini").find("tau=0.5") != std::string::npos);
  CHECK(slurp(out / "config.ini").find("config=") == std::string::npos);

  // Flags typed on the command line win over the file.
  const fs::path over = fresh_dir("config_override");
  REQUIRE(run({"train", "--config", (cfg / "train.ini").string(), "--tau", "0.25", "--out",
               over.string()})
              .code == 0);
  CHECK(slurp(over / "config.ini").find("tau=0.25") != std::string::npos);

  // The echoed configuration reproduces the run.
  const fs::path replay = fresh_dir("config_replay");
  REQUIRE(run({"train", "--config", (out / "config.ini").string(), "--out", replay.string()})
              .code == 0);
  CHECK(slurp(replay / "D.pad") == slurp(out / "D.pad"));

  {
    std::ofstream f(cfg / "bad.ini");
    f << "x=" << (data / "X.pad").string() << "\nnot-a-flag=3\n";
  }
  CHECK(run({"train", "--config", (cfg / "bad.ini").string(), "--out", out.string()}).code ==
        cli::kUsageError);
}

TEST_CASE("encode") {
  const fs::path dir = fresh_dir("encode");
  fs::create_directories(dir);
  std::mt19937_64 rng(2);
  const Matrix X = oracle::gaussian(4, 9, rng);
  io::write_matrix(dir / "X.pad", X);
  io::write_matrix(dir / "D.pad", Matrix(Matrix::Identity(4, 4)));
  io::write_matrix(dir / "C.pad", Matrix(Matrix::Identity(4, 4)));

  const fs::path lin = dir / "linear";
  REQUIRE(run({"encode", "--x", (dir / "X.pad").string(), "--model", dir.string(), "--mode",
               "linear", "--out", lin.string()})
              .code == 0);
  CHECK(io::read_matrix(lin / "codes.pad") == X);
  const auto stats = report(slurp(lin / "encode_stats.txt"));
  CHECK(stats.at("mode") == "linear");
  CHECK(stats.at("columns") == "9");
  CHECK(std::stod(stats.at("seconds")) >= 0.0);

  const fs::path sparse = dir / "sparse";
  REQUIRE(run({"encode", "--x", (dir / "X.pad").string(), "--dictionary",
               (dir / "D.pad").string(), "--dual", (dir / "C.pad").string(), "--mode", "sparse",
               "--tau", "1e6", "--out", sparse.string()})
              .code == 0);
  CHECK(io::read_matrix(sparse / "codes.pad").isZero(0.0));

  CHECK(run({"encode", "--x", (dir / "X.pad").string(), "--out", sparse.string()}).code ==
        cli::kUsageError);
  io::write_matrix(dir / "wide.pad", Matrix(Matrix::Ones(5, 2)));
  CHECK(run({"encode", "--x", (dir / "wide.pad").string(), "--model", dir.string(), "--out",
             sparse.string()})
            .code == cli::kUsageError);
}

TEST_CASE("eval") {
  const fs::path dir = fresh_dir("eval");
  fs::create_directories(dir);
  std::mt19937_64 rng(3);
  const Matrix D = oracle::unit_columns(oracle::gaussian(6, 4, rng, 3.0));
  io::write_matrix(dir / "D.pad", D);
  io::write_matrix(dir / "C.pad", Matrix(D.transpose()));
  io::write_matrix(dir / "X.pad", oracle::gaussian(6, 30, rng));
  io::write_matrix(dir / "U.pad", oracle::gaussian(4, 30, rng));

  Result r = run({"eval", "--dictionary", (dir / "D.pad").string(), "--dual-from-dictionary"});
  REQUIRE(r.code == 0);
  CHECK(std::stod(report(r.out).at("dual_distance")) == doctest::Approx(0.0));

  r = run({"eval", "--model", dir.string(), "--x", (dir / "X.pad").string(), "--codes",
           (dir / "U.pad").string(), "--true-dict", (dir / "D.pad").string(), "--out",
           (dir / "report.txt").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto kv = report(r.out);
  CHECK(kv.count("principal_angle_pca") == 1);
  CHECK(kv.count("avg_support") == 1);
  CHECK(std::stod(kv.at("matched_fraction")) == 1.0);
  CHECK(slurp(dir / "report.txt") == r.out);

  io::write_matrix(dir / "X7.pad", oracle::gaussian(7, 30, rng));
  CHECK(run({"eval", "--model", dir.string(), "--x", (dir / "X7.pad").string()}).code ==
        cli::kUsageError);
}

TEST_CASE("render") {
  const fs::path dir = fresh_dir("render");
  fs::create_directories(dir);
  std::mt19937_64 rng(4);
  io::write_matrix(dir / "D.pad", oracle::gaussian(784, 200, rng));
  const Result r = run({"render", "--matrix", (dir / "D.pad").string(), "--tile", "28x28",
                        "--out", (dir / "atoms.pgm").string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("15 tiles per row") != std::string::npos);
  const Matrix img = io::read_pgm(dir / "atoms.pgm");
  CHECK(img.cols() == 15 * 28 + 14);
  CHECK(img.rows() == 14 * 28 + 13);

  io::write_matrix(dir / "C.pad", oracle::gaussian(10, 25, rng));
  CHECK(run({"render", "--matrix", (dir / "C.pad").string(), "--tile", "5x5", "--rows", "--out",
             (dir / "dual.pgm").string()})
            .code == 0);
  CHECK(run({"render", "--matrix", (dir / "D.pad").string(), "--tile", "5x5", "--out",
             (dir / "x.pgm").string()})
            .code == cli::kUsageError);
  CHECK(run({"render", "--matrix", (dir / "D.pad").string(), "--tile", "28by28"}).code ==
        cli::kUsageError);
}

TEST_CASE("usage") {
  CHECK(run({}).code == cli::kUsageError);
  CHECK(run({"frobnicate"}).code == cli::kUsageError);
  const Result help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("train") != std::string::npos);
}
