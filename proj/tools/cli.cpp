#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "paddle/core.hpp"
#include "paddle/data.hpp"
#include "paddle/io.hpp"
#include "paddle/metrics.hpp"
#include "paddle/solvers.hpp"
#include "paddle/trainer.hpp"

namespace paddle::cli {

namespace fs = std::filesystem;

namespace {

/// Raised for inconsistent flag combinations found after parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::string format_number(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out.flush()) throw Error("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string g_config_path;  // consumed by expand_config before parsing

void add_config(CLI::App* sub) {
  sub->add_option("--config", g_config_path,
                  "Read flags from a key=value file; command-line flags take precedence")
      ->configurable(false);
}

// Repeated scalar flags keep their last value, so flags spliced in from a
// config file are overridden by the ones typed after them.
void last_wins(CLI::App* sub) {
  for (CLI::Option* opt : sub->get_options()) {
    if (opt->get_items_expected_max() == 1) {
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
  }
}

// Config files apply to one subcommand: `paddle train --config run.ini`.
// Their entries become flags inserted right after the subcommand name, so
// unknown keys fail exactly like unknown flags.
std::vector<std::string> expand_config(const std::vector<std::string>& args,
                                       const CLI::App& app) {
  if (args.empty() || app.get_subcommand_no_throw(args[0]) == nullptr) return args;
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;

  const std::vector<CLI::ConfigItem> items = CLI::ConfigINI().from_file(path);
  std::vector<std::string> expanded{args[0]};
  for (const CLI::ConfigItem& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == args[0])) {
      throw UsageError("config key '" + item.fullname() + "' does not belong to " + args[0]);
    }
    if (item.name == "config") throw UsageError("config files cannot name other config files");
    if (item.inputs.size() == 1 && item.inputs[0].empty()) continue;
    if (item.inputs.size() == 1) {
      expanded.push_back("--" + item.name + "=" + item.inputs[0]);
    } else {
      expanded.push_back("--" + item.name);
      expanded.insert(expanded.end(), item.inputs.begin(), item.inputs.end());
    }
  }
  expanded.insert(expanded.end(), args.begin() + 1, args.end());
  return expanded;
}

struct ModelPaths {
  std::string dir;
  std::string dictionary;
  std::string dual;

  void bind(CLI::App* sub) {
    sub->add_option("--model", dir, "Directory holding D.pad and C.pad");
    sub->add_option("--dictionary", dictionary, "Dictionary D (d x K)");
    sub->add_option("--dual", dual, "Dual C (K x d)");
  }

  fs::path dictionary_path() const {
    if (!dictionary.empty()) return dictionary;
    if (!dir.empty()) return fs::path(dir) / "D.pad";
    throw UsageError("no dictionary given (use --model or --dictionary)");
  }

  fs::path dual_path() const {
    if (!dual.empty()) return dual;
    if (!dir.empty()) return fs::path(dir) / "C.pad";
    throw UsageError("no dual given (use --model or --dual)");
  }

  bool has_dual() const { return !dual.empty() || !dir.empty(); }
};

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenOptions {
  std::string variant = "low-rank";
  Index d = 25;
  Index k_true = 15;
  Index n = 2000;
  Index superposition = 3;
  double noise_sigma = -1.0;
  std::uint64_t seed = 0;
  std::vector<std::string> images;
  Index patch_side = 12;
  Index count = 1000;
  std::string normalization = "berkeley";
  std::string out = ".";
};

Normalization parse_normalization(const std::string& s) {
  if (s == "berkeley") return Normalization::berkeley;
  if (s == "unit-range") return Normalization::unit_range;
  return Normalization::none;
}

void cmd_gen(const GenOptions& o, const std::string& resolved, std::ostream& out) {
  const fs::path dir(o.out);
  std::string manifest = resolved;
  if (o.variant == "patches") {
    if (o.images.empty()) throw UsageError("--variant patches needs --images");
    PatchSpec spec;
    spec.patch_side = o.patch_side;
    spec.count = o.count;
    spec.normalization = parse_normalization(o.normalization);
    spec.seed = o.seed;
    if (spec.patch_side < 1 || spec.count < 1) {
      throw ContractViolation("patch-side and count must be positive");
    }
    std::vector<Matrix> images;
    for (const auto& p : o.images) images.push_back(io::read_any(p));
    const Matrix X = sample_patches(images, spec);
    ensure_dir(dir);
    io::write_matrix(dir / "X.pad", X);
    manifest += "# rows=" + std::to_string(X.rows()) + " cols=" + std::to_string(X.cols()) + "\n";
    write_text(dir / "manifest.txt", manifest);
    out << "wrote " << (dir / "X.pad").string() << " (" << X.rows() << "x" << X.cols() << ")\n";
    return;
  }

  SyntheticSpec spec;
  spec.variant = o.variant == "tight-frame" ? SyntheticVariant::tight_frame
                                            : SyntheticVariant::low_rank;
  spec.d = o.d;
  spec.k_true = o.k_true;
  spec.n = o.n;
  spec.superposition = o.superposition;
  if (o.noise_sigma >= 0.0) spec.noise_sigma = o.noise_sigma;
  spec.seed = o.seed;
  spec.validate();

  const SyntheticData data = spec.variant == SyntheticVariant::low_rank ? gen_low_rank(spec)
                                                                        : gen_tight_frame(spec);
  ensure_dir(dir);
  io::write_matrix(dir / "X.pad", data.X);
  io::write_matrix(dir / "generators.pad", data.generators);
  io::write_matrix(dir / "coefficients.pad", data.coefficients);
  manifest += "# rows=" + std::to_string(data.X.rows()) + " cols=" +
              std::to_string(data.X.cols()) + " noise_sigma_used=" +
              format_number(data.noise_sigma) + "\n";
  write_text(dir / "manifest.txt", manifest);
  out << "wrote " << (dir / "X.pad").string() << " (" << data.X.rows() << "x"
      << data.X.cols() << ")\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string x;
  Index k = 100;
  HyperParams hp;
  std::string init = "data-columns";
  std::string d0;
  std::string c0;
  std::string u0;
  int snapshot_every = 0;
  std::string out = "run";
};

void cmd_train(TrainOptions o, const std::string& resolved, std::ostream& out) {
  o.hp.validate();
  const Matrix X = io::read_any(o.x);

  InitStrategy<double> strategy;
  if (o.init == "gaussian") {
    strategy.variant = InitVariant::gaussian;
  } else if (o.init == "provided") {
    if (o.d0.empty() || o.c0.empty()) throw UsageError("--init provided needs --d0 and --c0");
    Matrix D0 = io::read_any(o.d0);
    Matrix C0 = io::read_any(o.c0);
    Matrix U0 = o.u0.empty() ? Matrix::Zero(D0.cols(), X.cols()) : io::read_any(o.u0);
    o.k = D0.cols();
    strategy = InitStrategy<double>::provided(std::move(D0), std::move(C0), std::move(U0));
  }

  const fs::path dir(o.out);
  ensure_dir(dir);
  write_text(dir / "config.ini", resolved);

  auto snapshot = [&](const IterationRecord<double>& r, const Matrix& D, const Matrix& C,
                      const Matrix&) {
    if (o.snapshot_every > 0 && r.t % o.snapshot_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "%05d", r.t);
      ensure_dir(dir / "snapshots");
      io::write_matrix(dir / "snapshots" / (std::string("D_") + name + ".pad"), D);
      io::write_matrix(dir / "snapshots" / (std::string("C_") + name + ".pad"), C);
    }
  };

  try {
    TrainResult<double> result = train(X, o.k, o.hp, strategy, snapshot);
    io::write_matrix(dir / "D.pad", result.model.dictionary());
    io::write_matrix(dir / "C.pad", result.model.dual());
    io::write_matrix(dir / "U.pad", result.codes);
    io::write_trace_csv(dir / "trace.csv", result.trace);
    const auto& last = result.trace.records.back();
    out << "stop=" << to_string(result.trace.stop) << " iterations=" << last.t
        << " energy=" << format_number(last.energy.total) << "\n";
  } catch (const TrainingDiverged<double>& e) {
    io::write_trace_csv(dir / "trace.csv", e.trace());
    throw;
  }
}

// ---------------------------------------------------------------------------
// encode
// ---------------------------------------------------------------------------

struct EncodeOptions {
  std::string x;
  ModelPaths model;
  std::string mode = "linear";
  HyperParams hp;
  std::string out = "encoded";
};

void cmd_encode(const EncodeOptions& o, std::ostream& out) {
  const Matrix X = io::read_any(o.x);
  const Matrix D = io::read_any(o.model.dictionary_path());
  const Matrix C = io::read_any(o.model.dual_path());
  const Model<double> model(D, C);
  detail::require_conform(X.rows() == model.signal_dim(), "X", X, "D", D);

  Matrix codes;
  int iterations = 0;
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  if (o.mode == "linear") {
    codes = encode_linear(X, model);
  } else {
    auto [U, report] = solve_codes<double>(X, model, Matrix::Zero(model.atoms(), X.cols()), o.hp);
    codes = std::move(U);
    iterations = report.iterations_run;
  }
  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();

  const fs::path dir(o.out);
  ensure_dir(dir);
  io::write_matrix(dir / "codes.pad", codes);
  std::ostringstream stats;
  stats << "mode=" << o.mode << "\ncolumns=" << X.cols() << "\natoms=" << codes.rows()
        << "\niterations=" << iterations << "\nseconds=" << format_number(seconds) << "\n";
  write_text(dir / "encode_stats.txt", stats.str());
  out << stats.str();
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string x;
  ModelPaths model;
  std::string codes;
  std::string true_dict;
  Index pca_k = 0;
  double theta = 0.95;
  double zero_tol = 1e-12;
  bool dual_from_dictionary = false;
  std::string out;
};

void cmd_eval(const EvalOptions& o, std::ostream& out) {
  const Matrix D = io::read_any(o.model.dictionary_path());
  Matrix C;
  if (o.dual_from_dictionary) {
    C = project_rows(D.transpose());
  } else {
    C = io::read_any(o.model.dual_path());
  }
  const Model<double> model(D, C);

  std::ostringstream report;
  report << "d=" << model.signal_dim() << "\nk=" << model.atoms() << "\n";
  const DualDistance<double> dd = dual_distance(model);
  report << "dual_distance=" << format_number(dd.value)
         << "\ndual_pairs_skipped=" << dd.pairs_skipped << "\n";

  if (!o.codes.empty()) {
    const Matrix U = io::read_any(o.codes);
    detail::require_conform(U.rows() == model.atoms(), "U", U, "D", D);
    const SupportStats stats = support_stats(U, o.zero_tol);
    std::vector<bool> used;
    for (Index n : stats.per_atom_usage) used.push_back(n > 0);
    report << "avg_support=" << format_number(stats.avg_support) << "\n";
    report << "atoms_used="
           << std::count(used.begin(), used.end(), true) << "\n";
    if (std::find(used.begin(), used.end(), true) != used.end()) {
      report << "dual_distance_used=" << format_number(dual_distance(D, C, used).value) << "\n";
    }
    if (!o.x.empty()) {
      const Matrix X = io::read_any(o.x);
      detail::require_conform(X.rows() == model.signal_dim() && X.cols() == U.cols(), "X", X,
                              "D*U", U);
      HyperParams none;
      none.eta = 0.0;
      report << "reconstruction=" << format_number(energy(X, model, U, none).reconstruction)
             << "\n";
    }
  }

  if (!o.x.empty()) {
    const Matrix X = io::read_any(o.x);
    detail::require_conform(X.rows() == model.signal_dim(), "X", X, "D", D);
    const Index k = o.pca_k > 0 ? o.pca_k : std::min(model.atoms(), model.signal_dim());
    if (k <= model.atoms() && k <= std::min(X.rows(), X.cols())) {
      const Matrix pca = pca_basis(X, k);
      if (k == model.atoms()) {
        report << "principal_angle_pca=" << format_number(largest_principal_angle(D, pca))
               << "\n";
      }
      const Matrix residual = X - pca * (pca.transpose() * X);
      report << "pca_k=" << k << "\npca_reconstruction="
             << format_number(residual.squaredNorm() / static_cast<double>(X.rows())) << "\n";
    }
  }

  if (!o.true_dict.empty()) {
    const Matrix T = io::read_any(o.true_dict);
    detail::require_conform(T.rows() == model.signal_dim(), "true dictionary", T, "D", D);
    const MatchReport<double> match = match_atoms(T, D, o.theta);
    report << "matched_fraction=" << format_number(match.matched_fraction)
           << "\nmatch_theta=" << format_number(o.theta) << "\n";
    if (T.cols() == D.cols() && D.cols() <= D.rows()) {
      report << "principal_angle_true=" << format_number(largest_principal_angle(D, T))
             << "\n";
    }
  }

  if (!o.out.empty()) write_text(o.out, report.str());
  out << report.str();
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

struct RenderOptions {
  std::string matrix;
  std::string tile;
  bool rows = false;
  std::string out = "atoms.pgm";
};

void cmd_render(const RenderOptions& o, std::ostream& out) {
  Index tr = 0;
  Index tc = 0;
  char sep = 0;
  std::istringstream in(o.tile);
  if (!(in >> tr >> sep >> tc) || (sep != 'x' && sep != 'X') || tr < 1 || tc < 1) {
    throw UsageError("--tile must look like ROWSxCOLS, got '" + o.tile + "'");
  }
  Matrix M = io::read_any(o.matrix);
  if (o.rows) M.transposeInPlace();
  if (M.rows() != tr * tc) {
    throw ContractViolation("atoms have length " + std::to_string(M.rows()) +
                            " which does not match --tile " + std::to_string(tr) + "x" +
                            std::to_string(tc) + " (" + std::to_string(tr * tc) + ")");
  }
  const io::TileLayout layout = io::write_pgm_tiles(M, tr, tc, o.out);
  out << "wrote " << o.out << " (" << layout.width << "x" << layout.height << ", "
      << layout.tiles_per_row << " tiles per row)\n";
}

void bind_inner(CLI::App* sub, HyperParams& hp) {
  sub->add_option("--inner-max-iter", hp.inner_max_iter, "Inner solver iteration cap")
      ->capture_default_str();
  sub->add_option("--inner-rtol", hp.inner_rtol, "Inner solver relative tolerance")
      ->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dictionary and dual encoder learning toolkit", "paddle"};
  app.require_subcommand(1);

  GenOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic or patch dataset");
  add_config(gen_cmd);
  gen_cmd->add_option("--variant", gen.variant)
      ->check(CLI::IsMember({"low-rank", "tight-frame", "patches"}))
      ->capture_default_str();
  gen_cmd->add_option("--d", gen.d, "Signal dimension")->capture_default_str();
  gen_cmd->add_option("--k-true", gen.k_true, "Number of generating atoms")->capture_default_str();
  gen_cmd->add_option("--n", gen.n, "Number of examples")->capture_default_str();
  gen_cmd->add_option("--superposition", gen.superposition, "Atoms per tight-frame example")
      ->capture_default_str();
  gen_cmd->add_option("--noise-sigma", gen.noise_sigma,
                      "Noise standard deviation (negative: 1% of the data RMS)")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("--images", gen.images, "Grayscale images (.pgm, .pad, .csv)");
  gen_cmd->add_option("--patch-side", gen.patch_side)->capture_default_str();
  gen_cmd->add_option("--count", gen.count, "Number of patches")->capture_default_str();
  gen_cmd->add_option("--normalization", gen.normalization)
      ->check(CLI::IsMember({"berkeley", "unit-range", "none"}))
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->capture_default_str();

  TrainOptions tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Learn a dictionary and its dual");
  add_config(train_cmd);
  train_cmd->add_option("--x", tr.x, "Training data (d x N)")->required();
  train_cmd->add_option("--k", tr.k, "Number of atoms")->capture_default_str();
  train_cmd->add_option("--tau", tr.hp.tau, "l1 weight")->capture_default_str();
  train_cmd->add_option("--eta", tr.hp.eta, "Coding-error weight")->capture_default_str();
  train_cmd->add_option("--mu", tr.hp.mu, "l2 weight on the codes")->capture_default_str();
  train_cmd->add_option("--rtol", tr.hp.rtol, "Outer relative tolerance")->capture_default_str();
  train_cmd->add_option("--t-max", tr.hp.t_max, "Outer iteration cap")->capture_default_str();
  auto* history = train_cmd->add_option("--history", tr.hp.history_h, "Stopping window H")
                      ->capture_default_str();
  bind_inner(train_cmd, tr.hp);
  train_cmd->add_option("--seed", tr.hp.seed)->capture_default_str();
  train_cmd->add_option("--min-usage", tr.hp.min_usage,
                        "Replace atoms used by at most this many codes")
      ->capture_default_str();
  train_cmd->add_option("--init", tr.init)
      ->check(CLI::IsMember({"data-columns", "gaussian", "provided"}))
      ->capture_default_str();
  train_cmd->add_option("--d0", tr.d0, "Initial dictionary (--init provided)");
  train_cmd->add_option("--c0", tr.c0, "Initial dual (--init provided)");
  train_cmd->add_option("--u0", tr.u0, "Initial codes (--init provided, default zero)");
  train_cmd->add_option("--snapshot-every", tr.snapshot_every,
                        "Write D and C every this many iterations (0: never)")
      ->capture_default_str();
  train_cmd->add_option("--out", tr.out, "Output directory")->capture_default_str();

  EncodeOptions enc;
  CLI::App* encode_cmd = app.add_subcommand("encode", "Encode data with a trained model");
  add_config(encode_cmd);
  encode_cmd->add_option("--x", enc.x, "Data to encode (d x N)")->required();
  enc.model.bind(encode_cmd);
  encode_cmd->add_option("--mode", enc.mode)
      ->check(CLI::IsMember({"linear", "sparse"}))
      ->capture_default_str();
  encode_cmd->add_option("--tau", enc.hp.tau)->capture_default_str();
  encode_cmd->add_option("--eta", enc.hp.eta)->capture_default_str();
  encode_cmd->add_option("--mu", enc.hp.mu)->capture_default_str();
  bind_inner(encode_cmd, enc.hp);
  encode_cmd->add_option("--out", enc.out, "Output directory")->capture_default_str();

  EvalOptions ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Report metrics of a trained model");
  add_config(eval_cmd);
  ev.model.bind(eval_cmd);
  eval_cmd->add_option("--x", ev.x, "Data for the PCA comparison and reconstruction");
  eval_cmd->add_option("--codes", ev.codes, "Codes U for support statistics");
  eval_cmd->add_option("--true-dict", ev.true_dict, "Generating dictionary for atom matching");
  eval_cmd->add_option("--pca-k", ev.pca_k, "PCA components (default: K)");
  eval_cmd->add_option("--theta", ev.theta, "Match threshold on |cosine|")->capture_default_str();
  eval_cmd->add_option("--zero-tol", ev.zero_tol)->capture_default_str();
  eval_cmd->add_flag("--dual-from-dictionary", ev.dual_from_dictionary,
                     "Use the projected transpose of D as the dual");
  eval_cmd->add_option("--out", ev.out, "Also write the report to this file");

  RenderOptions rd;
  CLI::App* render_cmd = app.add_subcommand("render", "Render atoms as a tiled graymap");
  add_config(render_cmd);
  render_cmd->add_option("--matrix", rd.matrix, "Matrix whose columns are atoms")->required();
  render_cmd->add_option("--tile", rd.tile, "Tile size ROWSxCOLS")->required();
  render_cmd->add_flag("--rows", rd.rows, "Render rows instead of columns (for a dual)");
  render_cmd->add_option("--out", rd.out, "Output .pgm path")->capture_default_str();

  for (CLI::App* sub : {gen_cmd, train_cmd, encode_cmd, eval_cmd, render_cmd}) last_wins(sub);

  try {
    const std::vector<std::string> expanded = expand_config(args, app);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    if (gen_cmd->parsed()) {
      cmd_gen(gen, gen_cmd->config_to_str(true, false), out);
    } else if (train_cmd->parsed()) {
      if (history->count() == 0) {
        // Keep the default window usable for short runs and echo the value used.
        history->default_val(std::min(tr.hp.history_h, std::max(1, tr.hp.t_max - 1)));
      }
      cmd_train(tr, train_cmd->config_to_str(true, false), out);
    } else if (encode_cmd->parsed()) {
      cmd_encode(enc, out);
    } else if (eval_cmd->parsed()) {
      cmd_eval(ev, out);
    } else if (render_cmd->parsed()) {
      cmd_render(rd, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const InsufficientData& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const ConstantData& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kSuccess;
}

}  // namespace paddle::cli
