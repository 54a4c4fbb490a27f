#include "clab/cli.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "clab/config.hpp"
#include "clab/csvio.hpp"
#include "clab/framework.hpp"
#include "clab/gaussian_loop.hpp"
#include "clab/gmm.hpp"
#include "clab/losses.hpp"
#include "clab/mathcore.hpp"
#include "clab/metrics.hpp"
#include "clab/report.hpp"
#include "clab/tinylm.hpp"

namespace clab {
namespace {

namespace fs = std::filesystem;

void print_usage(std::ostream& out) {
  out << "usage: collapselab <subcommand> [flags]\n"
         "\n"
         "subcommands:\n"
         "  eta --a <x>              variance amplification of |X| >= a tail sampling\n"
         "  stabilize --lambda <x>   truncation level where lambda*eta(a) = 1\n"
         "  gaussian --config <f>    single-Gaussian resampling loop\n"
         "  gmm --config <f>         mixture resampling loop, one arm per clip percentile\n"
         "  lm --config <f>          staged fact-corpus experiment, one arm per loss\n"
         "  kr-eval --checkpoint <f> --questions <tsv>\n"
         "                           retention score of a saved model\n"
         "  report --run <dir> [--svg]\n"
         "                           aggregate an existing run directory\n"
         "\n"
         "common flags:\n"
         "  --out <dir>              output root (default $COLLAPSELAB_OUT, else ./runs)\n";
}

struct Flags {
  std::map<std::string, std::string> named;
  std::set<std::string> switches;
};

Flags parse_flags(int argc, const char* const* argv, int start,
                  const std::set<std::string>& value_flags,
                  const std::set<std::string>& switch_flags = {}) {
  Flags flags;
  for (int i = start; i < argc; ++i) {
    const std::string token = argv[i];
    if (token.rfind("--", 0) != 0) {
      throw ConfigError("unexpected argument '" + token + "'");
    }
    const std::string name = token.substr(2);
    if (switch_flags.contains(name)) {
      flags.switches.insert(name);
      continue;
    }
    if (!value_flags.contains(name)) {
      throw ConfigError("unknown flag '--" + name + "'");
    }
    if (i + 1 >= argc) {
      throw ConfigError("flag '--" + name + "' needs a value");
    }
    if (!flags.named.emplace(name, argv[++i]).second) {
      throw ConfigError("duplicate flag '--" + name + "'");
    }
  }
  return flags;
}

std::string required_flag(const Flags& flags, const std::string& name) {
  const auto it = flags.named.find(name);
  if (it == flags.named.end()) {
    throw ConfigError("missing required flag '--" + name + "'");
  }
  return it->second;
}

double parse_number(const std::string& what, const std::string& text) {
  double out = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError(what + ": expected a number, got '" + text + "'");
  }
  return out;
}

std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path output_root(const Flags& flags) {
  const auto it = flags.named.find("out");
  if (it != flags.named.end()) return it->second;
  if (const char* env = std::getenv("COLLAPSELAB_OUT")) {
    if (*env) return env;
  }
  return "runs";
}

// Written (without the finished stamp) before any output so a crashed run
// still says what it was going to produce; finalized on success.
struct Manifest {
  fs::path file;
  std::string subcommand;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config_echo;
  std::vector<std::string> outputs;
  std::string started = timestamp_utc();

  void write(bool finished) const {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << "subcommand = " << subcommand << '\n';
    out << "artifact_version = 1\n";
    out << "prng = " << RngStream::kAlgorithm << '\n';
    out << "seed = " << seed << '\n';
    out << "started = " << started << '\n';
    for (const auto& [k, v] : config_echo) {
      out << "config." << k << " = " << v << '\n';
    }
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      out << "output." << i << " = " << outputs[i] << '\n';
    }
    if (finished) out << "finished = " << timestamp_utc() << '\n';
    if (!out) throw std::runtime_error("failed writing " + file.string());
  }
};

int cmd_eta(int argc, const char* const* argv) {
  const Flags flags = parse_flags(argc, argv, 2, {"a"});
  const TailThreshold a(parse_number("flag '--a'", required_flag(flags, "a")));
  std::printf("%.12f\n", eta(a));
  return 0;
}

int cmd_stabilize(int argc, const char* const* argv) {
  const Flags flags = parse_flags(argc, argv, 2, {"lambda"});
  const SamplingBias lambda(
      parse_number("flag '--lambda'", required_flag(flags, "lambda")));
  std::printf("%.12f\n", stabilizing_threshold(lambda).value());
  return 0;
}

GaussianLoopConfig gaussian_config(const ConfigMap& config) {
  GaussianLoopConfig loop;
  loop.seed = config.get_u64("seed", 0);
  loop.mu0 = config.get_double("gaussian.mu0", 0.0);
  loop.sigma0 = config.get_double("gaussian.sigma0", 1.0);
  loop.n_samples = config.get_size("gaussian.n_samples", 10000);
  loop.generations = config.get_size("gaussian.generations", 100);
  loop.lambda = config.get_double("gaussian.lambda", 1.0);

  const std::string filter = config.get_string("gaussian.filter", "none");
  if (filter == "none") {
    loop.filter = GaussianFilter::kNone;
  } else if (filter.rfind("tail:", 0) == 0) {
    loop.filter = GaussianFilter::kTail;
    loop.tail_a = parse_number("config key 'gaussian.filter'", filter.substr(5));
  } else if (filter.rfind("confidence:", 0) == 0) {
    loop.filter = GaussianFilter::kConfidence;
    loop.confidence_gamma =
        parse_number("config key 'gaussian.filter'", filter.substr(11));
  } else {
    throw ConfigError("config key 'gaussian.filter': unknown filter '" +
                      filter + "' (none, tail:<a>, confidence:<g>)");
  }

  const std::string estimator =
      config.get_string("gaussian.estimator", "perfect");
  if (estimator == "perfect") {
    loop.estimator = EstimatorKind::kPerfect;
  } else if (estimator == "noisy") {
    loop.estimator = EstimatorKind::kNoisy;
  } else {
    throw ConfigError("config key 'gaussian.estimator': expected perfect or "
                      "noisy, got '" + estimator + "'");
  }
  return loop;
}

int cmd_gaussian(int argc, const char* const* argv) {
  const Flags flags = parse_flags(argc, argv, 2, {"config", "out"});
  const ConfigMap config = ConfigMap::parse_file(required_flag(flags, "config"));
  const GaussianLoopConfig loop = gaussian_config(config);
  const std::string name = config.get_string("run.name", "gaussian");
  config.fail_on_unread();
  try {
    loop.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  const fs::path run_dir = output_root(flags) / name;
  fs::create_directories(run_dir);

  Manifest manifest;
  manifest.file = run_dir / "manifest.txt";
  manifest.subcommand = "gaussian";
  manifest.seed = loop.seed;
  manifest.config_echo = config.items();
  manifest.outputs = {"trajectory.csv"};
  manifest.write(false);

  const GaussianTrajectory traj = run_gaussian_loop(loop);
  {
    std::ofstream out(run_dir / "trajectory.csv", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write trajectory.csv");
    write_trajectory_csv(out, traj);
  }
  manifest.write(true);

  const GenerationRecord& last = traj.records.back();
  std::printf("run directory: %s\n", run_dir.string().c_str());
  std::printf("generations_recorded = %zu\n", traj.records.size());
  std::printf("final_sigma = %.12f\n", last.sigma_hat);
  std::printf("truncated = %s\n", traj.truncated ? "true" : "false");
  return 0;
}

int cmd_gmm(int argc, const char* const* argv) {
  const Flags flags = parse_flags(argc, argv, 2, {"config", "out"});
  const ConfigMap config = ConfigMap::parse_file(required_flag(flags, "config"));

  const std::uint64_t seed = config.get_u64("seed", 0);
  const std::string name = config.get_string("run.name", "gmm");
  const std::size_t components = config.get_size("gmm.components", 2);
  const std::size_t n_points = config.get_size("gmm.n_points", 50);
  const double separation = config.get_double("gmm.separation", 4.0);
  const double cluster_std = config.get_double("gmm.cluster_std", 1.0);
  const std::vector<std::string> percentiles =
      config.get_list("gmm.clip_percentiles", {"100", "80"});

  GmmLoopConfig base;
  base.components = components;
  base.n_samples = config.get_size("gmm.n_samples", 50);
  base.generations = config.get_size("gmm.generations", 50);
  base.seed = seed;
  base.sym_kl_samples = config.get_size("gmm.sym_kl_samples", 10000);
  base.em.max_iters = config.get_size("gmm.em_max_iters", 200);
  base.em.tol = config.get_double("gmm.em_tol", 1e-6);
  base.em.reg_epsilon = config.get_double("gmm.em_reg", 1e-6);
  config.fail_on_unread();
  if (components == 0) throw ConfigError("gmm.components must be positive");
  if (percentiles.empty()) {
    throw ConfigError("gmm.clip_percentiles must list at least one value");
  }

  const fs::path run_dir = output_root(flags) / name;
  fs::create_directories(run_dir);

  Manifest manifest;
  manifest.file = run_dir / "manifest.txt";
  manifest.subcommand = "gmm";
  manifest.seed = seed;
  manifest.config_echo = config.items();
  std::vector<std::pair<std::string, double>> arms;
  for (const std::string& text : percentiles) {
    const double q = parse_number("config key 'gmm.clip_percentiles'", text);
    const std::string arm = "q" + text;
    arms.emplace_back(arm, q);
    manifest.outputs.push_back(arm + "/gmm_metrics.csv");
    manifest.outputs.push_back(arm + "/points.csv");
  }
  manifest.write(false);

  // centers spaced 2*separation apart on the x axis, centered on the origin
  std::vector<std::vector<double>> centers;
  for (std::size_t c = 0; c < components; ++c) {
    const double offset =
        (static_cast<double>(c) - static_cast<double>(components - 1) / 2.0) *
        2.0 * separation;
    centers.push_back({offset, 0.0});
  }
  RngStream dataset_rng = RngStream::from_label(seed, "gmm/dataset");
  const PointSet initial =
      make_cluster_dataset(centers, cluster_std, n_points, dataset_rng);

  std::printf("run directory: %s\n", run_dir.string().c_str());
  for (const auto& [arm, q] : arms) {
    GmmLoopConfig loop = base;
    loop.clip_percentile = q;
    try {
      loop.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const GmmLoopResult result = run_gmm_loop(initial, loop);

    const fs::path arm_dir = run_dir / arm;
    fs::create_directories(arm_dir);
    {
      std::ofstream out(arm_dir / "gmm_metrics.csv", std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write gmm_metrics.csv");
      write_gmm_csv(out, result);
    }
    {
      std::ofstream out(arm_dir / "points.csv", std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write points.csv");
      out << "generation,x,y\n";
      for (const std::size_t g :
           {std::size_t{0}, result.kept_points.size() - 1}) {
        const PointSet& pts = result.kept_points[g];
        for (std::size_t i = 0; i < pts.size(); ++i) {
          const auto p = pts.point(i);
          out << g << ',' << fmt12(p[0]) << ',' << fmt12(p[1]) << '\n';
        }
        if (result.kept_points.size() == 1) break;
      }
    }
    const double first = result.records.front().trace;
    const double last = result.records.back().trace;
    std::printf("%s: trace_retained_fraction = %.12f\n", arm.c_str(),
                last / first);
  }
  manifest.write(true);
  return 0;
}

ExperimentConfig lm_experiment_config(const ConfigMap& config) {
  ExperimentConfig exp;
  exp.stages = config.get_size("lm.stages", 5);
  exp.n_facts = config.get_size("lm.n_facts", 200);
  exp.n_subjects = config.get_size("lm.n_subjects", exp.n_facts);
  exp.n_objects = config.get_size("lm.n_objects", 18);
  exp.n_relations = config.get_size("lm.n_relations", 16);
  exp.context = config.get_size("lm.context", 4);
  exp.embed_dim = config.get_size("lm.embed_dim", 16);
  exp.hidden_dim = config.get_size("lm.hidden_dim", 32);
  exp.hyper.learning_rate = config.get_double("lm.learning_rate", 0.05);
  exp.hyper.batch_size = config.get_size("lm.batch_size", 64);
  exp.hyper.epochs = config.get_size("lm.epochs", 10);
  exp.prefix_fraction = config.get_double("lm.prefix_fraction", 0.5);
  exp.smoothing_epsilon = config.get_double("lm.smoothing_epsilon", 1e-6);
  try {
    exp.regen_policy = SamplingPolicy::parse(
        config.get_string("lm.sampling", "temperature:1.0"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config key 'lm.sampling': ") + e.what());
  }
  return exp;
}

int cmd_lm(int argc, const char* const* argv) {
  const Flags flags = parse_flags(argc, argv, 2, {"config", "out"});
  const ConfigMap config = ConfigMap::parse_file(required_flag(flags, "config"));

  const std::uint64_t master_seed = config.get_u64("seed", 0);
  const std::string name = config.get_string("run.name", "lm");
  const ExperimentConfig base = lm_experiment_config(config);
  const std::size_t n_seeds = config.get_size("lm.seeds", 5);
  const bool artifacts = config.get_bool("lm.artifacts", true);
  const std::vector<std::string> loss_names =
      config.get_list("lm.losses", {"ce", "tce:0.9", "focal:2"});
  config.fail_on_unread();
  if (n_seeds == 0) throw ConfigError("lm.seeds must be positive");

  std::vector<LossSpec> losses;
  for (const std::string& text : loss_names) {
    try {
      losses.push_back(LossSpec::parse(text));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config key 'lm.losses': ") + e.what());
    }
  }

  const fs::path run_dir = output_root(flags) / name;
  fs::create_directories(run_dir);

  Manifest manifest;
  manifest.file = run_dir / "manifest.txt";
  manifest.subcommand = "lm";
  manifest.seed = master_seed;
  manifest.config_echo = config.items();
  for (const LossSpec& loss : losses) {
    for (std::size_t r = 0; r < n_seeds; ++r) {
      const std::string rel = loss.name() + "/seed" + std::to_string(r);
      manifest.outputs.push_back(rel + "/stages.csv");
      manifest.outputs.push_back(rel + "/kr_matrix.csv");
    }
  }
  manifest.write(false);

  std::printf("run directory: %s\n", run_dir.string().c_str());
  for (const LossSpec& loss : losses) {
    for (std::size_t r = 0; r < n_seeds; ++r) {
      ExperimentConfig exp = base;
      exp.loss = loss;
      exp.seed = master_seed ^ RngStream::label_id(
                                   "arm/" + loss.name() + "/seed/" +
                                   std::to_string(r));
      try {
        exp.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }

      const fs::path seed_dir =
          run_dir / loss.name() / ("seed" + std::to_string(r));
      fs::create_directories(seed_dir);
      const ExperimentRun run =
          run_stages(exp, artifacts ? seed_dir / "artifacts" : fs::path{});
      write_stage_csv(run, seed_dir / "stages.csv");
      write_kr_matrix_csv(run, seed_dir / "kr_matrix.csv");

      std::vector<double> kr0;
      for (const StageRecord& rec : run.records) {
        kr0.push_back(rec.kr_split.at(0));
      }
      const auto ttf = time_to_failure(kr0, 0.75);
      std::printf("%s seed %zu: final_kr_split0 = %.12f, ttf = %s\n",
                  loss.name().c_str(), r, kr0.back(),
                  ttf ? std::to_string(*ttf).c_str() : "none");
    }
  }
  manifest.write(true);
  return 0;
}

int cmd_kr_eval(int argc, const char* const* argv) {
  const Flags flags = parse_flags(argc, argv, 2, {"checkpoint", "questions"});
  const TinyLmParams params =
      load_checkpoint(required_flag(flags, "checkpoint"));
  const std::vector<KrQuestion> questions =
      read_questions_tsv(required_flag(flags, "questions"));
  std::printf("%.12f\n", kr_score(params, questions));
  return 0;
}

int cmd_report(int argc, const char* const* argv) {
  const Flags flags = parse_flags(argc, argv, 2, {"run"}, {"svg"});
  const fs::path run_dir = required_flag(flags, "run");
  if (!fs::is_directory(run_dir)) {
    throw ConfigError("run directory does not exist: " + run_dir.string());
  }
  const bool svg = flags.switches.contains("svg");

  std::vector<std::string> written = write_lm_report(run_dir, svg);
  const std::vector<std::string> gmm_written = write_gmm_report(run_dir, svg);
  written.insert(written.end(), gmm_written.begin(), gmm_written.end());
  if (written.empty()) {
    throw ConfigError("nothing to aggregate in " + run_dir.string());
  }

  std::ofstream out(run_dir / "report_manifest.txt", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report_manifest.txt");
  out << "subcommand = report\n";
  out << "artifact_version = 1\n";
  for (std::size_t i = 0; i < written.size(); ++i) {
    out << "output." << i << " = " << written[i] << '\n';
  }
  out.close();

  for (const std::string& file : written) {
    std::printf("wrote %s\n", (run_dir / file).string().c_str());
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  try {
    if (argc < 2) {
      print_usage(std::cerr);
      return 1;
    }
    const std::string sub = argv[1];
    if (sub == "help" || sub == "--help" || sub == "-h") {
      print_usage(std::cout);
      return 0;
    }
    if (sub == "eta") return cmd_eta(argc, argv);
    if (sub == "stabilize") return cmd_stabilize(argc, argv);
    if (sub == "gaussian") return cmd_gaussian(argc, argv);
    if (sub == "gmm") return cmd_gmm(argc, argv);
    if (sub == "lm") return cmd_lm(argc, argv);
    if (sub == "kr-eval") return cmd_kr_eval(argc, argv);
    if (sub == "report") return cmd_report(argc, argv);
    std::cerr << "unknown subcommand '" << sub << "'\n\n";
    print_usage(std::cerr);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace clab
