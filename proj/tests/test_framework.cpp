#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "clab/framework.hpp"
#include "clab/tinylm.hpp"

using namespace clab;

namespace {

std::filesystem::path temp_path(const char* tag) {
  static int counter = 0;
  char name[128];
  std::snprintf(name, sizeof name, "clab_fw_%s_%d_%d", tag,
                static_cast<int>(::getpid()), counter++);
  return std::filesystem::temp_directory_path() / name;
}

std::string slurp(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ExperimentConfig tiny_config() {
  ExperimentConfig config;
  config.stages = 2;
  config.n_facts = 12;
  config.n_subjects = 15;
  config.n_objects = 4;
  config.n_relations = 4;
  config.embed_dim = 8;
  config.hidden_dim = 12;
  config.hyper.epochs = 2;
  config.hyper.learning_rate = 0.3;
  config.seed = 5;
  return config;
}

}  // namespace

TEST_CASE("regeneration preserves prefixes, counts, and lengths") {
  RngStream init(3, 1);
  const TinyLmParams params = lm_init(10, 4, 6, 8, init);
  const std::vector<TokenSeq> split = {{1, 2, 3, 4}, {5, 6, 7, 8}, {9, 1, 2, 3}};

  RngStream r1(3, 2);
  const std::vector<TokenSeq> same = regenerate_split(
      params, split, SamplingPolicy::temperature_of(1.0), 1.0, r1);
  CHECK(same == split);

  RngStream r2(3, 3);
  const std::vector<TokenSeq> half = regenerate_split(
      params, split, SamplingPolicy::temperature_of(1.0), 0.5, r2);
  REQUIRE(half.size() == split.size());
  for (std::size_t i = 0; i < half.size(); ++i) {
    REQUIRE(half[i].size() == split[i].size());
    CHECK(half[i][0] == split[i][0]);
    CHECK(half[i][1] == split[i][1]);
  }

  RngStream r3(3, 4), r4(3, 4);
  const auto a = regenerate_split(params, split,
                                  SamplingPolicy::temperature_of(1.0), 0.5, r3);
  const auto b = regenerate_split(params, split,
                                  SamplingPolicy::temperature_of(1.0), 0.5, r4);
  CHECK(a == b);

  // a tiny prefix fraction still keeps two anchor tokens
  RngStream r5(3, 5);
  const auto anchored = regenerate_split(
      params, split, SamplingPolicy::temperature_of(1.0), 0.0, r5);
  for (std::size_t i = 0; i < anchored.size(); ++i) {
    CHECK(anchored[i][0] == split[i][0]);
    CHECK(anchored[i][1] == split[i][1]);
  }

  RngStream r6(3, 6);
  CHECK_THROWS_AS((void)regenerate_split(params, split,
                                         SamplingPolicy::greedy(), 1.5, r6),
                  std::invalid_argument);
}

TEST_CASE("a short run walks the accumulation schedule") {
  const ExperimentConfig config = tiny_config();
  const ExperimentRun run = run_stages(config);
  REQUIRE(run.records.size() == 3);

  for (std::size_t i = 0; i < run.records.size(); ++i) {
    const StageRecord& r = run.records[i];
    CHECK(r.stage == i);
    REQUIRE(r.kr_split.size() == i + 1);
    REQUIRE(r.split_generation.size() == i + 1);
    for (std::size_t k = 0; k <= i; ++k) {
      CHECK(r.split_generation[k] == i - k);
    }
    CHECK(r.masked_fraction == 0.0);  // plain cross entropy never masks
    CHECK(r.kl_unigram >= 0.0);
    CHECK(r.kl_bigram >= 0.0);
    CHECK(std::isfinite(r.kl_unigram));

    const double real = static_cast<double>(r.real_docs);
    const double total = static_cast<double>(r.real_docs + r.synthetic_docs);
    CHECK(real / total ==
          doctest::Approx(1.0 / static_cast<double>(i + 1)).epsilon(1e-12));
    CHECK(r.real_tokens == 4 * r.real_docs);
    CHECK(r.synthetic_tokens == 4 * r.synthetic_docs);
  }

  // 12 facts over 3 splits of 4 documents each
  CHECK(run.records[0].real_docs == 4);
  CHECK(run.records[1].real_docs == 4);
  CHECK(run.records[1].synthetic_docs == 4);
  CHECK(run.records[2].synthetic_docs == 8);

  CHECK(!std::isnan(run.records[0].conf_heldout));
  CHECK(!std::isnan(run.records[1].conf_heldout));
  CHECK(std::isnan(run.records[2].conf_heldout));
}

TEST_CASE("identical configurations replay identically") {
  const ExperimentConfig config = tiny_config();
  const ExperimentRun ra = run_stages(config);
  const ExperimentRun rb = run_stages(config);
  CHECK(ra.final_params == rb.final_params);

  const auto fa = temp_path("stages_a");
  const auto fb = temp_path("stages_b");
  write_stage_csv(ra, fa);
  write_stage_csv(rb, fb);
  CHECK(slurp(fa) == slurp(fb));

  const auto ka = temp_path("kr_a");
  write_kr_matrix_csv(ra, ka);
  const std::string kr_text = slurp(ka);
  CHECK(kr_text.find("stage,split,generation_tag,kr_score") == 0);

  std::filesystem::remove(fa);
  std::filesystem::remove(fb);
  std::filesystem::remove(ka);
}

TEST_CASE("invalid experiment configurations are rejected") {
  ExperimentConfig config = tiny_config();
  config.stages = 1;
  CHECK_THROWS_AS((void)run_stages(config), std::invalid_argument);

  config = tiny_config();
  config.n_facts = 2;
  CHECK_THROWS_AS((void)run_stages(config), std::invalid_argument);

  config = tiny_config();
  config.prefix_fraction = 1.5;
  CHECK_THROWS_AS((void)run_stages(config), std::invalid_argument);

  config = tiny_config();
  config.hyper.epochs = 0;
  CHECK_THROWS_AS((void)run_stages(config), std::invalid_argument);
}

TEST_CASE("artifact dumps cover corpus, checkpoints, and regenerations") {
  const auto dir = temp_path("artifacts");
  const ExperimentConfig config = tiny_config();
  const ExperimentRun run = run_stages(config, dir);

  std::ifstream corpus(dir / "corpus.txt");
  REQUIRE(bool(corpus));
  std::size_t lines = 0;
  std::string line;
  while (std::getline(corpus, line)) ++lines;
  CHECK(lines == config.n_facts);
  CHECK(std::filesystem::exists(dir / "symbols.tsv"));
  CHECK(std::filesystem::exists(dir / "questions.tsv"));

  for (std::size_t i = 0; i <= config.stages; ++i) {
    const TinyLmParams ckpt = load_checkpoint(
        dir / ("checkpoint_stage" + std::to_string(i) + ".bin"));
    CHECK(ckpt.vocab == run.vocab);
    for (std::size_t k = 0; k <= i; ++k) {
      CHECK(std::filesystem::exists(
          dir / ("regen_stage" + std::to_string(i) + "_split" +
                 std::to_string(k) + ".txt")));
    }
  }
  const TinyLmParams first = load_checkpoint(dir / "checkpoint_stage0.bin");
  const TinyLmParams last = load_checkpoint(dir / "checkpoint_stage2.bin");
  CHECK(first.embedding != last.embedding);
  CHECK(last == run.final_params);

  std::filesystem::remove_all(dir);
}

TEST_CASE("stage zero is more confident on its own output than held-out data") {
  ExperimentConfig config;
  config.stages = 2;
  config.n_facts = 42;
  config.n_subjects = 50;
  config.n_objects = 8;
  config.n_relations = 6;
  config.embed_dim = 12;
  config.hidden_dim = 24;
  config.hyper.epochs = 12;
  config.hyper.learning_rate = 0.5;
  config.seed = 2024;
  const ExperimentRun run = run_stages(config);
  CHECK(run.records[0].conf_self > run.records[0].conf_heldout);
}
