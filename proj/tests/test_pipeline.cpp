// End-to-end runs on the synthetic digit set: train, fold, verify, save/load.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "doctest.h"
#include "oracles.hpp"
#include "spikefold/analysis.hpp"
#include "spikefold/fold.hpp"
#include "spikefold/model_io.hpp"
#include "spikefold/network.hpp"
#include "spikefold/synth.hpp"

using namespace spikefold;
namespace fs = std::filesystem;

TEST_CASE("train / fold / verify on the synthetic digits") {
  IdxDataset train_set = make_synth_digits(4000, 11);
  IdxDataset test_set = make_synth_digits(600, 12);

  Network net = make_arch("mnist-small", Granularity::Element, NeuronConfig{}, 7);
  TrainConfig tc;
  tc.timesteps = 4;
  tc.epochs = 3;
  tc.batch_size = 32;
  tc.lr = 5e-3f;
  tc.seed = 7;
  RunReport report = train(net, train_set, test_set, tc);
  REQUIRE(report.epochs.size() == 3);
  CHECK(report.epochs.back().test_accuracy >= 0.9);
  CHECK(report.epochs.back().train_loss < report.epochs.front().train_loss * 1.5);

  Network folded = fold_network(net);
  std::vector<Tensor> inputs;
  for (int i = 0; i < 400; ++i) inputs.push_back(test_set.image_map(i));
  EquivalenceReport eq = verify_equivalence(net, folded, inputs, tc.timesteps);
  CHECK(eq.argmax_agreement == 1.0);
  CHECK(eq.max_abs_diff <= 1e-4);

  SUBCASE("the container preserves the pipeline") {
    const fs::path dir = fs::temp_directory_path() / ("spikefold-pipe-" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const std::string src_path = (dir / "model.rspk").string();
    const std::string fold_path = (dir / "folded.rspk").string();
    save_model(net, src_path, tc.timesteps);
    LoadedModel loaded = load_model(src_path);
    Network refolded = fold_network(loaded.net);
    save_model(refolded, fold_path, tc.timesteps);
    LoadedModel folded_loaded = load_model(fold_path);
    CHECK(folded_loaded.net.folded);
    EquivalenceReport eq2 = verify_equivalence(loaded.net, folded_loaded.net, inputs, tc.timesteps);
    CHECK(eq2.argmax_agreement == 1.0);
    CHECK(eq2.max_abs_diff <= 1e-4);
    fs::remove_all(dir);
  }

  SUBCASE("trained coefficients moved away from one") {
    ForwardTrace trace = forward_traced(net, test_set.image_map(0), tc.timesteps);
    SpikeStats stats = spike_stats(net, trace);
    bool moved = false;
    for (const auto& row : stats.layers)
      if (row.coeff_count > 0 && std::abs(row.mean_abs_coeff - 1.0) > 1e-4) moved = true;
    CHECK(moved);
  }
}

TEST_CASE("the CLI trains deterministically: same seed, same report") {
  const char* cli_env = std::getenv("SPIKEFOLD_CLI");
  if (!cli_env || !*cli_env) {
    MESSAGE("SPIKEFOLD_CLI not set; run via ctest");
    return;
  }
  const std::string cli = cli_env;
  const fs::path dir = fs::temp_directory_path() / ("spikefold-det-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string data = (dir / "data").string();
  REQUIRE(std::system((cli + " synth --out " + data + " --train 512 --test 128 --seed 3 2> /dev/null").c_str()) == 0);

  auto train_once = [&](const std::string& tag) {
    const std::string report = (dir / (tag + ".jsonl")).string();
    const std::string cmd = cli + " train --arch mnist-small --granularity element --timesteps 4 --epochs 2" +
                            " --batch 16 --seed 7 --data-dir " + data + " -o " + (dir / (tag + ".rspk")).string() +
                            " --report " + report + " > /dev/null 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    // strip the wall-time field: timing is not a metric
    std::ifstream f(report);
    std::string all, line;
    while (std::getline(f, line)) {
      const auto pos = line.find(",\"wall_time_s\"");
      all += line.substr(0, pos != std::string::npos ? pos : line.size());
      all += "\n";
    }
    return all;
  };

  const std::string a = train_once("a"), b = train_once("b");
  CHECK(!a.empty());
  CHECK(a == b);

  // and the two model files are byte-identical
  std::ifstream fa(dir / "a.rspk", std::ios::binary), fb(dir / "b.rspk", std::ios::binary);
  std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ba == bb);
  fs::remove_all(dir);
}

TEST_CASE("granularities train and fold on a reduced synthetic run") {
  IdxDataset train_set = make_synth_digits(2500, 21);
  IdxDataset test_set = make_synth_digits(200, 22);
  for (Granularity g : {Granularity::None, Granularity::Layer, Granularity::Channel}) {
    Network net = make_arch("mnist-small", g, NeuronConfig{}, 3);
    TrainConfig tc;
    tc.timesteps = 2;
    tc.epochs = 2;
    tc.batch_size = 32;
    tc.lr = 5e-3f;
    tc.seed = 3;
    RunReport report = train(net, train_set, test_set, tc);
    CHECK(report.epochs.back().test_accuracy > 0.6);

    Network folded = fold_network(net);
    std::vector<Tensor> inputs;
    for (int i = 0; i < 100; ++i) inputs.push_back(test_set.image_map(i));
    EquivalenceReport eq = verify_equivalence(net, folded, inputs, tc.timesteps);
    CHECK(eq.argmax_agreement == 1.0);
    CHECK(eq.max_abs_diff <= 1e-4);
  }
}
