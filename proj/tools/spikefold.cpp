// spikefold: train spiking networks with learnable spike coefficients, fold
// the coefficients into downstream kernels for binary-spike inference, and
// verify the two forms agree.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "spikefold/analysis.hpp"
#include "spikefold/data_io.hpp"
#include "spikefold/fold.hpp"
#include "spikefold/model_io.hpp"
#include "spikefold/network.hpp"
#include "spikefold/synth.hpp"

namespace {

using namespace spikefold;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitVerify = 3;
constexpr int kExitDiverged = 4;

IdxDataset load_split(const std::string& data_dir, bool train_split) {
  const std::string img = data_dir + (train_split ? "/train-images-idx3-ubyte" : "/t10k-images-idx3-ubyte");
  const std::string lab = data_dir + (train_split ? "/train-labels-idx1-ubyte" : "/t10k-labels-idx1-ubyte");
  return load_idx(img, lab);
}

std::vector<Tensor> first_maps(const IdxDataset& ds, int count) {
  std::vector<Tensor> maps;
  const int n = std::min(count, ds.count());
  maps.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) maps.push_back(ds.image_map(i));
  return maps;
}

struct CommonOpts {
  std::string data_dir = "data/mnist";
  int timesteps = 4;
  int threads = 0;
};

int cmd_train(const std::string& arch, const std::string& granularity, const CommonOpts& common, int epochs,
              int batch, float lr, float tau, float vth, uint64_t seed, const std::string& optimizer,
              const std::string& out_path, const std::string& report_path) {
  NeuronConfig cfg;
  cfg.tau = tau;
  cfg.v_th = vth;
  Network net = make_arch(arch, granularity_from_name(granularity), cfg, seed);

  IdxDataset train_set = load_split(common.data_dir, true);
  IdxDataset test_set = load_split(common.data_dir, false);

  TrainConfig tc;
  tc.timesteps = common.timesteps;
  tc.epochs = epochs;
  tc.batch_size = batch;
  tc.lr = lr;
  tc.seed = seed;
  tc.threads = common.threads;
  tc.optimizer = optimizer == "sgd-momentum" ? Optimizer::SgdMomentum : Optimizer::Adam;

  RunReport report = train(net, train_set, test_set, tc, &std::cout);
  save_model(net, out_path, common.timesteps);
  if (!report_path.empty()) {
    std::ofstream rf(report_path);
    rf << report.to_jsonl();
  }
  std::cerr << "model written to " << out_path << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const CommonOpts& common, int timesteps_override) {
  LoadedModel loaded = load_model(model_path);
  const int t = timesteps_override > 0 ? timesteps_override : loaded.default_timesteps.value_or(common.timesteps);
  IdxDataset test_set = load_split(common.data_dir, false);
  const double acc = evaluate(loaded.net, test_set, t, common.threads);
  nlohmann::json j{{"model", model_path}, {"timesteps", t}, {"test_accuracy", acc}, {"samples", test_set.count()}};
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_fold(const std::string& model_path, const std::string& out_path) {
  LoadedModel loaded = load_model(model_path);
  Network folded = fold_network(loaded.net);
  save_model(folded, out_path, loaded.default_timesteps);
  std::cerr << "folded model written to " << out_path << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& source_path, const std::string& folded_path, const CommonOpts& common, double tol,
               int count, int timesteps_override) {
  LoadedModel source = load_model(source_path);
  LoadedModel folded = load_model(folded_path);
  const int t = timesteps_override > 0 ? timesteps_override : source.default_timesteps.value_or(common.timesteps);
  IdxDataset test_set = load_split(common.data_dir, false);
  const auto inputs = first_maps(test_set, count);
  EquivalenceReport report = verify_equivalence(source.net, folded.net, inputs, t, common.threads);
  nlohmann::json j{{"inputs", report.inputs_checked},
                   {"max_abs_diff", report.max_abs_diff},
                   {"argmax_agreement", report.argmax_agreement},
                   {"tolerance", tol}};
  std::cout << j.dump() << "\n";
  if (report.max_abs_diff <= tol && report.argmax_agreement == 1.0) return kExitOk;
  std::cerr << "verification failed: max_abs_diff=" << report.max_abs_diff
            << " agreement=" << report.argmax_agreement << "\n";
  return kExitVerify;
}

int cmd_analyze(const std::string& model_path, const CommonOpts& common, int count, int bins,
                const std::string& out_dir) {
  LoadedModel loaded = load_model(model_path);
  const int t = loaded.default_timesteps.value_or(common.timesteps);
  IdxDataset test_set = load_split(common.data_dir, false);
  const int n = std::min(count, test_set.count());

  std::vector<float> binary_dump, scaled_dump;
  SpikeStats agg;
  ForwardTrace last_trace;
  for (int i = 0; i < n; ++i) {
    ForwardTrace trace = forward_traced(loaded.net, test_set.image_map(i), t);
    SpikeStats stats = spike_stats(loaded.net, trace);
    if (agg.layers.empty()) agg.layers.resize(stats.layers.size());
    for (size_t s = 0; s < stats.layers.size(); ++s) {
      agg.layers[s].firing_rate += stats.layers[s].firing_rate / n;
      agg.layers[s].mean_abs_coeff = stats.layers[s].mean_abs_coeff;
      agg.layers[s].frac_negative_coeff = stats.layers[s].frac_negative_coeff;
      agg.layers[s].coeff_count = stats.layers[s].coeff_count;
    }
    for (const auto& per_layer : trace.out)
      for (const auto& o : per_layer)
        for (int idx = 0; idx < o.size(); ++idx) binary_dump.push_back(o[idx]);
    for (const auto& per_layer : trace.scaled)
      for (const auto& o : per_layer)
        for (int idx = 0; idx < o.size(); ++idx) scaled_dump.push_back(o[idx]);
    if (i + 1 == n) last_trace = std::move(trace);
  }

  nlohmann::json layers = nlohmann::json::array();
  for (const auto& row : agg.layers)
    layers.push_back({{"firing_rate", row.firing_rate},
                      {"mean_abs_coeff", row.mean_abs_coeff},
                      {"frac_negative_coeff", row.frac_negative_coeff},
                      {"coeff_count", row.coeff_count}});
  nlohmann::json j{{"model", model_path},
                   {"samples", n},
                   {"timesteps", t},
                   {"spike_layers", layers},
                   {"binary_entropy_bits", empirical_entropy_exact(binary_dump)},
                   {"scaled_entropy_bits", empirical_entropy(scaled_dump, bins)},
                   {"capacity_binary_bits", capacity_bound(1)},
                   {"capacity_float32_bits", capacity_bound(32)}};
  if (!out_dir.empty()) {
    const auto paths = dump_channel_maps_csv(loaded.net, last_trace, out_dir);
    j["csv_files"] = paths;
  }
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_cost_report(const std::string& model_path, const std::string& report_path) {
  LoadedModel loaded = load_model(model_path);
  const Network& source = loaded.net;
  const Network folded = source.folded ? source : fold_network(source);
  CostReport report = cost_report(source, folded);
  std::cout << report.to_text();
  if (!report_path.empty()) {
    std::ofstream rf(report_path);
    rf << report.to_json() << "\n";
  }
  return kExitOk;
}

int cmd_synth(const std::string& out_dir, int train_count, int test_count, uint64_t seed) {
  std::filesystem::create_directories(out_dir);
  IdxDataset train_set = make_synth_digits(train_count, seed);
  IdxDataset test_set = make_synth_digits(test_count, seed + 1);
  save_idx(train_set, out_dir + "/train-images-idx3-ubyte", out_dir + "/train-labels-idx1-ubyte");
  save_idx(test_set, out_dir + "/t10k-images-idx3-ubyte", out_dir + "/t10k-labels-idx1-ubyte");
  std::cerr << "wrote " << train_count << " train / " << test_count << " test images to " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spiking-network training with coefficient folding for binary-spike inference"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read option defaults from an INI file (flags override)");

  CommonOpts common;
  std::string arch = "mnist-small", granularity = "element", optimizer = "adam";
  int epochs = 2, batch = 32, count = 1000, bins = 256, timesteps_override = 0;
  float lr = 1e-3f, tau = 0.5f, vth = 0.5f;
  double tol = 1e-4;
  uint64_t seed = 1;
  std::string model_path, second_path, out_path = "model.rspk", report_path, out_dir;
  int synth_train = 10000, synth_test = 2000;

  auto add_common = [&](CLI::App* cmd, bool with_t = true) {
    cmd->add_option("--data-dir", common.data_dir, "directory with IDX files (MNIST layout)");
    if (with_t) cmd->add_option("--timesteps", common.timesteps, "simulation timesteps T");
    cmd->add_option("--threads", common.threads, "worker threads (0 = all cores)");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write an RSPK container");
  train_cmd->add_option("--arch", arch, "architecture name")->check(CLI::IsMember(arch_names()));
  train_cmd->add_option("--granularity", granularity, "coefficient granularity")
      ->check(CLI::IsMember({"none", "layer", "channel", "element"}));
  train_cmd->add_option("--epochs", epochs, "training epochs");
  train_cmd->add_option("--batch", batch, "batch size");
  train_cmd->add_option("--lr", lr, "learning rate");
  train_cmd->add_option("--tau", tau, "membrane decay factor");
  train_cmd->add_option("--vth", vth, "firing threshold");
  train_cmd->add_option("--seed", seed, "RNG seed");
  train_cmd->add_option("--optimizer", optimizer, "optimizer")->check(CLI::IsMember({"adam", "sgd-momentum"}));
  train_cmd->add_option("-o,--out", out_path, "output model path");
  train_cmd->add_option("--report", report_path, "write per-epoch JSONL report here");
  add_common(train_cmd);

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a model on the test split");
  eval_cmd->add_option("model", model_path, "RSPK model")->required();
  eval_cmd->add_option("--timesteps", timesteps_override, "override stored timesteps");
  add_common(eval_cmd, false);

  CLI::App* fold_cmd = app.add_subcommand("fold", "fold coefficients into consumer kernels");
  fold_cmd->add_option("model", model_path, "RSPK model")->required();
  fold_cmd->add_option("-o,--out", out_path, "output model path")->required();

  CLI::App* verify_cmd = app.add_subcommand("verify", "check source/folded output equivalence");
  verify_cmd->add_option("source", model_path, "source RSPK model")->required();
  verify_cmd->add_option("folded", second_path, "folded RSPK model")->required();
  verify_cmd->add_option("--tol", tol, "max allowed |logit difference|");
  verify_cmd->add_option("--count", count, "number of test inputs");
  verify_cmd->add_option("--timesteps", timesteps_override, "override stored timesteps");
  add_common(verify_cmd, false);

  CLI::App* analyze_cmd = app.add_subcommand("analyze", "entropy and spike statistics");
  analyze_cmd->add_option("model", model_path, "RSPK model")->required();
  analyze_cmd->add_option("--count", count, "number of test inputs");
  analyze_cmd->add_option("--bins", bins, "histogram bins for real-valued dumps");
  analyze_cmd->add_option("--out", out_dir, "directory for per-channel CSV dumps");
  add_common(analyze_cmd, false);

  CLI::App* cost_cmd = app.add_subcommand("cost-report", "parameter/synapse/multiply counts before and after folding");
  cost_cmd->add_option("model", model_path, "RSPK model")->required();
  cost_cmd->add_option("--report", report_path, "write JSON report here");

  CLI::App* synth_cmd = app.add_subcommand("synth", "generate the synthetic digit dataset in IDX format");
  synth_cmd->add_option("--out", out_dir, "output directory")->required();
  synth_cmd->add_option("--train", synth_train, "training images");
  synth_cmd->add_option("--test", synth_test, "test images");
  synth_cmd->add_option("--seed", seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed())
      return cmd_train(arch, granularity, common, epochs, batch, lr, tau, vth, seed, optimizer, out_path,
                       report_path);
    if (eval_cmd->parsed()) return cmd_eval(model_path, common, timesteps_override);
    if (fold_cmd->parsed()) return cmd_fold(model_path, out_path);
    if (verify_cmd->parsed()) return cmd_verify(model_path, second_path, common, tol, count, timesteps_override);
    if (analyze_cmd->parsed()) return cmd_analyze(model_path, common, count, bins, out_dir);
    if (cost_cmd->parsed()) return cmd_cost_report(model_path, report_path);
    if (synth_cmd->parsed()) return cmd_synth(out_dir, synth_train, synth_test, seed);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const CorruptionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const TopologyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {  // DimensionError, InputError
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
