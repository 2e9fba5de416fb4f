// Command-line driver: train, evaluate, and benchmark the digit network.
// Progress goes to stderr; results and CSV go to stdout so they pipe cleanly.

#include <chrono>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tloom/mnist.hpp"
#include "tloom/network.hpp"
#include "tloom/runtime.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct CommonArgs {
  std::string train_images, train_labels, test_images, test_labels;
  std::string checkpoint;
  int epochs = 10;
  std::int64_t batch = 100;
  float rate = 0.05f;
  int mt = 1;
  std::uint64_t seed = 42;
  std::int64_t limit_train = 10000;
  std::int64_t limit_test = 10000;
  std::vector<int> bench_workers = {1, 2, 4, 8};
};

void add_mt_flag(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--mt", a.mt, "worker thread count")
      ->envname("TENSORLOOM_MT")
      ->check(CLI::Range(1, 64))
      ->capture_default_str();
}

void add_test_data_flags(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--test-images", a.test_images, "test images IDX file")->required();
  cmd->add_option("--test-labels", a.test_labels, "test labels IDX file")->required();
  cmd->add_option("--limit-test", a.limit_test, "use only the first N test examples (-1 = all)")
      ->check(CLI::Range(std::int64_t{-1}, std::int64_t{1} << 40))
      ->capture_default_str();
}

void add_train_flags(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--train-images", a.train_images, "training images IDX file")->required();
  cmd->add_option("--train-labels", a.train_labels, "training labels IDX file")->required();
  add_test_data_flags(cmd, a);
  cmd->add_option("--limit-train", a.limit_train,
                  "use only the first N training examples (-1 = all)")
      ->check(CLI::Range(std::int64_t{-1}, std::int64_t{1} << 40))
      ->capture_default_str();
  cmd->add_option("--epochs", a.epochs, "training epochs")
      ->check(CLI::Range(0, 1000000))
      ->capture_default_str();
  cmd->add_option("--batch", a.batch, "mini-batch size")
      ->check(CLI::Range(std::int64_t{1}, std::int64_t{1} << 40))
      ->capture_default_str();
  cmd->add_option("--rate", a.rate, "learning rate")
      ->check(CLI::Range(1e-9, 1e9))
      ->capture_default_str();
  cmd->add_option("--seed", a.seed, "parameter initialization seed")->capture_default_str();
  add_mt_flag(cmd, a);
}

struct RunOutcome {
  tloom::net::Params params;
  std::vector<double> epoch_losses;
  double accuracy = 0.0;
  double seconds = 0.0;
};

// One full measured run: load + train + evaluate, as the wall clock sees it.
RunOutcome run_workload(const CommonArgs& a, bool log_epochs) {
  const auto start = Clock::now();

  tloom::runtime::set_global_config({a.mt, tloom::runtime::ExecConfig{}.parallel_threshold});
  std::fprintf(stderr, "workers %d\n", a.mt);

  std::fprintf(stderr, "loading %s\n", a.train_images.c_str());
  const auto train_set = tloom::mnist::load_set(a.train_images, a.train_labels, a.limit_train);
  std::fprintf(stderr, "loading %s\n", a.test_images.c_str());
  const auto test_set = tloom::mnist::load_set(a.test_images, a.test_labels, a.limit_test);
  std::fprintf(stderr, "train %lld examples, test %lld examples\n",
               static_cast<long long>(train_set.size()), static_cast<long long>(test_set.size()));

  tloom::net::Hyper hyper;
  hyper.rate = a.rate;
  hyper.epochs = a.epochs;
  hyper.batch = a.batch;
  hyper.seed = a.seed;

  auto epoch_start = Clock::now();
  auto result = tloom::net::train(
      tloom::net::init_params(a.seed), train_set, hyper, [&](int epoch, double mean_loss) {
        if (log_epochs) {
          std::fprintf(stderr, "epoch %d/%d mean_loss %.6f (%.1fs)\n", epoch, a.epochs, mean_loss,
                       seconds_since(epoch_start));
        }
        epoch_start = Clock::now();
      });

  RunOutcome out;
  out.accuracy = tloom::net::evaluate(result.params, test_set);
  out.seconds = seconds_since(start);
  out.params = std::move(result.params);
  out.epoch_losses = std::move(result.epoch_mean_loss);
  return out;
}

bool params_equal(const tloom::net::Params& a, const tloom::net::Params& b) {
  using tloom::bitwise_equal;
  return bitwise_equal(a.k1, b.k1) && bitwise_equal(a.b1, b.b1) && bitwise_equal(a.k2, b.k2) &&
         bitwise_equal(a.b2, b.b2) && bitwise_equal(a.fc, b.fc) && bitwise_equal(a.b, b.b);
}

int cmd_train(const CommonArgs& a) {
  const RunOutcome out = run_workload(a, /*log_epochs=*/true);
  if (!a.checkpoint.empty()) {
    tloom::net::save_params(a.checkpoint, out.params);
    std::fprintf(stderr, "checkpoint written to %s\n", a.checkpoint.c_str());
  }
  std::printf("final_test_accuracy %.6f\n", out.accuracy);
  std::printf("total_wall_seconds %.3f\n", out.seconds);
  return 0;
}

int cmd_bench(CommonArgs a) {
  std::printf("workers,seconds,speedup_vs_1\n");
  std::fflush(stdout);

  std::optional<RunOutcome> baseline;
  for (int workers : a.bench_workers) {
    a.mt = workers;
    std::fprintf(stderr, "bench: running with %d worker(s)\n", workers);
    RunOutcome out = run_workload(a, /*log_epochs=*/false);
    const double base_seconds = baseline ? baseline->seconds : out.seconds;
    std::printf("%d,%.3f,%.3f\n", workers, out.seconds, base_seconds / out.seconds);
    std::fflush(stdout);

    if (!baseline) {
      baseline = std::move(out);
    } else if (!params_equal(baseline->params, out.params) ||
               baseline->accuracy != out.accuracy) {
      std::fprintf(stderr, "bench: results differ across worker counts\n");
      return 4;
    }
  }
  std::fprintf(stderr, "determinism: final params identical across all worker counts\n");
  return 0;
}

int cmd_eval(const CommonArgs& a) {
  tloom::runtime::set_global_config({a.mt, tloom::runtime::ExecConfig{}.parallel_threshold});
  const auto params = tloom::net::load_params(a.checkpoint);
  const auto test_set = tloom::mnist::load_set(a.test_images, a.test_labels, a.limit_test);
  std::printf("test_accuracy %.6f\n", tloom::net::evaluate(params, test_set));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tensorloom: a small CNN on a rank-polymorphic array kernel"};
  app.require_subcommand(1);
  CommonArgs args;

  CLI::App* train = app.add_subcommand("train", "train the digit network and report accuracy");
  add_train_flags(train, args);
  train->add_option("--checkpoint", args.checkpoint, "write final parameters to this file");

  CLI::App* bench =
      app.add_subcommand("bench", "run the training workload per worker count, emit CSV");
  add_train_flags(bench, args);
  bench->add_option("--bench-workers", args.bench_workers, "worker counts to benchmark")
      ->delimiter(',')
      ->check(CLI::Range(1, 64))
      ->capture_default_str();

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a test set");
  eval->add_option("--checkpoint", args.checkpoint, "checkpoint file to load")->required();
  add_test_data_flags(eval, args);
  add_mt_flag(eval, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // help text, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(train)) return cmd_train(args);
    if (app.got_subcommand(bench)) return cmd_bench(args);
    return cmd_eval(args);
  } catch (const tloom::FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}
