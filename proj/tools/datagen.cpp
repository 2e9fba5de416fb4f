// Writes a deterministic synthetic digit corpus in MNIST IDX format, for use
// when the real MNIST files are not at hand.  The emitted files feed straight
// into `tensorloom train/bench/eval`.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "tloom/mnist.hpp"
#include "tloom/synth.hpp"

namespace {

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw tloom::FormatError("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw tloom::FormatError("write failure: " + path.string());
}

void emit(const std::filesystem::path& dir, const std::string& images_name,
          const std::string& labels_name, std::int64_t count, std::uint64_t seed) {
  const auto corpus = tloom::synth::make_digits(count, seed);
  write_file(dir / images_name, tloom::mnist::encode_idx_images(28, 28, corpus.pixels));
  write_file(dir / labels_name, tloom::mnist::encode_idx_labels(corpus.labels));
  std::fprintf(stderr, "wrote %lld examples to %s / %s\n", static_cast<long long>(count),
               (dir / images_name).c_str(), (dir / labels_name).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tensorloom-datagen: synthetic digit corpus in MNIST IDX format"};
  std::string out_dir = ".";
  std::int64_t train_count = 10000;
  std::int64_t test_count = 10000;
  std::uint64_t seed = 1;

  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--train-count", train_count, "training examples to generate")
      ->check(CLI::Range(std::int64_t{0}, std::int64_t{1} << 31))
      ->capture_default_str();
  app.add_option("--test-count", test_count, "test examples to generate")
      ->check(CLI::Range(std::int64_t{0}, std::int64_t{1} << 31))
      ->capture_default_str();
  app.add_option("--seed", seed, "corpus seed (test set uses seed+1)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    std::filesystem::create_directories(out_dir);
    emit(out_dir, "train-images-idx3-ubyte", "train-labels-idx1-ubyte", train_count, seed);
    emit(out_dir, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte", test_count, seed + 1);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
