// Writes the synthetic IDX dataset used by the ordering experiments, so the
// full CLI pipeline can be driven end to end without external data.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "occdist/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic occlusion-sensitive IDX dataset"};
  std::string outdir = ".";
  occdist::SyntheticConfig cfg;
  app.add_option("-o,--output-dir", outdir, "Directory for the IDX files");
  app.add_option("--train", cfg.train_count, "Training image count");
  app.add_option("--test", cfg.test_count, "Test image count");
  app.add_option("--seed", cfg.seed, "Generator seed");
  app.add_option("--noise", cfg.noise, "Pixel noise level");
  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(outdir);
    const auto [train, test] = occdist::generate_synthetic(cfg);
    const std::filesystem::path dir(outdir);
    occdist::write_idx_images(train, (dir / "train-images-idx3-ubyte").string());
    occdist::write_idx_labels(train, (dir / "train-labels-idx1-ubyte").string());
    occdist::write_idx_images(test, (dir / "t10k-images-idx3-ubyte").string());
    occdist::write_idx_labels(test, (dir / "t10k-labels-idx1-ubyte").string());
    std::cout << "wrote " << train.count << " train / " << test.count << " test images to "
              << outdir << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
