// Writes a planted-signal dataset (bundle, manifest, masks) for trying the
// CLI without real embeddings.

#include <iostream>

#include <CLI11.hpp>

#include "xrprobe/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic patch-signal dataset"};
  xrprobe::synth::PatchSignalSpec spec;
  std::string out;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--train", spec.n_train, "Training images");
  app.add_option("--val", spec.n_val, "Validation images");
  app.add_option("--test", spec.n_test, "Test images");
  app.add_option("--dim", spec.dim, "Embedding dimension");
  app.add_option("--grid", spec.grid, "Patch grid side");
  app.add_option("--signal", spec.signal, "Norm of the planted pattern");
  app.add_option("--seed", spec.seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);
  try {
    xrprobe::synth::write_dataset(xrprobe::synth::make_patch_signal(spec), out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}
