// Regenerates the bundled synthetic product corpus.

#include <CLI11.hpp>
#include <iostream>

#include "reasonrec/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write the synthetic review and metadata files", "make_synthetic"};
  std::string out = "data/synthetic";
  reasonrec::SyntheticSpec spec;
  app.add_option("--out", out, "Output directory");
  app.add_option("--users", spec.users);
  app.add_option("--items", spec.items);
  app.add_option("--seed", spec.seed);
  CLI11_PARSE(app, argc, argv);
  try {
    reasonrec::write_synthetic(out, spec);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
