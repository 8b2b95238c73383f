// Writes the synthetic fixtures used by the smoke runs and demos.

#include "cirlab/synthetic.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Write synthetic fixture data", "cirlab-fixture"};
  app.require_subcommand(1);

  cirlab::synthetic::PlantedOptions planted;
  std::string planted_out;
  auto* p = app.add_subcommand("planted", "Gallery of 200 rendered garments plus train/held-out triplets");
  p->add_option("--out", planted_out, "Output directory")->required();
  p->add_option("--train", planted.train_triplets, "Training triplets")->capture_default_str();
  p->add_option("--heldout", planted.heldout_triplets, "Held-out triplets")->capture_default_str();
  p->add_option("--image-size", planted.image_size, "Rendered image side")->capture_default_str();
  p->add_option("--seed", planted.seed, "Seed")->capture_default_str();

  cirlab::synthetic::FixtureOptions pool;
  std::string pool_out;
  auto* q = app.add_subcommand("pool", "Raw image pool for the construction pipeline");
  q->add_option("--out", pool_out, "Output directory")->required();
  q->add_option("--images", pool.images, "Number of images (two views per item)")->capture_default_str();
  q->add_option("--image-size", pool.image_size, "Rendered image side")->capture_default_str();
  q->add_option("--seed", pool.seed, "Seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*p) cirlab::synthetic::write_planted_dataset(planted_out, planted);
    if (*q) cirlab::synthetic::write_pipeline_fixture(pool_out, pool);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
