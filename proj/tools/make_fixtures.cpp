// Writes the small end-to-end fixture: two synthetic slides with sidecars,
// their annotation files and a run configuration.

#include <CLI11.hpp>
#include <iostream>

#include "histo/imaging/image_io.hpp"
#include "histo/text.hpp"
#include "synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic fixture slides", "make_fixtures"};
  std::string dir = "fixtures";
  std::uint64_t seed = 20180611;
  app.add_option("--dir", dir, "Output directory");
  app.add_option("--seed", seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);

  namespace fs = std::filesystem;
  try {
    const fs::path root(dir);
    fs::create_directories(root / "slides");
    fs::create_directories(root / "annotations");
    histo::synth::SlideRecipe recipe;
    recipe.regions_per_class = 2;
    recipe.region_radius = 150.0;
    for (const char* id : {"slide_a", "slide_b"}) {
      const auto s = histo::synth::make_slide(recipe, id, histo::derive_seed(seed, histo::text::fnv1a(id)));
      histo::write_raster(root / "slides" / (std::string(id) + ".png"), s.slide,
                          {{"generator", "make_fixtures"}, {"seed", std::to_string(seed)}});
      histo::text::write_file(root / "annotations" / (std::string(id) + ".txt"),
                              histo::render_annotations(s.annotations));
      std::cout << "wrote " << id << " (" << s.annotations.regions().size() << " regions)\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
