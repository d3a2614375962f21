// Writes the synthetic two-tone image set used by the examples in the README
// and by the end-to-end tests: four pattern classes, a few images each.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "histotile/fixture.hpp"

int main(int argc, char** argv) {
    CLI::App app{"write a synthetic histology-shaped image set"};
    std::string out_dir;
    int per_class = 4;
    int size = 128;
    std::uint64_t seed = 0;
    app.add_option("out_dir", out_dir, "output directory")->required();
    app.add_option("--per-class", per_class, "images per class");
    app.add_option("--size", size, "image edge in pixels");
    app.add_option("--seed", seed, "noise seed");
    CLI11_PARSE(app, argc, argv);

    try {
        int n = histotile::write_fixture(out_dir, per_class, size, seed);
        std::cout << "wrote " << n << " images under " << out_dir << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
