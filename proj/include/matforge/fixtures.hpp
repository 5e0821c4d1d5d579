#pragma once

#include <filesystem>

#include "matforge/image.hpp"
#include "matforge/mesh.hpp"

namespace matforge::fixtures {

// Cube with each face on its own cell of a 3x2 UV atlas.
Mesh make_cube();

// Lat-long UV sphere (full [0,1]^2 atlas, seam column duplicated).
Mesh make_sphere(int segments = 32, int rings = 16);

// Blocky multi-tone diffuse aligned with the cube atlas cells.
TextureMap make_cube_diffuse(int size);

// Two-band diffuse for the sphere (distinct upper/lower hemisphere colors).
TextureMap make_sphere_diffuse(int size);

// Writes the 12-material toy library (3 types x 2 subcategories x 2
// materials, procedural 64x64 maps) plus library.json under root.
// Returns the number of materials written.
int write_toy_library(const std::filesystem::path& root);

// Writes cube.obj/cube_diffuse.png and sphere.obj/sphere_diffuse.png.
void write_demo_assets(const std::filesystem::path& dir, int texture_size = 256);

} // namespace matforge::fixtures
