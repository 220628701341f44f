#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "uwsplat/autodiff.hpp"
#include "uwsplat/camera.hpp"
#include "uwsplat/gaussians.hpp"
#include "uwsplat/image.hpp"
#include "uwsplat/medium.hpp"
#include "uwsplat/render.hpp"

// Self-checks shared by the `check` subcommand, the acceptance run and the
// unit tests.
namespace uwsplat::verify {

struct Check {
  std::string name;
  double value = 0.0;  // measured error (or other figure)
  double limit = 0.0;  // pass iff value < limit
  bool pass = false;
};

using Suite = std::vector<Check>;

bool all_pass(const Suite& s);
std::string format(const Check& c);

// Square view along +z from the origin.
CameraView front_camera(std::size_t size, double focal);

// Splats in front of front_camera: depth in [1, 3], anisotropic scales,
// random rotation, opacity in [0.05, 0.95].
GaussianCloud random_cloud(std::mt19937_64& rng, std::size_t n, double focal, double half_extent);

RgbImage random_image(std::mt19937_64& rng, std::size_t w, std::size_t h, double lo = 0.0, double hi = 1.0);
ScalarMap random_map(std::mt19937_64& rng, std::size_t w, std::size_t h, double lo, double hi);

// Activated values drawn inside beta in [0.05, 4], b_inf in [0.02, 0.98].
MediumParams random_medium(std::mt19937_64& rng);

// Cloud parameters concatenated in CloudParams order, and back.
std::vector<double> flatten(const GaussianCloud& c);
CloudParams unflatten(const ad::Var& v, std::size_t n);

// Water preset on a white image at z = 1 against independently computed values.
Check water_oracle();
// Tile renderer vs brute force, max abs difference over color and alpha.
Check renderer_oracle(std::uint64_t seed, int clouds);
// Gradient of the backscatter term w.r.t. the cloud, and of the
// depth-weighted term w.r.t. rendered depth; both must be exactly zero.
Suite detach_contracts(std::uint64_t seed);
// max |restore(compose(J, Z, p), Z, p) - J| over random J, Z in [0, 3] and draws.
Check restore_roundtrip(std::uint64_t seed, int draws);

// Fits the 9 raw medium values to water-preset images of a synthetic scene,
// given its true color and depth, by Adam on the mean squared composition
// error. value is the worst activated-parameter error.
Check medium_recovery(std::uint64_t seed, int steps);

// Finite-difference checks (central, eps 1e-4) of every loss term, the
// medium model and the renderer; value is the worst relative error.
Suite gradient_suite(std::uint64_t seed);

Suite oracle_suite();
Suite roundtrip_suite();

}  // namespace uwsplat::verify
