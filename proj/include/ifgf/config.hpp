#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ifgf/solver.hpp"

namespace ifgf {

// CLI/run configuration. Defaults here are the library defaults; a key-value config
// file can override them and command-line flags win over both.
struct RunConfig {
    std::string geometry = "sphere";  // "sphere" | "file"
    std::string patch_file;
    double size_lambda = 4.0;  // scatterer max extent in wavelengths (sets k)
    double wavenumber = 0.0;   // if > 0, overrides size_lambda
    double sphere_radius = 1.0;
    int splits = -1;  // -1: round(log2(size_lambda)), at least 0
    int points_per_patch = 12;

    std::string incident = "plane";  // "plane" | "points"
    double inc_theta = 0.0, inc_phi = std::numbers::pi;
    std::vector<Vec3> inc_sources;

    double tol = 1e-4;
    int max_iter = 300;
    int restart = 0;
    double gamma = -1.0;

    double finest_box_lambda = 0.5;
    int n_c0 = 2, n_s0 = 1, ps = 3, pang = 5;
    std::string dl_strategy = "auto";  // auto|w4|w2w3|hybrid

    double delta_rel = 1.0;
    double delta_abs = -1.0;
    int n_beta = 96;
    int cov_d = 6;

    std::string out_dir = "out";
    int workers = 0;
    std::uint64_t seed = 1;

    int far_nphi = 200, far_ntheta = 200;
    std::string near_plane;  // "" or "xy z0 xmin xmax ymin ymax nx ny" (and xz/yz)
    bool use_beta_cache = true;

    // derived quantities
    double resolve_wavenumber(double mesh_extent) const;
    int resolve_splits() const;
    SolveConfig solve_config(double k) const;
};

// key = value lines, '#' comments; unknown keys are an error.
void apply_config_file(RunConfig& cfg, const std::string& path);
void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value);

// metadata (deterministic) report of every effective setting + results
std::string metadata_report(const RunConfig& cfg, const SolveResult& result, std::size_t n);

}  // namespace ifgf
