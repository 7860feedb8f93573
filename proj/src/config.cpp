#include "ifgf/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ifgf {

double RunConfig::resolve_wavenumber(double mesh_extent) const {
    if (wavenumber > 0) return wavenumber;
    if (size_lambda <= 0) throw InvalidArgument("config: size_lambda must be positive");
    const double lambda = mesh_extent / size_lambda;
    return 2.0 * std::numbers::pi / lambda;
}

int RunConfig::resolve_splits() const {
    if (splits >= 0) return splits;
    // 6 * 4^s patches of points_per_patch^2 nodes; one split per size doubling keeps
    // the patches near 0.8 lambda
    const int s = int(std::lround(std::log2(std::max(1.0, size_lambda))));
    return std::max(0, s);
}

SolveConfig RunConfig::solve_config(double k) const {
    SolveConfig sc;
    sc.k = k;
    sc.gamma = gamma;
    sc.tol = tol;
    sc.max_iter = max_iter;
    sc.restart = restart;
    sc.finest_box_lambda = finest_box_lambda;
    sc.cone.n_c0 = n_c0;
    sc.cone.n_s0 = n_s0;
    sc.cone.ps = ps;
    sc.cone.pang = pang;
    if (dl_strategy == "auto" || dl_strategy == "hybrid")
        sc.dl_strategy = DlStrategy::Hybrid;
    else if (dl_strategy == "w4")
        sc.dl_strategy = DlStrategy::W4;
    else if (dl_strategy == "w2w3")
        sc.dl_strategy = DlStrategy::W2W3;
    else
        throw InvalidArgument("config: dl_strategy must be auto|w4|w2w3|hybrid");
    sc.rp.delta_rel = delta_rel;
    sc.rp.delta_abs = delta_abs;
    sc.rp.n_beta = n_beta;
    sc.rp.cov_d = cov_d;
    sc.workers = workers;
    return sc;
}

void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto as_double = [&] {
        try {
            return std::stod(value);
        } catch (...) {
            throw InvalidArgument("config: bad numeric value for " + key + ": " + value);
        }
    };
    auto as_int = [&] {
        try {
            return std::stoi(value);
        } catch (...) {
            throw InvalidArgument("config: bad integer value for " + key + ": " + value);
        }
    };
    if (key == "geometry") cfg.geometry = value;
    else if (key == "patch_file") cfg.patch_file = value;
    else if (key == "size_lambda") cfg.size_lambda = as_double();
    else if (key == "wavenumber") cfg.wavenumber = as_double();
    else if (key == "sphere_radius") cfg.sphere_radius = as_double();
    else if (key == "splits") cfg.splits = as_int();
    else if (key == "points_per_patch") cfg.points_per_patch = as_int();
    else if (key == "incident") cfg.incident = value;
    else if (key == "inc_theta") cfg.inc_theta = as_double();
    else if (key == "inc_phi") cfg.inc_phi = as_double();
    else if (key == "inc_source") {
        std::istringstream ss(value);
        Vec3 p;
        if (!(ss >> p.x >> p.y >> p.z))
            throw InvalidArgument("config: inc_source needs three reals");
        cfg.inc_sources.push_back(p);
    } else if (key == "tol") cfg.tol = as_double();
    else if (key == "max_iter") cfg.max_iter = as_int();
    else if (key == "restart") cfg.restart = as_int();
    else if (key == "gamma") cfg.gamma = as_double();
    else if (key == "finest_box_lambda") cfg.finest_box_lambda = as_double();
    else if (key == "n_c0") cfg.n_c0 = as_int();
    else if (key == "n_s0") cfg.n_s0 = as_int();
    else if (key == "ps") cfg.ps = as_int();
    else if (key == "pang") cfg.pang = as_int();
    else if (key == "dl_strategy") cfg.dl_strategy = value;
    else if (key == "delta") cfg.delta_rel = as_double();
    else if (key == "delta_abs") cfg.delta_abs = as_double();
    else if (key == "nbeta") cfg.n_beta = as_int();
    else if (key == "cov_d") cfg.cov_d = as_int();
    else if (key == "out") cfg.out_dir = value;
    else if (key == "workers") cfg.workers = as_int();
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "far_nphi") cfg.far_nphi = as_int();
    else if (key == "far_ntheta") cfg.far_ntheta = as_int();
    else if (key == "near_plane") cfg.near_plane = value;
    else if (key == "beta_cache") cfg.use_beta_cache = (value == "1" || value == "true");
    else throw InvalidArgument("config: unknown key '" + key + "'");
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidArgument("config: cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = true;
            for (char c : line)
                if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
            if (blank) continue;
            throw InvalidArgument("config: line " + std::to_string(lineno) +
                                  " is not 'key = value'");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        apply_key_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

std::string metadata_report(const RunConfig& cfg, const SolveResult& result, std::size_t n) {
    std::ostringstream os;
    char buf[64];
    auto put = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << key << " = " << buf << "\n";
    };
    os << "geometry = " << cfg.geometry << "\n";
    os << "unknowns = " << n << "\n";
    put("size_lambda", cfg.size_lambda);
    put("wavenumber", result.k);
    put("gamma", result.gamma);
    put("tol", cfg.tol);
    os << "max_iter = " << cfg.max_iter << "\n";
    os << "restart = " << cfg.restart << "\n";
    put("finest_box_lambda", cfg.finest_box_lambda);
    os << "n_c0 = " << cfg.n_c0 << "\nn_s0 = " << cfg.n_s0 << "\nps = " << cfg.ps
       << "\npang = " << cfg.pang << "\n";
    os << "dl_strategy = " << cfg.dl_strategy << "\n";
    put("delta_rel", cfg.delta_rel);
    put("delta_abs", cfg.delta_abs);
    os << "nbeta = " << cfg.n_beta << "\ncov_d = " << cfg.cov_d << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "iterations = " << result.iterations << "\n";
    os << "converged = " << (result.converged ? 1 : 0) << "\n";
    os << "residual_history =";
    for (double r : result.residual_history) {
        std::snprintf(buf, sizeof buf, " %.17g", r);
        os << buf;
    }
    os << "\n";
    return os.str();
}

}  // namespace ifgf
