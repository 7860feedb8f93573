#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ifgf/geometry.hpp"
#include "ifgf/ifgf.hpp"
#include "ifgf/rp.hpp"

namespace ifgf {

double coupling_gamma(double diameter, double lambda);  // max{3, A/lambda}

struct IncidentField {
    enum class Kind { PlaneWave, PointSources };
    Kind kind = Kind::PlaneWave;
    double theta = 0.0, phi = std::numbers::pi;  // plane-wave direction angles
    std::vector<Vec3> sources;                   // for point-source incidence

    Vec3 wave_direction() const {
        return {std::cos(theta) * std::sin(phi), std::sin(theta) * std::sin(phi), std::cos(phi)};
    }
};

// Nodal samples of the incident field and the right-hand side -u^i|_Gamma.
std::vector<cplx> incident_trace(const IncidentField& field, const SurfaceMesh& mesh, double k);
cplx incident_at(const IncidentField& field, const Vec3& x, double k);

struct SolveConfig {
    double k = 0.0;            // wavenumber (radians per unit length)
    double gamma = -1.0;       // coupling parameter; <= 0 selects max{3, A/lambda}
    double tol = 1e-4;         // GMRES relative residual
    int max_iter = 300;
    int restart = 0;           // 0 = no restart
    double finest_box_lambda = 0.5;
    ConeConfig cone;
    DlStrategy dl_strategy = DlStrategy::Hybrid;  // resolved per level; W4 when no level
                                                  // is subwavelength
    RpConfig rp;
    int workers = 0;
    std::string beta_cache_path;  // optional beta-table cache location
};

// Matrix-free combined-field operator (1/2) I + D - i gamma S with the far part
// accelerated by IFGF and the level-D neighbor part split between the singular
// beta tables and direct regular summation.
class CombinedOperator {
  public:
    CombinedOperator(const SurfaceMesh& mesh, const SolveConfig& cfg);

    std::vector<cplx> apply(std::span<const cplx> density) const;
    // accelerated S/D only (no identity term); used by tests and the direct oracle
    void layer_potentials(std::span<const cplx> density, std::vector<cplx>& out_single,
                          std::vector<cplx>& out_dbl) const;
    // non-accelerated reference with identical singular handling
    std::vector<cplx> apply_direct(std::span<const cplx> density) const;

    double gamma() const { return gamma_; }
    double k() const { return cfg_.k; }
    const Octree& tree() const { return tree_; }
    const Relations& relations() const { return rel_; }
    const ConePlan& plan() const { return plan_; }
    const ProximityMap& proximity() const { return prox_; }
    const SingularPrecompute& precompute() const { return prec_; }
    const SurfaceMesh& mesh() const { return mesh_; }
    bool beta_cache_was_reused() const { return beta_cache_hit_; }
    double setup_seconds() const { return setup_seconds_; }

  private:
    const SurfaceMesh& mesh_;
    SolveConfig cfg_;
    double gamma_;
    Octree tree_;
    Relations rel_;
    ConePlan plan_;
    ProximityMap prox_;
    SingularPrecompute prec_;
    DlStrategy strategy_;
    bool beta_cache_hit_ = false;
    double setup_seconds_ = 0.0;
};

struct GmresResult {
    std::vector<cplx> solution;
    std::vector<double> residual_history;  // relative residuals, one per iteration
    int iterations = 0;
    bool converged = false;
};

// Modified Gram-Schmidt GMRES, no restart unless restart > 0.
GmresResult gmres_solve(const std::function<std::vector<cplx>(std::span<const cplx>)>& apply,
                        std::span<const cplx> rhs, double tol, int max_iter, int restart = 0);

struct SolveResult {
    std::vector<cplx> density;
    std::vector<double> residual_history;
    int iterations = 0;
    bool converged = false;
    double gamma = 0.0;
    double k = 0.0;
    // wall times (seconds)
    double time_setup = 0.0;       // octree, cone plan, classification
    double time_precompute = 0.0;  // beta tables
    double time_apply_mean = 0.0;  // per GMRES iteration
    double time_total = 0.0;
};

SolveResult solve(const SurfaceMesh& mesh, const IncidentField& incident,
                  const SolveConfig& cfg);

}  // namespace ifgf
