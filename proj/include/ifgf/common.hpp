#pragma once

#include <cmath>
#include <exception>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ifgf {

using cplx = std::complex<double>;

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double a) const { return {x * a, y * a, z * a}; }
    Vec3 operator/(double a) const { return {x / a, y / a, z / a}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double a) { x *= a; y *= a; z *= a; return *this; }

    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator*(double a, const Vec3& v) { return v * a; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm2(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(norm2(v)); }

// Error taxonomy. The CLI maps these to distinct exit codes.
struct InvalidArgument : std::runtime_error {
    explicit InvalidArgument(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : std::runtime_error {
    std::size_t byte_offset;
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
          byte_offset(offset) {}
};

struct DegenerateGeometry : std::runtime_error {
    int patch;
    DegenerateGeometry(const std::string& msg, int q)
        : std::runtime_error(msg + " (patch " + std::to_string(q) + ")"), patch(q) {}
};

struct ConvergenceFailure : std::runtime_error {
    std::vector<double> residual_history;
    ConvergenceFailure(const std::string& msg, std::vector<double> history)
        : std::runtime_error(msg), residual_history(std::move(history)) {}
};

struct InternalError : std::runtime_error {
    explicit InternalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Number of workers for parallel sections. requested <= 0 means "all hardware threads".
int resolve_workers(int requested);

// Exceptions may not escape an OpenMP region; loop bodies run through this guard and
// the first captured error is rethrown after the region.
class ParallelErrors {
  public:
    template <class F>
    void run(F&& body) noexcept {
        if (failed_) return;
        try {
            body();
        } catch (...) {
            capture(std::current_exception());
        }
    }
    void rethrow() const {
        if (failed_) std::rethrow_exception(err_);
    }

  private:
    void capture(std::exception_ptr e) noexcept;
    volatile bool failed_ = false;
    std::exception_ptr err_;
};

}  // namespace ifgf
