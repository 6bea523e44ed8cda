#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "kolmo/error.hpp"
#include "kolmo/fields.hpp"
#include "kolmo/group.hpp"

namespace kolmo {

/// Central flow difference of u along Y with one Richardson halving.
double lie_derivative_fd(const ScalarFn& u, const Point& z, const OperatorSpec& spec, double h = 1e-3);

enum class TaylorForm { Euclidean, Group };

/// Second order intrinsic Taylor polynomial of u at z, evaluated at zeta.
double taylor2(const C2Bundle& u, const Point& z, const Point& zeta, TaylorForm form, const OperatorSpec& spec);

struct RemainderSample {
    double rho = 0.0;
    double remainder = 0.0;
    double ratio = 0.0;  // remainder / rho^2
};

std::vector<RemainderSample> remainder_profile(const C2Bundle& u, const Point& z,
                                               const std::function<Point(double)>& path,
                                               const std::vector<double>& rhos, TaylorForm form,
                                               const OperatorSpec& spec);

/// max_i |d_i u(exp(sB)x, t - s) - d_i u(x, t)| / |s|^{1/2} for each s.
std::vector<double> ymix_profile(const C2Bundle& u, const Point& z, const std::vector<double>& s_list,
                                 const OperatorSpec& spec);

/// max |T_euclidean - T_group| / kdist(z, zeta)^2 over sampled zeta in Q_radius(z).
double taylor_form_constant(const C2Bundle& u, const OperatorSpec& spec, const Point& z, double radius, int samples,
                            std::uint64_t seed);

// Trajectories ------------------------------------------------------------------

enum class SegmentKind { X, Y };

struct PathSegment {
    SegmentKind kind = SegmentKind::X;
    Vector v;  // direction in V_0 (empty for Y)
    double s = 0.0;
    Point start;
    Point end;
    int level = 0;  // -1: time matching, 0: level-0 move or correction, n: part of gamma^(n)
};

Point flow_X(const Vector& v, double s, const Point& z);
Point flow_Y(double s, const Point& z, const OperatorSpec& spec);

struct Trajectory {
    Point end;
    std::vector<PathSegment> segments;
};

/// gamma^(n)_{v,s}(z) with its full segment trace.
Trajectory gamma_traj(int n, const Vector& v, double s, const Point& z, const OperatorSpec& spec);

/// Net spatial displacement of gamma^(n)_{v,s}; it does not depend on z.
Vector traj_increment(int n, const Vector& v, double s, const OperatorSpec& spec);

struct PathPlan {
    std::vector<PathSegment> segments;
    Point source;
    Point target;
    double achieved_error = 0.0;  // max coordinate error of the final endpoint
    double kdist_error = 0.0;     // kdist(endpoint, target)
    double tolerance = 0.0;
    int iterations = 0;
    std::vector<double> iteration_errors;

    Point endpoint() const { return segments.empty() ? source : segments.back().end; }
};

class PlanError : public Error {
public:
    PlanError(ErrorKind kind, const std::string& what, PathPlan best)
        : Error(kind, what), best_(std::make_shared<PathPlan>(std::move(best))) {}
    const PathPlan& best_plan() const { return *best_; }

private:
    std::shared_ptr<PathPlan> best_;
};

inline constexpr int kConnectMaxIterations = 50;

PathPlan connect(const Point& z, const Point& zeta, const OperatorSpec& spec, double tol = 1e-10,
                 int max_iterations = kConnectMaxIterations);

struct PlanReport {
    double reexec_error = 0.0;
    double endpoint_error = 0.0;
    double length = 0.0;  // sum |s| over X segments plus sum |s|^{1/2} over Y segments
    double distance = 0.0;
    double length_ratio = 0.0;
};

/// Re-executes every segment; throws PlanIntegrity on broken chaining,
/// re-execution mismatch or an endpoint outside the plan tolerance.
PlanReport verify_plan(const PathPlan& plan, const OperatorSpec& spec);

/// Largest length / kdist ratio over random connects inside Q_radius(0).
double fit_plan_length_constant(const OperatorSpec& spec, double radius, int samples, std::uint64_t seed);

}  // namespace kolmo
